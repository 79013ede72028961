"""Voxel-wise porosity prediction for laser powder bed fusion from in-situ
thermal features (time above melt threshold and peak radiance)."""

from .grid import Label, LabelGrid, ThermalFeatureGrid, VoxelGrid3

__version__ = "0.1.0"

__all__ = ["Label", "LabelGrid", "ThermalFeatureGrid", "VoxelGrid3", "__version__"]
