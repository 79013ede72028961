import numpy as np
import pytest

from thermopore.grid import LabelGrid, ThermalFeatureGrid, VoxelGrid3


def random_thermal(rng, nx, ny, nz, mask_p=0.85, spacing=(130.0, 135.0, 50.0)):
    shape = (nz, ny, nx)
    mask = rng.random(shape) < mask_p
    tau = np.where(mask, rng.random(shape) * 3e-3, 0.0)
    tmax = np.where(mask, 900 + 200 * rng.random(shape), 0.0)
    thermal = ThermalFeatureGrid(VoxelGrid3.from_array(tau, spacing),
                                 VoxelGrid3.from_array(tmax, spacing),
                                 VoxelGrid3.from_array(mask, spacing))
    states = np.where(mask, (rng.random(shape) < 0.2).astype(np.int8), 2)
    return thermal, LabelGrid.from_array(states, spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register their verdicts here; printed once at the end
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
