import numpy as np
import pytest

from floodstream.calibration import measured_reference_profile
from floodstream.device import synthetic_default_profile
from floodstream.rasters import RasterSurface


@pytest.fixture(scope="session")
def measured():
    """Profile calibrated against the reference-hardware measurements."""
    return measured_reference_profile()


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_default_profile()


@pytest.fixture
def make_surface():
    """Factory: surface from an explicit 2-D array or a seeded random mask."""

    def _make(arg, *, id="", name="", seed=0, wet_fraction=0.5):
        if isinstance(arg, np.ndarray):
            cells = arg.astype(np.uint8)
        else:
            width, height = arg
            rng = np.random.default_rng(seed)
            cells = (rng.random((height, width)) < wet_fraction).astype(np.uint8)
        height, width = cells.shape
        sid = id or f"s{seed:04d}"
        return RasterSurface(
            id=sid, name=name or sid, width=width, height=height, cells=cells
        )

    return _make
