import pytest

from raymap import dataset as ds
from raymap import raytracer as rt
from raymap import scene as sc

GRID = sc.GridSpec((0.0, 0.0), 4.0, 4.0, 0.25)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """20 single-room records on a 16x16 grid, for fast unit tests."""
    out = tmp_path_factory.mktemp("small_ds")
    ds.build_dataset(
        20, {"single_room": 1.0}, 1, GRID, rt.TraceConfig(), seed=5, out_dir=out
    )
    return out


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """200 single-room records for the learning and ablation checks."""
    out = tmp_path_factory.mktemp("toy_ds")
    ds.build_dataset(
        200, {"single_room": 1.0}, 1, GRID, rt.TraceConfig(), seed=9, out_dir=out
    )
    return out
