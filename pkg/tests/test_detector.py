import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpctrack.detector import (
    ConfigError,
    DetectorSpec,
    GasSpec,
    ImageGridSpec,
    VoxelGridSpec,
    contains,
    pixel_index,
    voxel_index,
)

from oracles import brute_pixel_index, brute_voxel_index


def test_contains_center(detector):
    assert contains((0.0, 0.0, 500.0), detector)


def test_contains_beyond_radius(detector):
    # chamber radius is 292 mm; 292.1 mm is outside
    assert not contains((292.1, 0.0, 500.0), detector)


def test_contains_boundary_inclusive(detector):
    assert contains((0.0, 292.0, 0.0), detector)
    assert contains((0.0, 0.0, 1000.0), detector)
    assert not contains((0.0, 0.0, 1000.0001), detector)


def test_spec_invariants(gas):
    with pytest.raises(ConfigError):
        DetectorSpec(gas=gas, length_z=-1.0)
    with pytest.raises(ConfigError):
        DetectorSpec(gas=gas, n_time_buckets=0)
    with pytest.raises(ConfigError):
        DetectorSpec(gas=gas, window_us=1.0)  # too short to map the chamber
    with pytest.raises(ConfigError):
        GasSpec("x", density=0.0, z_over_a=0.5, mean_excitation_energy=40, w_value=23)


def test_voxel_grid_default_count():
    assert VoxelGridSpec().n_voxels == 8000
    assert ImageGridSpec().n_pixels == 16384


def test_voxel_center_point():
    grid = VoxelGridSpec()
    # center of symmetric bounds falls in bin 10 of 20 on every axis
    idx = voxel_index((0.0, 0.0, 500.0), grid)
    assert idx == 10 + 20 * 10 + 400 * 10


def test_voxel_corner_and_bounds():
    grid = VoxelGridSpec()
    assert voxel_index((-292.0, -292.0, 0.0), grid) == 0
    assert voxel_index((292.0, 292.0, 1000.0), grid) == 8000 - 1
    assert voxel_index((293.0, 0.0, 0.0), grid) is None


def test_voxel_indices_in_range(detector):
    grid = VoxelGridSpec()
    rng = np.random.default_rng(0)
    for _ in range(500):
        p = rng.uniform([-292, -292, 0], [292, 292, 1000])
        idx = voxel_index(p, grid)
        assert idx is not None and 0 <= idx < 8000


def test_voxel_matches_brute_force():
    grid = VoxelGridSpec(nx=7, ny=5, nz=9, radius_mm=120.0, length_mm=400.0)
    rng = np.random.default_rng(1)
    for _ in range(300):
        p = rng.uniform([-150, -150, -30], [150, 150, 430])
        assert voxel_index(p, grid) == brute_voxel_index(p, grid)


def test_pixel_center():
    assert pixel_index((0.0, 0.0), ImageGridSpec()) == (64, 64)


def test_pixel_square_corner_in_bounds():
    # inside the bounding square though outside the disc
    assert pixel_index((290.0, 290.0), ImageGridSpec()) is not None
    assert pixel_index((293.0, 0.0), ImageGridSpec()) is None


def test_pixel_row_is_min_y():
    grid = ImageGridSpec()
    assert pixel_index((0.0, -292.0), grid)[0] == 0
    assert pixel_index((0.0, 292.0), grid)[0] == 127


def test_pixel_matches_brute_force():
    grid = ImageGridSpec(rows=33, cols=17, radius_mm=80.0)
    rng = np.random.default_rng(2)
    for _ in range(300):
        p = rng.uniform([-90, -90], [90, 90])
        assert pixel_index(p, grid) == brute_pixel_index(p, grid)


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(-292, 292),
    y=st.floats(-292, 292),
    z=st.floats(0, 1000),
)
def test_binning_round_trip(x, y, z):
    """The voxel we bin into must actually contain the point."""
    grid = VoxelGridSpec()
    idx = voxel_index((x, y, z), grid)
    assert idx is not None
    ix = idx % grid.nx
    iy = (idx // grid.nx) % grid.ny
    iz = idx // (grid.nx * grid.ny)
    wx = 2 * grid.radius_mm / grid.nx
    wz = grid.length_mm / grid.nz
    for val, i, lo, w, n in (
        (x, ix, -grid.radius_mm, wx, grid.nx),
        (y, iy, -grid.radius_mm, wx, grid.ny),
        (z, iz, 0.0, wz, grid.nz),
    ):
        left, right = lo + i * w, lo + (i + 1) * w
        if i == n - 1:
            assert left <= val <= right + 1e-9
        else:
            assert left <= val + 1e-9 and val < right + 1e-9
