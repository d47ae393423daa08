import itertools

import numpy as np
import pytest

from tpctrack.detector import ConfigError
from tpctrack.padplane import (
    PadPlaneSpec,
    _point_in_triangle,
    build_pad_plane,
    coverage_estimate,
)


@pytest.fixture(scope="module")
def plane():
    return build_pad_plane(PadPlaneSpec())


def test_default_count_within_tolerance(plane):
    target = plane.spec.target_pad_count
    assert abs(plane.count - target) <= 0.05 * target
    assert plane.manifest()["pad_count"] == plane.count


def test_centroid_lookup_returns_own_pad(plane):
    rng = np.random.default_rng(0)
    ids = rng.integers(0, plane.count, 200)
    for pid in ids:
        pad = plane.pads[int(pid)]
        cx, cy = pad.center
        if cx * cx + cy * cy <= plane.spec.radius_mm**2:
            assert plane.lookup(cx, cy) == pad.pad_id


def test_lookup_outside_disc_absent(plane):
    r = plane.spec.radius_mm
    assert plane.lookup(r + 1.0, 0.0) is None
    assert plane.lookup(-r, -r) is None


def test_no_pairwise_overlap_sampled(plane):
    """Interior points of sampled pads must belong to exactly that pad."""
    rng = np.random.default_rng(1)
    for pid in rng.integers(0, plane.count, 300):
        pad = plane.pads[int(pid)]
        cx, cy = pad.center
        hits = [
            p.pad_id for p in plane.pads
            if abs(p.center[0] - cx) < 25 and abs(p.center[1] - cy) < 25
            and _point_in_triangle(cx, cy, p.vertices, tol=-1e-9)
        ]
        assert hits == [pad.pad_id]


def test_coverage_at_least_99_percent(plane):
    assert coverage_estimate(plane, n_samples=20000, seed=2) >= 0.99


def test_unreachable_target_is_config_error():
    with pytest.raises(ConfigError):
        build_pad_plane(PadPlaneSpec(inner_edge_mm=20.0, outer_edge_mm=40.0))


def test_edge_ratio_enforced():
    with pytest.raises(ConfigError):
        PadPlaneSpec(inner_edge_mm=5.0, outer_edge_mm=11.0)
