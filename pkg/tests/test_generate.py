import math

import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from tpctrack.detector import DetectorSpec, contains
from tpctrack.simkit import (
    CARBON,
    PROTON,
    DistSpec,
    GenerationError,
    KinematicsRanges,
    NoiseSpec,
    PointCloudEvent,
    SimConfig,
    add_noise,
    digitize,
    generate_dataset,
    generate_event,
    generate_other,
    passes_acceptance,
    propagate_track,
    sample_kinematics,
)


@pytest.fixture
def config(detector):
    return SimConfig(detector=detector, master_seed=99)


def _event(points, **kw):
    return PointCloudEvent(id="e0", points=np.asarray(points, dtype=float), **kw)


# --- sampling ---------------------------------------------------------------

def test_sampled_states_within_ranges(config):
    rng = np.random.default_rng(0)
    ranges = config.kinematics
    for _ in range(200):
        st = sample_kinematics(PROTON, ranges, rng)
        assert ranges.z_range[0] <= st.position[2] <= ranges.z_range[1]
        assert st.position[0] == 0.0 and st.position[1] == 0.0
        lo, hi = ranges.energy_range["proton"]
        assert lo <= st.kinetic_energy <= hi


def test_sampled_z_mean_near_midpoint(config):
    rng = np.random.default_rng(1)
    n = 100000
    zs = np.array([sample_kinematics(PROTON, config.kinematics, rng).position[2]
                   for _ in range(n)])
    lo, hi = config.kinematics.z_range
    se = (hi - lo) / math.sqrt(12.0) / math.sqrt(n)
    assert abs(zs.mean() - (lo + hi) / 2.0) < 3.0 * se


def test_angle_uniformity_chi2(config):
    rng = np.random.default_rng(2)
    n = 20000
    thetas, phis = [], []
    for _ in range(n):
        st = sample_kinematics(PROTON, config.kinematics, rng)
        px, py, pz = st.momentum
        p = math.sqrt(px * px + py * py + pz * pz)
        thetas.append(math.acos(pz / p))
        phis.append(math.atan2(py, px) % (2 * math.pi))
    for vals, (lo, hi) in ((thetas, config.kinematics.theta_range),
                           (phis, config.kinematics.phi_range)):
        counts, _ = np.histogram(vals, bins=20, range=(lo, hi))
        _, p_value = stats.chisquare(counts)
        assert p_value > 0.001


# --- digitize ---------------------------------------------------------------

def _short_track(config):
    st = sample_kinematics(CARBON, config.kinematics, np.random.default_rng(5))
    return propagate_track(st, config.detector,
                           energy_cutoff_mev=config.energy_cutoff_mev)


def test_zero_diffusion_positions_equal_trajectory(config, detector):
    traj = _short_track(config)
    cfg = SimConfig(detector=detector, diffusion_transverse=0.0,
                    diffusion_longitudinal=0.0, master_seed=1)
    ev = digitize(traj, cfg, np.random.default_rng(0))
    pos_mm = np.asarray(traj.positions) * 1000.0
    assert ev.n_points == len(traj.positions)
    npt.assert_allclose(ev.points[:, 0], pos_mm[:, 0], atol=1e-12)
    npt.assert_allclose(ev.points[:, 1], pos_mm[:, 1], atol=1e-12)
    # z only quantized: within half a bucket
    half_bucket = detector.length_mm / detector.n_time_buckets / 2.0
    assert np.max(np.abs(ev.points[:, 2] - pos_mm[:, 2])) <= half_bucket + 1e-12


def test_charge_conservation_pre_discard(config):
    traj = _short_track(config)
    ev = digitize(traj, config, np.random.default_rng(3))
    expected = traj.total_deposited / (config.detector.gas.w_value * 1e-6)
    npt.assert_allclose(ev.meta["charge_total_prefilter"], expected, rtol=1e-6)


def test_digitize_z_quantization_levels(config):
    traj = _short_track(config)
    ev = digitize(traj, config, np.random.default_rng(4))
    assert len(np.unique(ev.points[:, 2])) <= config.detector.n_time_buckets


def test_digitized_points_inside_chamber(config, detector):
    traj = _short_track(config)
    ev = digitize(traj, config, np.random.default_rng(6))
    for p in ev.points:
        assert contains(p[:3], detector)
    assert np.all(ev.points[:, 3] >= 0.0)


# --- acceptance -------------------------------------------------------------

def _ring_points(n, radius):
    ang = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang),
                            np.full(n, 500.0), np.ones(n)])


def test_acceptance_rejects_low_hit_count(config):
    assert not passes_acceptance(_event(_ring_points(149, 200.0)), config)


def test_acceptance_rejects_small_radius(config):
    assert not passes_acceptance(_event(_ring_points(150, 134.9)), config)


def test_acceptance_inclusive_thresholds(config):
    assert passes_acceptance(_event(_ring_points(150, 135.0)), config)


# --- noise ------------------------------------------------------------------

def test_add_noise_degenerate_zero_is_identity(config, detector):
    base = _event(_ring_points(10, 150.0))
    spec = NoiseSpec(count=DistSpec("fixed", (0,)), charge=DistSpec("fixed", (1.0,)))
    out = add_noise(base, spec, np.random.default_rng(0), detector)
    npt.assert_array_equal(out.points, base.points)


def test_add_noise_degenerate_count(config, detector):
    base = _event(_ring_points(10, 150.0))
    spec = NoiseSpec(count=DistSpec("fixed", (50,)), charge=DistSpec("fixed", (2.0,)))
    out = add_noise(base, spec, np.random.default_rng(0), detector)
    assert out.n_points == 60
    npt.assert_array_equal(out.points[:10], base.points)  # originals preserved in order
    for p in out.points[10:]:
        assert contains(p[:3], detector)


def test_noise_count_statistics(config, detector):
    base = _event(np.empty((0, 4)))
    rng = np.random.default_rng(8)
    mean = config.noise.count.params[0]
    n_events = 10000
    counts = [add_noise(base, config.noise, rng, detector).n_points
              for _ in range(n_events)]
    se = math.sqrt(mean / n_events)
    assert abs(np.mean(counts) - mean) < 3.0 * se


# --- other events -----------------------------------------------------------

def test_other_zero_count_empty(detector):
    cfg = SimConfig(detector=detector, other_count_range=(0, 0))
    ev = generate_other(cfg, np.random.default_rng(0))
    assert ev.n_points == 0


def test_other_points_inside_chamber(config, detector):
    ev = generate_other(config, np.random.default_rng(1))
    for p in ev.points:
        assert contains(p[:3], detector)


def test_other_centroid_statistics(config, detector):
    rng = np.random.default_rng(2)
    sums = np.zeros(3)
    total = 0
    n_events = 2000
    for _ in range(n_events):
        ev = generate_other(config, rng)
        sums += ev.points[:, :3].sum(axis=0)
        total += ev.n_points
    centroid = sums / total
    # per-point sd: x,y ~ R/2, z ~ L/sqrt(12)
    se_xy = detector.radius_mm / 2.0 / math.sqrt(total)
    se_z = detector.length_mm / math.sqrt(12.0) / math.sqrt(total)
    assert abs(centroid[0]) < 3 * se_xy
    assert abs(centroid[1]) < 3 * se_xy
    assert abs(centroid[2] - detector.length_mm / 2.0) < 3 * se_z


# --- dataset assembly -------------------------------------------------------

def test_generate_dataset_counts_and_acceptance(config):
    events = generate_dataset({"proton": 3, "carbon": 2, "other": 3}, config)
    assert len(events) == 8
    labels = [e.label for e in events]
    assert labels == ["proton"] * 3 + ["carbon"] * 2 + ["other"] * 3
    for ev in events:
        if ev.label != "other":
            assert passes_acceptance(ev, config)


def test_generate_dataset_deterministic(config):
    a = generate_dataset({"proton": 2, "other": 1}, config)
    b = generate_dataset({"proton": 2, "other": 1}, config)
    for ea, eb in zip(a, b):
        npt.assert_array_equal(ea.points, eb.points)
        assert ea.id == eb.id and ea.meta == eb.meta


def test_generate_dataset_worker_count_invariance(config):
    seq = generate_dataset({"proton": 2, "carbon": 1, "other": 2}, config)
    par = generate_dataset({"proton": 2, "carbon": 1, "other": 2}, config, workers=2)
    for ea, eb in zip(seq, par):
        npt.assert_array_equal(ea.points, eb.points)
        assert ea.id == eb.id


def test_noise_variant_same_tracks(config):
    clean = generate_event("proton", 0, config, with_noise=False)
    noisy = generate_event("proton", 0, config, with_noise=True)
    n = clean.n_points
    npt.assert_array_equal(noisy.points[:n], clean.points)
    assert noisy.n_points > n


def test_rejection_ceiling_aborts(detector):
    # an impossible radius threshold forces rejection of every candidate
    cfg = SimConfig(detector=detector, min_mean_radius_mm=500.0,
                    max_attempts_per_event=250, master_seed=1)
    with pytest.raises(GenerationError):
        generate_dataset({"proton": 1}, cfg)
