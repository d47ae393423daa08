"""Synthetic event generation: sampling, digitization, noise, dataset assembly.

Every event is a pure function of (config, class, ordinal, attempt): the
random stream for each attempt is derived from a SeedSequence over exactly
that tuple, so generated datasets are identical no matter how generation is
scheduled or parallelized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..detector import ConfigError, DetectorSpec
from .physics import (
    SPECIES,
    ParticleState,
    Species,
    Trajectory,
    make_state,
    propagate_track,
)

CLASS_NAMES = ("proton", "carbon", "other")
_NOISE_STREAM = 0x6E6F6973  # distinct sub-stream tag for the noise rng


class GenerationError(RuntimeError):
    """Dataset generation could not satisfy the acceptance filters."""


@dataclass(frozen=True)
class KinematicsRanges:
    z_range: Tuple[float, float] = (0.05, 0.95)        # m, vertex along beam
    theta_range: Tuple[float, float] = (0.0, math.pi)  # rad, polar
    phi_range: Tuple[float, float] = (0.0, 2.0 * math.pi)
    energy_range: Dict[str, Tuple[float, float]] = field(
        default_factory=lambda: {"proton": (1.0, 6.0), "carbon": (1.0, 12.0)}
    )

    def __post_init__(self):
        for lo, hi in (self.z_range, self.theta_range, self.phi_range):
            if hi < lo:
                raise ConfigError("kinematics ranges must be non-empty")
        for name, (lo, hi) in self.energy_range.items():
            if lo <= 0 or hi < lo:
                raise ConfigError(f"energy range for {name} must be positive")


@dataclass(frozen=True)
class DistSpec:
    """A named one-dimensional distribution family with parameters."""

    family: str
    params: Tuple[float, ...]

    def __post_init__(self):
        known = {"fixed": 1, "poisson": 1, "uniform_int": 2, "exponential": 1, "uniform": 2}
        if self.family not in known:
            raise ConfigError(f"unknown distribution family '{self.family}'")
        if len(self.params) != known[self.family]:
            raise ConfigError(f"{self.family} expects {known[self.family]} parameter(s)")
        if any(p < 0 for p in self.params):
            raise ConfigError("distribution parameters must be non-negative")

    def sample_counts(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        if self.family == "fixed":
            return np.full(n, int(self.params[0]), dtype=np.int64)
        if self.family == "poisson":
            return rng.poisson(self.params[0], size=n).astype(np.int64)
        if self.family == "uniform_int":
            lo, hi = int(self.params[0]), int(self.params[1])
            return rng.integers(lo, hi + 1, size=n, dtype=np.int64)
        raise ConfigError(f"{self.family} is not a count distribution")

    def sample_values(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.family == "fixed":
            return np.full(n, float(self.params[0]))
        if self.family == "exponential":
            return rng.exponential(self.params[0], size=n)
        if self.family == "uniform":
            return rng.uniform(self.params[0], self.params[1], size=n)
        raise ConfigError(f"{self.family} is not a value distribution")


@dataclass(frozen=True)
class NoiseSpec:
    """Statistical noise model; the charge mean tracks the median simulated
    per-point charge under the default detector/gas configuration."""

    count: DistSpec = DistSpec("poisson", (100.0,))
    charge: DistSpec = DistSpec("exponential", (31.0,))


@dataclass
class PointCloudEvent:
    """One detector event: (x, y, z, charge) rows in mm / arbitrary units."""

    id: str
    points: np.ndarray                 # (n, 4) float64
    label: Optional[str] = None
    source: str = "sim"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class SimConfig:
    detector: DetectorSpec
    integrator_step: float = 1e-10        # s
    diffusion_transverse: float = 0.04    # mm per sqrt(mm of drift)
    diffusion_longitudinal: float = 0.03
    kinematics: KinematicsRanges = field(default_factory=KinematicsRanges)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    min_hits: int = 150
    min_mean_radius_mm: float = 135.0
    energy_cutoff_mev: float = 0.05
    max_steps: int = 40000
    other_count_range: Tuple[int, int] = (150, 600)
    rejection_ceiling: float = 0.99
    max_attempts_per_event: int = 1000
    # per-point readout saturation in charge units (ion pairs); models the
    # limited dynamic range of the sampling electronics
    charge_saturation: Optional[float] = 120.0
    # "all": keep tracks meeting both thresholds; "any": keep tracks meeting
    # either (the two readings of the hit/radius filter sentence)
    acceptance_mode: str = "all"
    # per-class threshold overrides for generation, e.g.
    # {"carbon": {"min_mean_radius_mm": 0.0}} to select recoil stubs by hit
    # count alone while protons keep the radius requirement
    per_class_acceptance: Optional[Dict[str, Dict[str, float]]] = None
    master_seed: int = 0

    def __post_init__(self):
        if self.integrator_step <= 0:
            raise ConfigError("integrator_step must be positive")
        if self.min_hits < 0 or self.min_mean_radius_mm < 0:
            raise ConfigError("acceptance thresholds must be non-negative")
        if not 0.0 < self.rejection_ceiling <= 1.0:
            raise ConfigError("rejection_ceiling must be in (0, 1]")
        if self.charge_saturation is not None and self.charge_saturation <= 0:
            raise ConfigError("charge_saturation must be positive when set")
        if self.acceptance_mode not in ("all", "any"):
            raise ConfigError("acceptance_mode must be 'all' or 'any'")
        for cls, overrides in (self.per_class_acceptance or {}).items():
            if cls not in CLASS_NAMES:
                raise ConfigError(f"unknown class '{cls}' in per_class_acceptance")
            bad = set(overrides) - {"min_hits", "min_mean_radius_mm", "acceptance_mode"}
            if bad:
                raise ConfigError(f"unknown acceptance override(s) {sorted(bad)}")

    def acceptance_for(self, class_name: Optional[str]) -> "SimConfig":
        """Config with any per-class acceptance overrides applied."""
        overrides = (self.per_class_acceptance or {}).get(class_name)
        if not overrides:
            return self
        import dataclasses

        return dataclasses.replace(self, **overrides, per_class_acceptance=None)


def sample_kinematics(
    species: Species, ranges: KinematicsRanges, rng: np.random.Generator
) -> ParticleState:
    """Vertex (0, 0, z) with uniform z, theta, phi and uniform kinetic energy."""
    z = rng.uniform(*ranges.z_range)
    theta = rng.uniform(*ranges.theta_range)
    phi = rng.uniform(*ranges.phi_range)
    e_lo, e_hi = ranges.energy_range[species.name]
    energy = rng.uniform(e_lo, e_hi)
    direction = (
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    )
    return make_state(species, (0.0, 0.0, z), direction, energy)


def digitize(
    trajectory: Trajectory, config: SimConfig, rng: np.random.Generator
) -> PointCloudEvent:
    """Convert a trajectory to a diffused, time-quantized point cloud.

    Charge per point is deposited energy divided by the gas W-value; x/y/z
    are smeared with Gaussian widths scaling as sqrt(drift distance to the
    pad plane); z is then quantized to the time-bucket grid. Points smeared
    out of the chamber are dropped.
    """
    if not trajectory.positions:
        raise ValueError("trajectory is empty")
    det = config.detector
    pos = np.asarray(trajectory.positions, dtype=np.float64) * 1000.0  # mm
    w_mev = det.gas.w_value * 1e-6
    charges = np.asarray(trajectory.deposits, dtype=np.float64) / w_mev
    if config.charge_saturation is not None:
        charges = np.minimum(charges, config.charge_saturation)

    drift = np.maximum(det.length_mm - pos[:, 2], 0.0)
    sigma_t = config.diffusion_transverse * np.sqrt(drift)
    sigma_l = config.diffusion_longitudinal * np.sqrt(drift)
    noise = rng.standard_normal((pos.shape[0], 3))
    x = pos[:, 0] + noise[:, 0] * sigma_t
    y = pos[:, 1] + noise[:, 1] * sigma_t
    z = pos[:, 2] + noise[:, 2] * sigma_l

    inside = (x * x + y * y <= det.radius_mm**2) & (z >= 0.0) & (z <= det.length_mm)
    total_charge = float(charges.sum())
    n_discarded = int((~inside).sum())
    x, y, z, charges = x[inside], y[inside], z[inside], charges[inside]

    nb = det.n_time_buckets
    bucket = np.clip(np.floor(z / det.length_mm * nb).astype(np.int64), 0, nb - 1)
    zq = (bucket + 0.5) * det.length_mm / nb

    points = np.column_stack([x, y, zq, charges])
    return PointCloudEvent(
        id="",
        points=points,
        meta={
            "charge_total_prefilter": total_charge,
            "n_discarded": n_discarded,
            "termination": trajectory.termination,
        },
    )


def passes_acceptance(event: PointCloudEvent, config: SimConfig) -> bool:
    """Track-quality filter on hit count and mean transverse radius.

    Both thresholds are inclusive. In the default "all" mode an event must
    meet both; in "any" mode meeting either suffices (the filter sentence's
    two readings; each predicate stays independently configurable).
    """
    enough_hits = event.n_points >= config.min_hits
    if event.n_points == 0:
        wide_enough = config.min_mean_radius_mm <= 0.0
    else:
        radii = np.hypot(event.points[:, 0], event.points[:, 1])
        wide_enough = bool(radii.mean() >= config.min_mean_radius_mm)
    if config.acceptance_mode == "any":
        return enough_hits or wide_enough
    return enough_hits and wide_enough


def add_noise(
    event: PointCloudEvent,
    noise: NoiseSpec,
    rng: np.random.Generator,
    detector: DetectorSpec,
    saturation: Optional[float] = None,
) -> PointCloudEvent:
    """Append uniformly placed noise points; original points keep their order."""
    n = int(noise.count.sample_counts(rng, 1)[0])
    if n == 0:
        extra = np.empty((0, 4))
    else:
        xyz = _uniform_cylinder(n, detector, rng)
        q = noise.charge.sample_values(rng, n)
        if saturation is not None:
            q = np.minimum(q, saturation)
        extra = np.column_stack([xyz, q])
    meta = dict(event.meta)
    meta["noise_points"] = n
    return PointCloudEvent(
        id=event.id,
        points=np.vstack([event.points, extra]),
        label=event.label,
        source=event.source,
        meta=meta,
    )


def generate_other(config: SimConfig, rng: np.random.Generator) -> PointCloudEvent:
    """Uniform-random event standing in for unsimulable reaction products."""
    lo, hi = config.other_count_range
    n = int(rng.integers(lo, hi + 1))
    if n == 0:
        points = np.empty((0, 4))
    else:
        xyz = _uniform_cylinder(n, config.detector, rng)
        q = config.noise.charge.sample_values(rng, n)
        if config.charge_saturation is not None:
            q = np.minimum(q, config.charge_saturation)
        points = np.column_stack([xyz, q])
    return PointCloudEvent(id="", points=points, label="other", meta={"n_points": n})


def _uniform_cylinder(
    n: int, detector: DetectorSpec, rng: np.random.Generator
) -> np.ndarray:
    r = detector.radius_mm * np.sqrt(rng.random(n))
    phi = rng.random(n) * 2.0 * math.pi
    z = rng.random(n) * detector.length_mm
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _attempt_rng(config: SimConfig, class_idx: int, ordinal: int, attempt: int):
    seq = np.random.SeedSequence([config.master_seed, class_idx, ordinal, attempt])
    return np.random.default_rng(seq)


def generate_event(
    class_name: str, ordinal: int, config: SimConfig, with_noise: bool = False
) -> PointCloudEvent:
    """Generate the event for (class, ordinal); deterministic in the config seed.

    Proton/carbon events are re-attempted (with fresh sub-seeds) until they
    pass acceptance; "other" events are taken as-is.
    """
    class_idx = CLASS_NAMES.index(class_name)
    if class_name == "other":
        rng = _attempt_rng(config, class_idx, ordinal, 0)
        event = generate_other(config, rng)
        event.meta.update({"ordinal": ordinal, "attempt": 0})
        attempts = 1
    else:
        species = SPECIES[class_name]
        acceptance_config = config.acceptance_for(class_name)
        event = None
        for attempt in range(config.max_attempts_per_event):
            rng = _attempt_rng(config, class_idx, ordinal, attempt)
            state = sample_kinematics(species, config.kinematics, rng)
            traj = propagate_track(
                state,
                config.detector,
                step_s=config.integrator_step,
                energy_cutoff_mev=config.energy_cutoff_mev,
                max_steps=config.max_steps,
            )
            candidate = digitize(traj, config, rng)
            if passes_acceptance(candidate, acceptance_config):
                event = candidate
                event.meta.update(
                    {
                        "ordinal": ordinal,
                        "attempt": attempt,
                        "energy_mev": state.kinetic_energy,
                        "vertex_z_m": state.position[2],
                    }
                )
                attempts = attempt + 1
                break
        if event is None:
            raise GenerationError(
                f"no accepted {class_name} event for ordinal {ordinal} after "
                f"{config.max_attempts_per_event} attempts"
            )
    event.id = f"sim-{class_name}-{ordinal:06d}"
    event.label = class_name
    event.source = "sim"
    event.meta.update(
        {
            "master_seed": config.master_seed,
            "class": class_name,
            "b_field_t": config.detector.b_field,
            "noise": with_noise,
        }
    )
    if with_noise and class_name != "other":
        noise_rng = _attempt_rng(config, class_idx, ordinal, _NOISE_STREAM)
        event = add_noise(event, config.noise, noise_rng, config.detector,
                          saturation=config.charge_saturation)
    return event


def generate_dataset(
    counts: Dict[str, int],
    config: SimConfig,
    with_noise: bool = False,
    workers: int = 1,
) -> List[PointCloudEvent]:
    """Labeled events, grouped by class in CLASS_NAMES order.

    Output is identical for any worker count. Aborts with acceptance
    statistics when the rejection rate exceeds the configured ceiling.
    """
    for name, n in counts.items():
        if name not in CLASS_NAMES:
            raise ConfigError(f"unknown class '{name}'")
        if n < 0:
            raise ConfigError("event counts must be non-negative")

    jobs = [
        (name, ordinal)
        for name in CLASS_NAMES
        for ordinal in range(counts.get(name, 0))
    ]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            events = list(
                pool.map(_generate_job, [(n, o, config, with_noise) for n, o in jobs],
                         chunksize=8)
            )
    else:
        events = []
        attempts_by_class = {name: 0 for name in CLASS_NAMES}
        made_by_class = {name: 0 for name in CLASS_NAMES}
        for name, ordinal in jobs:
            event = generate_event(name, ordinal, config, with_noise=with_noise)
            attempts_by_class[name] += event.meta["attempt"] + 1
            made_by_class[name] += 1
            _check_rejection(name, attempts_by_class[name], made_by_class[name], config)
            events.append(event)
    return events


def _generate_job(args) -> PointCloudEvent:
    name, ordinal, config, with_noise = args
    return generate_event(name, ordinal, config, with_noise=with_noise)


def _check_rejection(name: str, attempts: int, made: int, config: SimConfig) -> None:
    if attempts >= 200 and made / attempts < 1.0 - config.rejection_ceiling:
        raise GenerationError(
            f"acceptance rate for {name} is {made}/{attempts} "
            f"({made / attempts:.2%}), below the configured floor "
            f"of {1.0 - config.rejection_ceiling:.2%}"
        )
