"""Chamber geometry, gas and grid specifications, and coordinate/index mappings.

Conventions used throughout the package:

* specification fields (chamber length, radius) are in meters,
* event point coordinates are in millimeters,
* the beam travels along +z; the pad plane sits at the downstream end
  (z = length_z), so electron drift distance for a deposit at z is
  length_z - z.

All containment and binning predicates are closed on the maximum edge so
points generated exactly on a boundary are never dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

MM_PER_M = 1000.0


class ConfigError(ValueError):
    """A specification or configuration value violates its invariants."""


@dataclass(frozen=True)
class GasSpec:
    """Detector gas at operating pressure.

    density is in g/cm^3, mean_excitation_energy and w_value in eV.
    z_over_a is the medium's charge-to-mass-number ratio Z/A.
    """

    name: str
    density: float
    z_over_a: float
    mean_excitation_energy: float
    w_value: float

    def __post_init__(self):
        for fname in ("density", "z_over_a", "mean_excitation_energy", "w_value"):
            if getattr(self, fname) <= 0:
                raise ConfigError(f"GasSpec.{fname} must be strictly positive")


@dataclass(frozen=True)
class DetectorSpec:
    """Chamber geometry, fields, and digitization parameters.

    b_field is the signed field magnitude along the beam (z) axis; the sign
    choice is recorded in simulation output metadata. window_us is the
    sampling window in microseconds; when None it defaults to the full
    drift time length_z / drift_velocity.
    """

    gas: GasSpec
    length_z: float = 1.0           # m
    radius: float = 0.292           # m
    b_field: float = 2.0            # T, signed, along +z
    drift_field: float = 1.0e4      # V/m, along z
    drift_velocity: float = 52.0    # mm/us
    n_time_buckets: int = 512
    window_us: Optional[float] = None

    def __post_init__(self):
        if self.length_z <= 0 or self.radius <= 0:
            raise ConfigError("length_z and radius must be strictly positive")
        if self.n_time_buckets < 1:
            raise ConfigError("n_time_buckets must be >= 1")
        if self.drift_velocity <= 0:
            raise ConfigError("drift_velocity must be strictly positive")
        window = self.window_us
        if window is None:
            window = self.length_z * MM_PER_M / self.drift_velocity
            object.__setattr__(self, "window_us", window)
        if self.drift_velocity * window + 1e-9 < self.length_z * MM_PER_M:
            raise ConfigError(
                "drift_velocity * window must cover the full chamber length"
            )

    @property
    def radius_mm(self) -> float:
        return self.radius * MM_PER_M

    @property
    def length_mm(self) -> float:
        return self.length_z * MM_PER_M


def contains(point_mm: Sequence[float], spec: DetectorSpec) -> bool:
    """True iff the point (mm) lies inside the chamber cylinder, boundaries inclusive."""
    x, y, z = point_mm[0], point_mm[1], point_mm[2]
    r2 = spec.radius_mm * spec.radius_mm
    return (x * x + y * y) <= r2 and 0.0 <= z <= spec.length_mm


@dataclass(frozen=True)
class VoxelGridSpec:
    """Equal-width 3-D binning of the chamber bounding box.

    Bounds: x, y in [-radius_mm, +radius_mm], z in [0, length_mm].
    Flat index order is row-major with x fastest:
    index = ix + nx * iy + nx * ny * iz.
    """

    nx: int = 20
    ny: int = 20
    nz: int = 20
    radius_mm: float = 292.0
    length_mm: float = 1000.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ConfigError("voxel divisions must be positive")

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def bounds(self) -> Tuple[Tuple[float, float], ...]:
        r = self.radius_mm
        return ((-r, r), (-r, r), (0.0, self.length_mm))


@dataclass(frozen=True)
class ImageGridSpec:
    """2-D binning of the bounding square of the pad plane, x/y in mm.

    Row 0 corresponds to minimum y; column 0 to minimum x.
    """

    rows: int = 128
    cols: int = 128
    radius_mm: float = 292.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("image grid dims must be positive")

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols


def _bin_index(value: float, lo: float, hi: float, n: int) -> Optional[int]:
    """Equal-width bin of value in [lo, hi]; upper edge of the last bin inclusive."""
    if value < lo or value > hi:
        return None
    i = int(math.floor((value - lo) * n / (hi - lo)))
    if i == n:  # value exactly on the top edge
        i = n - 1
    return i


def voxel_index(point_mm: Sequence[float], grid: VoxelGridSpec) -> Optional[int]:
    """Flat voxel index for an in-bounds point (mm), else None."""
    r = grid.radius_mm
    ix = _bin_index(point_mm[0], -r, r, grid.nx)
    iy = _bin_index(point_mm[1], -r, r, grid.ny)
    iz = _bin_index(point_mm[2], 0.0, grid.length_mm, grid.nz)
    if ix is None or iy is None or iz is None:
        return None
    return ix + grid.nx * iy + grid.nx * grid.ny * iz


def pixel_index(point_mm: Sequence[float], grid: ImageGridSpec) -> Optional[Tuple[int, int]]:
    """(row, col) for a point (x, y) in mm inside the bounding square, else None."""
    r = grid.radius_mm
    col = _bin_index(point_mm[0], -r, r, grid.cols)
    row = _bin_index(point_mm[1], -r, r, grid.rows)
    if row is None or col is None:
        return None
    return row, col
