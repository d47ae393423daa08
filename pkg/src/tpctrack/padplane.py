"""Parametric triangular pad tiling of the sensor disc.

The plane is built from a regular lattice of "outer" triangles (edge
``outer_edge_mm``). Triangles whose centroid falls inside the inner region
are subdivided into four congruent children (edge ``inner_edge_mm``), which
is why the two edge lengths are constrained to a 2:1 ratio: subdivision
keeps the tiling gap- and overlap-free by construction. A triangle is kept
when any of its vertices or its centroid lies inside the disc, so the disc
is fully covered at the rim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .detector import ConfigError

Vec2 = Tuple[float, float]


@dataclass(frozen=True)
class PadPlaneSpec:
    target_pad_count: int = 10240
    radius_mm: float = 292.0
    inner_radius_mm: float = 146.0
    inner_edge_mm: float = 5.19
    outer_edge_mm: float = 10.38
    count_tolerance: float = 0.05

    def __post_init__(self):
        if self.target_pad_count < 1:
            raise ConfigError("target_pad_count must be positive")
        if min(self.inner_edge_mm, self.outer_edge_mm, self.radius_mm) <= 0:
            raise ConfigError("pad plane lengths must be strictly positive")
        if abs(self.outer_edge_mm - 2.0 * self.inner_edge_mm) > 1e-9 * self.outer_edge_mm:
            raise ConfigError(
                "outer_edge_mm must equal 2 * inner_edge_mm (4-way subdivision)"
            )
        if not 0.0 <= self.inner_radius_mm <= self.radius_mm:
            raise ConfigError("inner_radius_mm must lie within [0, radius_mm]")


@dataclass(frozen=True)
class Pad:
    pad_id: int
    vertices: Tuple[Vec2, Vec2, Vec2]
    center: Vec2


def _centroid(tri: Tuple[Vec2, Vec2, Vec2]) -> Vec2:
    return (
        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
    )


def _subdivide(tri: Tuple[Vec2, Vec2, Vec2]) -> List[Tuple[Vec2, Vec2, Vec2]]:
    (ax, ay), (bx, by), (cx, cy) = tri
    mab = ((ax + bx) / 2.0, (ay + by) / 2.0)
    mbc = ((bx + cx) / 2.0, (by + cy) / 2.0)
    mca = ((cx + ax) / 2.0, (cy + ay) / 2.0)
    return [
        (tri[0], mab, mca),
        (mab, tri[1], mbc),
        (mca, mbc, tri[2]),
        (mab, mbc, mca),
    ]


def _point_in_triangle(px: float, py: float, tri, tol: float = 1e-9) -> bool:
    (ax, ay), (bx, by), (cx, cy) = tri
    d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
    d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
    d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
    has_neg = (d1 < -tol) or (d2 < -tol) or (d3 < -tol)
    has_pos = (d1 > tol) or (d2 > tol) or (d3 > tol)
    return not (has_neg and has_pos)


class PadPlane:
    """Built tiling with exact pad count and point -> pad lookup."""

    def __init__(self, spec: PadPlaneSpec, pads: List[Pad]):
        self.spec = spec
        self.pads = pads
        self._cell = spec.outer_edge_mm
        self._index: Dict[Tuple[int, int], List[int]] = {}
        for pad in pads:
            xs = [v[0] for v in pad.vertices]
            ys = [v[1] for v in pad.vertices]
            c0 = int(math.floor(min(xs) / self._cell))
            c1 = int(math.floor(max(xs) / self._cell))
            r0 = int(math.floor(min(ys) / self._cell))
            r1 = int(math.floor(max(ys) / self._cell))
            for cx in range(c0, c1 + 1):
                for cy in range(r0, r1 + 1):
                    self._index.setdefault((cx, cy), []).append(pad.pad_id)

    @property
    def count(self) -> int:
        return len(self.pads)

    def lookup(self, x: float, y: float) -> Optional[int]:
        """Pad id containing (x, y) mm, or None outside the disc."""
        if x * x + y * y > self.spec.radius_mm ** 2:
            return None
        key = (int(math.floor(x / self._cell)), int(math.floor(y / self._cell)))
        for pid in self._index.get(key, ()):
            if _point_in_triangle(x, y, self.pads[pid].vertices):
                return pid
        # boundary points can fall in a neighbouring hash cell
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for pid in self._index.get((key[0] + dx, key[1] + dy), ()):
                    if _point_in_triangle(x, y, self.pads[pid].vertices):
                        return pid
        return None

    def manifest(self) -> dict:
        return {
            "pad_count": self.count,
            "target_pad_count": self.spec.target_pad_count,
            "radius_mm": self.spec.radius_mm,
            "inner_radius_mm": self.spec.inner_radius_mm,
            "inner_edge_mm": self.spec.inner_edge_mm,
            "outer_edge_mm": self.spec.outer_edge_mm,
        }


def build_pad_plane(spec: PadPlaneSpec) -> PadPlane:
    """Deterministic tiling; raises ConfigError when the pad count misses target."""
    a = spec.outer_edge_mm
    h = a * math.sqrt(3.0) / 2.0
    R = spec.radius_mm
    r_in2 = spec.inner_radius_mm ** 2
    R2 = R * R

    j_lo = int(math.floor(-R / h)) - 1
    j_hi = int(math.ceil(R / h)) + 1

    triangles: List[Tuple[Vec2, Vec2, Vec2]] = []
    for j in range(j_lo, j_hi):
        y0 = j * h
        y1 = y0 + h
        x_off = -(j % 2) * (a / 2.0)
        k_lo = int(math.floor((-R - x_off) / a)) - 1
        k_hi = int(math.ceil((R - x_off) / a)) + 1
        for k in range(k_lo, k_hi + 1):
            xb = x_off + k * a
            up = ((xb, y0), (xb + a, y0), (xb + a / 2.0, y1))
            down = ((xb + a, y0), (xb + a / 2.0, y1), (xb + 3.0 * a / 2.0, y1))
            for tri in (up, down):
                cx, cy = _centroid(tri)
                keep = cx * cx + cy * cy <= R2 or any(
                    vx * vx + vy * vy <= R2 for vx, vy in tri
                )
                if not keep:
                    continue
                if cx * cx + cy * cy <= r_in2:
                    triangles.extend(_subdivide(tri))
                else:
                    triangles.append(tri)

    pads = [
        Pad(pad_id=i, vertices=tri, center=_centroid(tri))
        for i, tri in enumerate(triangles)
    ]
    plane = PadPlane(spec, pads)
    lo = spec.target_pad_count * (1.0 - spec.count_tolerance)
    hi = spec.target_pad_count * (1.0 + spec.count_tolerance)
    if not lo <= plane.count <= hi:
        raise ConfigError(
            f"tiling produced {plane.count} pads, outside +/-"
            f"{spec.count_tolerance:.0%} of target {spec.target_pad_count}"
        )
    return plane


def coverage_estimate(plane: PadPlane, n_samples: int = 20000, seed: int = 0) -> float:
    """Monte Carlo fraction of the disc covered by the pad union."""
    rng = np.random.default_rng(seed)
    R = plane.spec.radius_mm
    r = R * np.sqrt(rng.random(n_samples))
    phi = rng.random(n_samples) * 2.0 * math.pi
    xs = r * np.cos(phi)
    ys = r * np.sin(phi)
    hit = sum(1 for x, y in zip(xs, ys) if plane.lookup(float(x), float(y)) is not None)
    return hit / n_samples
