"""Fixed-length model inputs from point clouds: voxel vectors and charge images.

Voxel vectors feed the logistic-regression and fully-connected models;
charge-projection images feed the convolutional models. Both are pure
functions of the event's point set and are order-independent.

Stored arrays keep charge-increasing semantics (0 = no charge); the
white-background rendering convention (max charge = black) is applied only
at PNG export.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image

from .detector import ImageGridSpec, VoxelGridSpec
from .simkit import PointCloudEvent


@dataclass
class VoxelVector:
    values: np.ndarray          # (n_voxels,) float64, charge sums
    grid: VoxelGridSpec


@dataclass
class ChargeImage:
    values: np.ndarray          # (rows, cols) float64
    grid: ImageGridSpec
    normalized: bool = False


def _axis_bins(coords: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    """Vectorized equal-width binning; top edge inclusive; -1 out of bounds."""
    idx = np.floor((coords - lo) * n / (hi - lo)).astype(np.int64)
    idx[coords == hi] = n - 1
    idx[(coords < lo) | (coords > hi)] = -1
    return idx


def voxelize(event: PointCloudEvent, grid: VoxelGridSpec) -> VoxelVector:
    """Sum point charges into the flat voxel vector; out-of-bounds points ignored."""
    values = np.zeros(grid.n_voxels, dtype=np.float64)
    if event.n_points:
        pts = event.points
        r = grid.radius_mm
        ix = _axis_bins(pts[:, 0], -r, r, grid.nx)
        iy = _axis_bins(pts[:, 1], -r, r, grid.ny)
        iz = _axis_bins(pts[:, 2], 0.0, grid.length_mm, grid.nz)
        ok = (ix >= 0) & (iy >= 0) & (iz >= 0)
        flat = ix[ok] + grid.nx * iy[ok] + grid.nx * grid.ny * iz[ok]
        np.add.at(values, flat, pts[ok, 3])
    return VoxelVector(values=values, grid=grid)


def project_image(
    event: PointCloudEvent, grid: ImageGridSpec, normalize: bool = False
) -> ChargeImage:
    """Sum point charges into the xy projection (z ignored).

    With normalize=True the image is divided by its maximum; an all-zero
    image stays all-zero.
    """
    values = np.zeros((grid.rows, grid.cols), dtype=np.float64)
    if event.n_points:
        pts = event.points
        r = grid.radius_mm
        col = _axis_bins(pts[:, 0], -r, r, grid.cols)
        row = _axis_bins(pts[:, 1], -r, r, grid.rows)
        ok = (col >= 0) & (row >= 0)
        np.add.at(values, (row[ok], col[ok]), pts[ok, 3])
    if normalize:
        peak = values.max()
        if peak > 0:
            values = values / peak
    return ChargeImage(values=values, grid=grid, normalized=normalize)


@dataclass
class FeatureScaler:
    """Per-feature max scaling fitted on training data only."""

    max_values: np.ndarray

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Divide each feature by its training max; zero-max features pass through."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        divisor = np.where(self.max_values > 0, self.max_values, 1.0)
        out = v / divisor
        return out if np.asarray(vectors).ndim > 1 else out[0]


def fit_scaler(training_vectors: np.ndarray) -> FeatureScaler:
    m = np.atleast_2d(np.asarray(training_vectors, dtype=np.float64))
    if m.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    return FeatureScaler(max_values=m.max(axis=0))


def apply_scaler(scaler: FeatureScaler, vectors: np.ndarray) -> np.ndarray:
    return scaler.apply(vectors)


def to_grayscale_png(values: np.ndarray, path: Optional[str] = None) -> bytes:
    """8-bit grayscale PNG with zero charge white and the maximum black."""
    v = np.asarray(values, dtype=np.float64)
    peak = v.max()
    scaled = v / peak if peak > 0 else v
    pixels = np.round(255.0 * (1.0 - scaled)).astype(np.uint8)
    img = Image.fromarray(pixels[::-1], mode="L")  # row 0 = min y, render y up
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data
