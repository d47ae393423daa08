"""Gradient-weighted class activation heatmaps for the convolutional models.

The class score is taken at the output head's pre-activation; its gradient
with respect to the chosen convolutional layer's feature maps is averaged
spatially to weight each map, and the rectified weighted sum is upsampled
bilinearly to the input size and max-normalized to [0, 1].
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from .models import FittedModel


@dataclass
class Heatmap:
    values: np.ndarray          # (rows, cols) in [0, 1]
    target_class: int
    layer_index: int


def bilinear_upsample(values: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Bilinear resize; pixel centers aligned, edges clamped."""
    h, w = values.shape
    if (h, w) == (rows, cols):
        return values.copy()
    ry = (np.arange(rows) + 0.5) * h / rows - 0.5
    rx = (np.arange(cols) + 0.5) * w / cols - 0.5
    y0 = np.clip(np.floor(ry).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(rx).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(ry - y0, 0.0, 1.0)[:, None]
    fx = np.clip(rx - x0, 0.0, 1.0)[None, :]
    v00 = values[np.ix_(y0, x0)]
    v01 = values[np.ix_(y0, x1)]
    v10 = values[np.ix_(y1, x0)]
    v11 = values[np.ix_(y1, x1)]
    top = v00 * (1 - fx) + v01 * fx
    bottom = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bottom * fy


def gradcam(model: FittedModel, image: np.ndarray, target_class: int,
            layer_index: Optional[int] = None) -> Heatmap:
    """Heatmap of the class score's sensitivity to the last conv layer.

    image is a (rows, cols) charge image; target_class indexes the model's
    class list. layer_index selects a different convolutional layer.
    """
    network = model.network
    conv_idx = layer_index if layer_index is not None else network.last_conv_index()
    if conv_idx is None:
        raise ValueError("grad-cam requires a model with a convolutional layer")
    n_classes = len(model.class_names)
    if not 0 <= target_class < n_classes:
        raise ValueError(f"target class {target_class} out of range")

    image = np.asarray(image, dtype=np.float64)
    rows, cols = image.shape
    x = image[np.newaxis, :, :, np.newaxis]
    out = network.forward(x, train=False)

    seed = np.zeros_like(out)
    if out.shape[1] > 1:
        seed[0, target_class] = 1.0
    else:
        # single-unit head: class 0's score is the negated class-1 score
        seed[0, 0] = 1.0 if target_class == 1 else -1.0
    network.zero_grads()
    grad_maps = network.backward(seed, from_preactivation=True, stop_at=conv_idx)
    feature_maps = network.layers[conv_idx].cached_output

    weights = grad_maps.mean(axis=(1, 2))            # (1, s) spatial mean
    cam = np.maximum((feature_maps * weights[:, None, None, :]).sum(axis=-1), 0.0)[0]
    cam = bilinear_upsample(cam, rows, cols)
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    return Heatmap(values=cam, target_class=target_class, layer_index=conv_idx)


def render_overlay(image: np.ndarray, heatmap: Heatmap,
                   path: Optional[str] = None, alpha: float = 0.45) -> bytes:
    """Blue-to-red weight map composited on the grayscale event image (PNG)."""
    img = np.asarray(image, dtype=np.float64)
    if img.shape != heatmap.values.shape:
        raise ValueError("image and heatmap dims must match")
    peak = img.max()
    gray = 1.0 - (img / peak if peak > 0 else img)   # charge 0 -> white
    h = heatmap.values
    color = np.stack([h, np.zeros_like(h), 1.0 - h], axis=-1)
    rgb = (1.0 - alpha) * gray[..., None] + alpha * color
    pixels = np.round(255.0 * np.clip(rgb, 0.0, 1.0)).astype(np.uint8)
    out = Image.fromarray(pixels[::-1], mode="RGB")  # render y up
    buf = io.BytesIO()
    out.save(buf, format="PNG")
    data = buf.getvalue()
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data
