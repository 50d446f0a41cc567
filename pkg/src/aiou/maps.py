"""Dense pixel maps and the weighted-IoU comparison metric.

A map is a nonnegative h-by-w grid: either a model attention map or a
ground-truth feature mask. The comparison metric L1-normalizes both maps
(so each behaves like a probability density) and divides their weighted
intersection by a weighted union:

    score = sum(m1_hat * m2_hat) / sum(((m1_hat + m2_hat) / 2) ** 2)

All accumulations go through math.fsum so symmetry and the scale/size
invariance properties hold at tight tolerances even on large maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMapError, DimensionMismatchError


@dataclass(frozen=True)
class Map:
    """Immutable nonnegative pixel map.

    data is coerced to a read-only float64 array of shape (height, width).
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"map must be 2-D and nonempty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("map entries must be finite")
        if np.any(arr < 0):
            raise ValueError("map entries must be nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def is_degenerate(self) -> bool:
        """True iff every entry is zero (L1 normalization undefined)."""
        return not self.data.any()


class NormalizedMap(Map):
    """A Map whose entries sum to 1 (within 1e-9)."""

    def __post_init__(self):
        super().__post_init__()
        total = math.fsum(self.data.ravel())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"normalized map entries sum to {total}, not 1")


def l1_normalize(m: Map) -> NormalizedMap:
    """Divide a map by the sum of its entries.

    Raises DegenerateMapError when the map is all-zero.
    """
    if m.is_degenerate():
        raise DegenerateMapError("cannot L1-normalize an all-zero map")
    total = math.fsum(m.data.ravel())
    return NormalizedMap(m.data / total)


def attention_iou(m1: Map, m2: Map) -> float:
    """Weighted IoU between two maps after L1 normalization.

    Returns a value in [0, 1]: 1 for proportional maps, 0 for disjoint
    supports. Symmetric in its arguments bit-for-bit.

    Raises DegenerateMapError if either map is all-zero and
    DimensionMismatchError if shapes differ.
    """
    if m1.data.shape != m2.data.shape:
        raise DimensionMismatchError(
            f"map shapes differ: {m1.data.shape} vs {m2.data.shape}"
        )
    a = l1_normalize(m1).data
    b = l1_normalize(m2).data
    numerator = math.fsum((a * b).ravel())
    denominator = math.fsum((((a + b) / 2.0) ** 2).ravel())
    # Rounding can push proportional maps a few ulp past 1.
    return min(numerator / denominator, 1.0)


def bilinear_downsample(m: Map, out_h: int, out_w: int) -> Map:
    """Resample a map to a smaller grid with bilinear interpolation.

    Sample positions use half-pixel centers,
    src = (dst + 0.5) * in_size / out_size - 0.5, clamped to the borders.

    Raises DimensionMismatchError if upsampling is requested.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be positive")
    if out_h > m.height or out_w > m.width:
        raise DimensionMismatchError(
            f"cannot upsample {m.height}x{m.width} to {out_h}x{out_w}"
        )

    def axis_coords(n_out, n_in):
        coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        coords = np.clip(coords, 0.0, n_in - 1.0)
        lo = np.floor(coords).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = coords - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(out_h, m.height)
    x0, x1, fx = axis_coords(out_w, m.width)
    v = m.data
    fy = fy[:, None]
    fx = fx[None, :]
    top = v[y0][:, x0] * (1.0 - fx) + v[y0][:, x1] * fx
    bottom = v[y1][:, x0] * (1.0 - fx) + v[y1][:, x1] * fx
    return Map(top * (1.0 - fy) + bottom * fy)


def nearest_upscale(m: Map, alpha: int) -> Map:
    """Replicate each pixel into an alpha-by-alpha block."""
    if alpha < 1:
        raise ValueError("scale factor must be a positive integer")
    if alpha == 1:
        return m
    return Map(np.repeat(np.repeat(m.data, alpha, axis=0), alpha, axis=1))
