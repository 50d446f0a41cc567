"""Synthetic attention/mask fixtures with a controllable bias knob.

Each generated image carries a "bird" rectangle and a disjoint
"background" rectangle. A leakage parameter in [0, 1] moves attention
mass from the bird onto the background, so scoring the fixture against
the bird mask must fall monotonically with leakage while the background
mask score rises. This reproduces, at desk scale, the trend of a model
attending less to the object and more to the background as dataset bias
grows.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .container import LabelTable, MapKind, MapRecord
from .maps import Map

NOISE_FRACTION = 0.01  # of the peak signal value


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian bump; center in normalized [0,1]^2 coordinates."""

    center: tuple[float, float]  # (row, col)
    sigma: float  # pixels
    amplitude: float

    def __post_init__(self):
        if self.sigma <= 0 or self.amplitude <= 0:
            raise ValueError("sigma and amplitude must be positive")


@dataclass(frozen=True)
class BiasFixture:
    n_images: int
    map_size: tuple[int, int]  # attention map (h, w); masks are 2x this
    leakage: float  # fraction of attention mass on the background
    seed: int

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("fixture needs at least one image")
        if not 0.0 <= self.leakage <= 1.0:
            raise ValueError("leakage must lie in [0, 1]")


def gen_blob_map(size: tuple[int, int], blobs: list[BlobSpec]) -> Map:
    """Sum of Gaussian bumps evaluated at pixel centers."""
    h, w = size
    rows = (np.arange(h) + 0.5)[:, None]
    cols = (np.arange(w) + 0.5)[None, :]
    out = np.zeros((h, w))
    for blob in blobs:
        cr = blob.center[0] * h
        cc = blob.center[1] * w
        sq = (rows - cr) ** 2 + (cols - cc) ** 2
        out += blob.amplitude * np.exp(-sq / (2.0 * blob.sigma**2))
    return Map(np.maximum(out, 0.0))


def _rect_mask(h: int, w: int, top: int, left: int, rh: int, rw: int) -> np.ndarray:
    mask = np.zeros((h, w))
    mask[top : top + rh, left : left + rw] = 1.0
    return mask


def _image_regions(rng: np.random.Generator, h: int, w: int):
    """A bird rectangle in the left half, a background one in the right."""
    rh = max(1, h // 3)
    rw = max(1, w // 4)
    bird_top = int(rng.integers(0, h - rh + 1))
    bird_left = int(rng.integers(0, max(1, w // 2 - rw + 1)))
    bg_top = int(rng.integers(0, h - rh + 1))
    bg_left = int(rng.integers(w - w // 2, w - rw + 1))
    bird = _rect_mask(h, w, bird_top, bird_left, rh, rw)
    background = _rect_mask(h, w, bg_top, bg_left, rh, rw)
    return bird, background


def gen_bias_fixture(fixture: BiasFixture):
    """Build (attention records, mask records, label table) for one fixture.

    Attention maps are emitted at map_size for a "target" and a
    "protected" attribute; binary bird/background masks at twice that
    resolution take the same downsampling path as real annotation masks.
    Identical fixtures produce bit-identical outputs.
    """
    h, w = fixture.map_size
    attention, masks = [], []
    ids, rows = [], []
    for index in range(fixture.n_images):
        rng = np.random.default_rng([fixture.seed, index])
        bird, background = _image_regions(rng, h, w)
        bird_pdf = bird / bird.sum()
        bg_pdf = background / background.sum()

        signal = (1.0 - fixture.leakage) * bird_pdf + fixture.leakage * bg_pdf
        peak = max(bird_pdf.max(), bg_pdf.max())
        noise = rng.random((h, w)) * NOISE_FRACTION * peak
        attn_target = (signal + noise).astype(np.float32)
        attn_protected = (bg_pdf + rng.random((h, w)) * NOISE_FRACTION * peak).astype(
            np.float32
        )

        image_id = f"img{index:05d}"
        ids.append(image_id)
        attention.append(
            MapRecord(f"{image_id}/target", MapKind.ATTENTION, Map(attn_target))
        )
        attention.append(
            MapRecord(f"{image_id}/protected", MapKind.ATTENTION, Map(attn_protected))
        )
        big_bird = np.repeat(np.repeat(bird, 2, axis=0), 2, axis=1).astype(np.float32)
        big_bg = np.repeat(np.repeat(background, 2, axis=0), 2, axis=1).astype(np.float32)
        masks.append(MapRecord(f"{image_id}/bird", MapKind.MASK, Map(big_bird)))
        masks.append(MapRecord(f"{image_id}/background", MapKind.MASK, Map(big_bg)))

        target_label = int(rng.integers(0, 2))
        # Protected label correlates with the target so subgroup sizes differ.
        protected_label = target_label if rng.random() < 0.75 else 1 - target_label
        rows.append((target_label, protected_label))

    ground_truth = np.array(rows, dtype=np.int8)
    rng = np.random.default_rng([fixture.seed, fixture.n_images])
    flip = rng.random((len(ids), 2)) < 0.1
    scores = np.where(flip, 1 - ground_truth, ground_truth) * 0.8 + 0.1
    labels = LabelTable(
        image_ids=ids,
        attributes=["target", "protected"],
        ground_truth=ground_truth,
        predictions=scores.astype(np.float64),
    )
    return attention, masks, labels


def labels_to_csv(labels: LabelTable, predictions: bool = False) -> str:
    """Render a label table back to the CSV schema."""
    buf = io.StringIO()
    buf.write("image_id," + ",".join(labels.attributes) + "\r\n")
    source = labels.predictions if predictions else labels.ground_truth
    for i, image_id in enumerate(labels.image_ids):
        if predictions:
            cells = [repr(float(v)) for v in source[i]]
        else:
            cells = [str(int(v)) for v in source[i]]
        buf.write(image_id + "," + ",".join(cells) + "\r\n")
    return buf.getvalue()
