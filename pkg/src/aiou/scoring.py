"""Mask and heatmap bias scores with subgroup stratification.

The mask score averages the map metric between each image's attention map
and a feature mask downsampled to the attention map's resolution. The
heatmap score averages the metric between the attention maps of a target
and a protected attribute. Both can be broken down over the four
(target, protected) label subgroups, with small groups flagged as
excluded when they hold strictly less than a configurable fraction of
the image set.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .container import LabelTable
from .errors import (
    DegenerateMapError,
    DimensionMismatchError,
    EmptySetError,
    NoMatchedImagesError,
)
from .maps import Map, attention_iou, bilinear_downsample, l1_normalize

DEFAULT_EXCLUSION_THRESHOLD = 0.01


@dataclass(frozen=True)
class GroupKey:
    """One cell of the target-by-protected label grid."""

    target_label: int
    protected_label: int

    def tag(self) -> str:
        return f"t{self.target_label}_p{self.protected_label}"


ALL_GROUPS = tuple(GroupKey(t, p) for t in (0, 1) for p in (0, 1))


@dataclass
class GroupRow:
    n: int
    mean: Optional[float]
    std: Optional[float]
    excluded: bool


@dataclass
class ScoreReport:
    score_kind: str  # "mask" or "heatmap"
    target: str
    reference: str
    overall_mean: float
    overall_std: float
    n_scored: int
    skipped_degenerate: int
    per_group: Optional[dict[GroupKey, GroupRow]] = None
    per_image: dict[str, float] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "score_kind": self.score_kind,
            "target": self.target,
            "reference": self.reference,
            "overall_mean": self.overall_mean,
            "overall_std": self.overall_std,
            "n_scored": self.n_scored,
            "skipped_degenerate": self.skipped_degenerate,
            "per_group": None,
        }
        if self.per_group is not None:
            out["per_group"] = {
                key.tag(): {
                    "n": row.n,
                    "mean": row.mean,
                    "std": row.std,
                    "excluded": row.excluded,
                }
                for key, row in sorted(self.per_group.items(), key=lambda kv: kv[0].tag())
            }
        return out


def _mean_std(values: list[float]) -> tuple[float, float]:
    """Population mean/std with compensated summation."""
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(max(var, 0.0))


def _score_pairs(
    ids: list[str],
    score_one,
    workers: int = 1,
) -> tuple[dict[str, float], int]:
    """Evaluate score_one per image id; degenerate pairs are skipped and counted.

    Results are keyed by id and reduced in sorted-id order downstream, so
    the outcome is identical for any worker count.
    """

    def guarded(image_id):
        try:
            return score_one(image_id)
        except DegenerateMapError:
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, ids))
    else:
        results = [guarded(i) for i in ids]
    values = {i: v for i, v in zip(ids, results) if v is not None}
    return values, len(ids) - len(values)


def stratify(
    values: dict[str, float],
    labels: LabelTable,
    target: str,
    protected: str,
    threshold: float = DEFAULT_EXCLUSION_THRESHOLD,
    use_predictions: bool = False,
    total: Optional[int] = None,
) -> dict[GroupKey, GroupRow]:
    """Split per-image scores over the four (target, protected) subgroups.

    Each image lands in exactly one group. Groups holding strictly fewer
    than threshold * total images are flagged excluded but still reported.
    """
    source = labels.effective_predicted_labels() if use_predictions else labels.ground_truth
    t_col = source[:, labels.attribute_index(target)]
    p_col = source[:, labels.attribute_index(protected)]

    buckets: dict[GroupKey, list[float]] = {key: [] for key in ALL_GROUPS}
    for image_id in sorted(values):
        row = labels.row_index(image_id)
        key = GroupKey(int(t_col[row]), int(p_col[row]))
        buckets[key].append(values[image_id])

    if total is None:
        total = len(values)
    out = {}
    for key in ALL_GROUPS:
        scores = buckets[key]
        n = len(scores)
        mean, std = _mean_std(scores) if scores else (None, None)
        out[key] = GroupRow(n=n, mean=mean, std=std, excluded=n < threshold * total)
    return out


def _build_report(
    kind: str,
    target: str,
    reference: str,
    values: dict[str, float],
    skipped: int,
    labels: Optional[LabelTable],
    protected: Optional[str],
    threshold: float,
    use_predictions: bool,
) -> ScoreReport:
    if not values:
        raise NoMatchedImagesError("every matched image pair was degenerate")
    ordered = [values[i] for i in sorted(values)]
    mean, std = _mean_std(ordered)
    per_group = None
    if labels is not None and protected is not None:
        per_group = stratify(
            values,
            labels,
            target,
            protected,
            threshold=threshold,
            use_predictions=use_predictions,
            total=len(values) + skipped,
        )
    return ScoreReport(
        score_kind=kind,
        target=target,
        reference=reference,
        overall_mean=mean,
        overall_std=std,
        n_scored=len(values),
        skipped_degenerate=skipped,
        per_group=per_group,
        per_image=values,
    )


def mask_score(
    attn: dict[str, Map],
    masks: dict[str, Map],
    target: str = "",
    reference: str = "",
    labels: Optional[LabelTable] = None,
    protected: Optional[str] = None,
    threshold: float = DEFAULT_EXCLUSION_THRESHOLD,
    use_predictions: bool = False,
    workers: int = 1,
) -> ScoreReport:
    """Average metric between attention maps and downsampled feature masks.

    attn and masks are keyed by image id; only the intersection is scored.
    Mask entries must lie in [0, 1].
    """
    ids = sorted(set(attn) & set(masks))
    if not ids:
        raise NoMatchedImagesError("attention and mask sets share no image ids")
    for image_id in ids:
        if float(masks[image_id].data.max()) > 1.0:
            raise ValueError(f"mask for {image_id!r} has entries above 1")

    def score_one(image_id):
        a = attn[image_id]
        m = bilinear_downsample(masks[image_id], a.height, a.width)
        return attention_iou(a, m)

    values, skipped = _score_pairs(ids, score_one, workers)
    return _build_report(
        "mask", target, reference, values, skipped, labels, protected, threshold, use_predictions
    )


def heatmap_score(
    attn_t: dict[str, Map],
    attn_p: dict[str, Map],
    target: str = "",
    reference: str = "",
    labels: Optional[LabelTable] = None,
    protected: Optional[str] = None,
    threshold: float = DEFAULT_EXCLUSION_THRESHOLD,
    use_predictions: bool = False,
    workers: int = 1,
) -> ScoreReport:
    """Average metric between target and protected attention maps per image."""
    ids = sorted(set(attn_t) & set(attn_p))
    if not ids:
        raise NoMatchedImagesError("the two attention sets share no image ids")
    for image_id in ids:
        if attn_t[image_id].data.shape != attn_p[image_id].data.shape:
            raise DimensionMismatchError(
                f"attention maps for {image_id!r} differ in shape"
            )

    def score_one(image_id):
        return attention_iou(attn_t[image_id], attn_p[image_id])

    values, skipped = _score_pairs(ids, score_one, workers)
    return _build_report(
        "heatmap", target, reference, values, skipped, labels, protected, threshold, use_predictions
    )


def average_map(maps: Iterable[Map]) -> Map:
    """Pixel-wise mean of L1-normalized maps, rescaled to peak 1 for plotting.

    Degenerate maps are skipped; raises EmptySetError if nothing remains.
    """
    acc = None
    count = 0
    for m in maps:
        if m.is_degenerate():
            continue
        normalized = l1_normalize(m).data
        if acc is None:
            acc = np.zeros_like(normalized)
        elif acc.shape != normalized.shape:
            raise DimensionMismatchError("maps being averaged differ in shape")
        acc = acc + normalized
        count += 1
    if acc is None:
        raise EmptySetError("no non-degenerate maps to average")
    mean = acc / count
    return Map(mean / mean.max())
