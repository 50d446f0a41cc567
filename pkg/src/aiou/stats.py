"""Binary-label statistics: MCC, worst-group accuracy, AP, AP_N, Kendall tau."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .container import LabelTable
from .errors import (
    AllGroupsExcludedError,
    DegenerateInputError,
    NoPositivesError,
    UndefinedMccError,
)


@dataclass(frozen=True)
class ConfusionCounts:
    """2x2 contingency table of two binary variables (first index: A, second: B)."""

    n11: float
    n10: float
    n01: float
    n00: float

    def __post_init__(self):
        if min(self.n11, self.n10, self.n01, self.n00) < 0:
            raise ValueError("counts must be nonnegative")
        if self.total < 1:
            raise ValueError("contingency table must hold at least one item")

    @property
    def total(self) -> float:
        return self.n11 + self.n10 + self.n01 + self.n00

    def as_array(self) -> np.ndarray:
        return np.array([self.n11, self.n10, self.n01, self.n00], dtype=np.float64)

    @staticmethod
    def from_pairs(a: Sequence[int], b: Sequence[int]) -> "ConfusionCounts":
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return ConfusionCounts(
            n11=int(np.sum((a == 1) & (b == 1))),
            n10=int(np.sum((a == 1) & (b == 0))),
            n01=int(np.sum((a == 0) & (b == 1))),
            n00=int(np.sum((a == 0) & (b == 0))),
        )


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient of a 2x2 table.

    Raises UndefinedMccError when any row or column marginal is zero.
    """
    rows = (c.n11 + c.n10, c.n01 + c.n00)
    cols = (c.n11 + c.n01, c.n10 + c.n00)
    if min(*rows, *cols) <= 0:
        raise UndefinedMccError("a marginal of the contingency table is zero")
    numerator = c.n11 * c.n00 - c.n10 * c.n01
    return numerator / math.sqrt(rows[0] * rows[1] * cols[0] * cols[1])


def mcc_labels(labels: LabelTable, a: str, b: str, use_predictions: bool = False) -> float:
    """MCC between two attribute columns of a label table.

    With use_predictions=True both columns come from the (thresholded)
    predicted labels instead of the ground truth.
    """
    source = labels.effective_predicted_labels() if use_predictions else labels.ground_truth
    col_a = source[:, labels.attribute_index(a)]
    col_b = source[:, labels.attribute_index(b)]
    return mcc(ConfusionCounts.from_pairs(col_a, col_b))


@dataclass(frozen=True)
class GroupAccuracy:
    n: int
    accuracy: Optional[float]  # None when the group is empty
    excluded: bool


def worst_group_accuracy(
    labels: LabelTable,
    target: str,
    protected: str,
    threshold: float = 0.01,
) -> tuple[float, dict[tuple[int, int], GroupAccuracy]]:
    """Minimum prediction accuracy over (target, protected) subgroups.

    Groups holding strictly less than threshold * n_images are excluded
    from the minimum but still reported.
    """
    t_col = labels.ground_truth[:, labels.attribute_index(target)]
    p_col = labels.ground_truth[:, labels.attribute_index(protected)]
    pred = labels.effective_predicted_labels()[:, labels.attribute_index(target)]
    total = len(labels.image_ids)

    per_group: dict[tuple[int, int], GroupAccuracy] = {}
    candidates = []
    for t_val in (0, 1):
        for p_val in (0, 1):
            mask = (t_col == t_val) & (p_col == p_val)
            n = int(np.sum(mask))
            acc = float(np.mean(pred[mask] == t_col[mask])) if n else None
            excluded = n < threshold * total
            per_group[(t_val, p_val)] = GroupAccuracy(n=n, accuracy=acc, excluded=excluded)
            if not excluded and acc is not None:
                candidates.append(acc)
    if not candidates:
        raise AllGroupsExcludedError("every subgroup fell under the exclusion threshold")
    return min(candidates), per_group


def _ranked_hits(scores: Sequence[float], labels: Sequence[int]):
    scores = np.asarray(scores, dtype=np.float64)
    binary = np.asarray(labels, dtype=np.int64)
    if scores.shape != binary.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    n_pos = int(np.sum(binary == 1))
    if n_pos == 0:
        raise NoPositivesError("average precision needs at least one positive")
    # Stable descending sort: ties keep input order.
    order = np.argsort(-scores, kind="stable")
    return binary[order], n_pos


def average_precision(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Step-interpolated AP over a ranking by descending score."""
    ranked, n_pos = _ranked_hits(scores, labels)
    ap = 0.0
    tp = 0
    for k, is_pos in enumerate(ranked, start=1):
        if is_pos:
            tp += 1
            ap += (1.0 / n_pos) * (tp / k)
    return ap


def normalized_average_precision(
    scores: Sequence[float], labels: Sequence[int], n_ref: float
) -> float:
    """AP with precision renormalized to a reference positive count.

    At each hit, precision becomes R*n_ref / (R*n_ref + FP) where R is
    recall and FP the false-positive count at that rank. With
    n_ref = actual positive count this reduces to plain AP.
    """
    if n_ref <= 0:
        raise ValueError("reference positive count must be positive")
    ranked, n_pos = _ranked_hits(scores, labels)
    ap = 0.0
    tp = 0
    for k, is_pos in enumerate(ranked, start=1):
        if is_pos:
            tp += 1
            recall = tp / n_pos
            fp = k - tp
            precision = (recall * n_ref) / (recall * n_ref + fp)
            ap += (1.0 / n_pos) * precision
    return ap


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected (tau-b) Kendall rank correlation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("inputs must be equal-length 1-D sequences of length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("rank correlation undefined for a constant variable")

    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(len(x), k=1)
    s = float(np.sum(dx[iu] * dy[iu]))

    n0 = len(x) * (len(x) - 1) / 2.0
    n1 = sum(t * (t - 1) / 2.0 for t in np.unique(x, return_counts=True)[1])
    n2 = sum(t * (t - 1) / 2.0 for t in np.unique(y, return_counts=True)[1])
    return s / math.sqrt((n0 - n1) * (n0 - n2))
