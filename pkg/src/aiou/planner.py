"""Subgroup subsampling: pick per-subgroup sizes hitting a target MCC.

Given the original 2x2 subgroup counts, find nonnegative counts bounded
above by the originals whose MCC equals a requested value, minimizing the
L2 distance to the original sizes. A sweep over several targets first
solves them in order with neighbor warm starts, then re-solves everything
capped to the smallest total so all subsampled sets share one size.

The equality-constrained box problem is solved with an augmented
Lagrangian: box-projected inner minimizations (L-BFGS-B) wrapped in
multiplier updates, run from a warm start plus four deterministic
perturbations, keeping the best feasible point. Real-valued solutions are
rounded by enumerating the 16 floor/ceil combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InfeasibleCapError, UnattainableTargetError, UndefinedMccError
from .stats import ConfusionCounts, mcc

MCC_TOL = 1e-6
_GUARD = 1e-24


@dataclass
class SubsamplePlan:
    original: ConfusionCounts
    target_mcc: float
    planned: np.ndarray  # four real counts, pre-rounding
    rounded: ConfusionCounts
    achieved_mcc: float
    l2_distance: float  # rounded counts vs original
    total: int

    def to_dict(self) -> dict:
        return {
            "target_mcc": self.target_mcc,
            "planned": [float(v) for v in self.planned],
            "rounded": [
                int(self.rounded.n11),
                int(self.rounded.n10),
                int(self.rounded.n01),
                int(self.rounded.n00),
            ],
            "achieved_mcc": self.achieved_mcc,
            "l2_distance": self.l2_distance,
            "total": self.total,
        }


def _mcc_guarded(n: np.ndarray) -> float:
    """Continuous MCC with a vanishing floor on the marginal product."""
    n11, n10, n01, n00 = n
    rows = (n11 + n10) * (n01 + n00)
    cols = (n11 + n01) * (n10 + n00)
    return (n11 * n00 - n10 * n01) / math.sqrt(max(rows * cols, _GUARD))


def _mcc_guarded_grad(n: np.ndarray) -> np.ndarray:
    """Analytic gradient of the guarded continuous MCC."""
    a, b, c, d = n
    r1, r2, c1, c2 = a + b, c + d, a + c, b + d
    product = r1 * r2 * c1 * c2
    if product <= _GUARD:
        return np.zeros(4)
    num = a * d - b * c
    den = math.sqrt(product)
    grad_num = np.array([d, -c, -b, a])
    grad_product = np.array(
        [r2 * c2 * (c1 + r1), r2 * c1 * (c2 + r1), r1 * c2 * (c1 + r2), r1 * c1 * (c2 + r2)]
    )
    return grad_num / den - num * grad_product / (2.0 * product * den)


def _mcc_exact(n: np.ndarray) -> Optional[float]:
    try:
        return mcc(ConfusionCounts(*[float(v) for v in n]))
    except UndefinedMccError:
        return None


def attainable_interval(original: ConfusionCounts) -> tuple[float, float]:
    """MCC range reachable under 0 <= n <= original.

    With all four original counts positive the corners (n11, 0, 0, n00)
    and (0, n10, n01, 0) realize exactly +1 and -1. Otherwise the range
    is found by optimizing MCC itself over the box.
    """
    box = original.as_array()
    if np.all(box > 0):
        return -1.0, 1.0

    bounds = [(0.0, float(b)) for b in box]
    starts = [box, box / 2.0]
    for k in range(4):
        s = box.copy() / 2.0
        s[k] = box[k]
        starts.append(s)
    lo, hi = math.inf, -math.inf
    for sign in (1.0, -1.0):
        for start in starts:
            res = minimize(
                lambda x: sign * _mcc_guarded(x), start, method="L-BFGS-B", bounds=bounds
            )
            value = _mcc_exact(res.x)
            if value is None:
                continue
            lo = min(lo, value)
            hi = max(hi, value)
    if lo > hi:
        raise UnattainableTargetError("no MCC is defined anywhere in the box")
    return lo, hi


def _augmented_lagrangian(
    box: np.ndarray,
    target: float,
    cap: Optional[float],
    start: np.ndarray,
) -> Optional[np.ndarray]:
    """One AL run; returns a feasible point or None."""
    scale = box.sum()
    b = box / scale
    cap_n = cap / scale if cap is not None else None
    x = np.clip(start / scale, 0.0, b)
    bounds = list(zip(np.zeros(4), b))

    def constraints(z):
        c = [_mcc_guarded(z) - target]
        if cap_n is not None:
            c.append(z.sum() - cap_n)
        return np.array(c)

    def constraint_grads(z):
        grads = [_mcc_guarded_grad(z)]
        if cap_n is not None:
            grads.append(np.ones(4))
        return np.array(grads)

    lam = np.zeros(2 if cap_n is not None else 1)
    mu = 10.0
    prev_norm = math.inf
    for _ in range(50):
        def objective(z):
            c = constraints(z)
            value = float(np.sum((z - b) ** 2) + lam @ c + 0.5 * mu * np.sum(c**2))
            grad = 2.0 * (z - b) + (lam + mu * c) @ constraint_grads(z)
            return value, grad

        res = minimize(
            objective,
            x,
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200},
        )
        x = np.clip(res.x, 0.0, b)
        c = constraints(x)
        norm = float(np.max(np.abs(c)))
        if norm <= 1e-10:
            break
        lam = lam + mu * c
        if norm > 0.25 * prev_norm:
            mu = min(mu * 5.0, 1e12)
        prev_norm = norm

    point = x * scale
    exact = _mcc_exact(point)
    if exact is None or abs(exact - target) > MCC_TOL:
        return None
    if cap is not None and abs(point.sum() - cap) > MCC_TOL:
        return None
    return point


def _starts(box: np.ndarray, warm: np.ndarray) -> list[np.ndarray]:
    patterns = [
        (1.0, 0.25, 0.25, 1.0),
        (0.25, 1.0, 1.0, 0.25),
        (1.0, 1.0, 0.25, 0.25),
        (0.25, 0.25, 1.0, 1.0),
    ]
    starts = [warm]
    for p in patterns:
        starts.append(np.clip(warm * np.array(p), 0.0, box))
    return starts


def solve_subgroups(
    original: ConfusionCounts,
    target_mcc: float,
    warm_start: Optional[Sequence[float]] = None,
    total_cap: Optional[float] = None,
) -> SubsamplePlan:
    """Counts closest (L2) to the originals achieving the target MCC.

    Raises UnattainableTargetError when the target lies outside the MCC
    range reachable in the box, InfeasibleCapError when the optional
    total-size constraint cannot be met with it.
    """
    if not -1.0 <= target_mcc <= 1.0:
        raise UnattainableTargetError(f"target MCC {target_mcc} outside [-1, 1]")
    box = original.as_array()
    lo, hi = attainable_interval(original)
    if not lo - 1e-7 <= target_mcc <= hi + 1e-7:
        raise UnattainableTargetError(
            f"target MCC {target_mcc} outside attainable range [{lo:.6f}, {hi:.6f}]"
        )

    current = _mcc_exact(box)
    if (
        total_cap is None
        and current is not None
        and abs(current - target_mcc) <= MCC_TOL
    ):
        planned = box.copy()
        return round_plan(_unrounded_plan(original, target_mcc, planned))

    warm = np.clip(np.asarray(warm_start, dtype=np.float64), 0.0, box) if warm_start is not None else box.copy()
    best = None
    for start in _starts(box, warm):
        point = _augmented_lagrangian(box, target_mcc, total_cap, start)
        if point is None:
            continue
        dist = float(np.linalg.norm(point - box))
        if best is None or dist < best[0]:
            best = (dist, point)
    if best is None:
        if total_cap is not None:
            raise InfeasibleCapError(
                f"no subgroup sizes meet MCC {target_mcc} with total {total_cap}"
            )
        raise UnattainableTargetError(
            f"solver found no feasible point for target MCC {target_mcc}"
        )
    plan = _unrounded_plan(original, target_mcc, best[1])
    cap_int = int(round(total_cap)) if total_cap is not None else None
    return round_plan(plan, total_cap=cap_int)


def _unrounded_plan(original: ConfusionCounts, target: float, planned: np.ndarray) -> SubsamplePlan:
    return SubsamplePlan(
        original=original,
        target_mcc=target,
        planned=planned,
        rounded=original,  # placeholder until round_plan runs
        achieved_mcc=math.nan,
        l2_distance=float(np.linalg.norm(planned - original.as_array())),
        total=0,
    )


_POLISH_LIMIT = 5_000_000


def _polish_integer(
    counts: np.ndarray,
    box: np.ndarray,
    target: float,
    total_cap: Optional[int],
) -> np.ndarray:
    """Closest-to-original integer point matching the target at least as well.

    Floor/ceil rounding sits next to the continuous optimum, but on small
    instances a different integer point can match the target MCC equally
    well while lying closer to the original sizes. Enumerate the integer
    window that could beat the current distance (any such point is within
    that radius of the original) and keep the best; skipped when the
    window is too large, where rounding granularity is negligible anyway.
    """
    current = _mcc_exact(counts)
    deviation = abs(current - target) if current is not None else math.inf
    radius = math.floor(np.linalg.norm(counts - box))
    lows = np.maximum(0, box - radius).astype(np.int64)
    highs = box.astype(np.int64)
    if np.prod(highs - lows + 1.0) > _POLISH_LIMIT:
        return counts

    axes = np.meshgrid(*[np.arange(lo, hi + 1) for lo, hi in zip(lows, highs)],
                       indexing="ij", sparse=True)
    n11, n10, n01, n00 = [a.astype(np.float64) for a in axes]
    rows = (n11 + n10) * (n01 + n00)
    cols = (n11 + n01) * (n10 + n00)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = (n11 * n00 - n10 * n01) / np.sqrt(rows * cols)
    ok = np.isfinite(values) & (np.abs(values - target) <= deviation + 1e-12)
    if total_cap is not None:
        ok &= (n11 + n10 + n01 + n00) == total_cap
    if not ok.any():
        return counts
    dist_sq = sum((axis - b) ** 2 for axis, b in zip((n11, n10, n01, n00), box))
    dist_sq = np.where(ok, dist_sq, np.inf)
    flat = int(np.argmin(dist_sq))
    shape = tuple(int(hi - lo + 1) for lo, hi in zip(lows, highs))
    idx = np.unravel_index(flat, shape)
    best = np.array([lo + i for lo, i in zip(lows, idx)], dtype=np.float64)
    if float(np.min(dist_sq)) < float(np.sum((counts - box) ** 2)) - 1e-12:
        return best
    return counts


def round_plan(plan: SubsamplePlan, total_cap: Optional[int] = None) -> SubsamplePlan:
    """Integerize planned counts via the 16 floor/ceil combinations.

    Picks the combination (within the box, matching total_cap when set)
    whose MCC is closest to the target, breaking ties by L2 distance to
    the original counts, then polishes: if another in-box integer point
    matches the target at least as well while sitting closer to the
    original sizes, it wins.
    """
    box = plan.original.as_array()
    planned = np.clip(plan.planned, 0.0, box)
    floors = np.floor(planned)
    ceils = np.minimum(np.ceil(planned), box)

    best = None
    for combo in product(*[(f, c) for f, c in zip(floors, ceils)]):
        candidate = np.array(combo, dtype=np.float64)
        total = candidate.sum()
        cap_miss = abs(total - total_cap) if total_cap is not None else 0.0
        value = _mcc_exact(candidate)
        deviation = abs(value - plan.target_mcc) if value is not None else math.inf
        dist = float(np.linalg.norm(candidate - box))
        key = (cap_miss, deviation, dist)
        if best is None or key < best[0]:
            best = (key, candidate, value)

    _, counts, value = best
    counts = _polish_integer(counts, box, plan.target_mcc, total_cap)
    value = _mcc_exact(counts)
    rounded = ConfusionCounts(*[int(v) for v in counts])
    return SubsamplePlan(
        original=plan.original,
        target_mcc=plan.target_mcc,
        planned=planned,
        rounded=rounded,
        achieved_mcc=value if value is not None else math.nan,
        l2_distance=float(np.linalg.norm(counts - box)),
        total=int(counts.sum()),
    )


def sweep(original: ConfusionCounts, targets: Sequence[float]) -> list[SubsamplePlan]:
    """Solve a sorted target list twice: warm-started, then size-equalized.

    Pass 1 walks the targets in order, warm-starting each solve from the
    previous solution (the original sizes for the first). Pass 2 re-solves
    every target with the total capped to the smallest pass-1 total so all
    plans end up the same size.
    """
    targets = list(targets)
    if not targets:
        return []
    ascending = all(a <= b for a, b in zip(targets, targets[1:]))
    descending = all(a >= b for a, b in zip(targets, targets[1:]))
    if not (ascending or descending):
        raise ValueError("sweep targets must be sorted")

    first_pass = []
    warm = original.as_array()
    for target in targets:
        plan = solve_subgroups(original, target, warm_start=warm)
        first_pass.append(plan)
        warm = plan.planned

    # Cap at the floor of the smallest continuous total: scaling any pass-1
    # solution down to it stays inside the box (MCC is scale invariant), so
    # the capped problems are always feasible.
    cap = int(math.floor(min(plan.planned.sum() for plan in first_pass)))
    cap = max(cap, 1)
    if all(plan.total == cap for plan in first_pass):
        return first_pass

    second_pass = []
    for target, prior in zip(targets, first_pass):
        scaled = prior.planned * (cap / prior.planned.sum())
        plan = solve_subgroups(original, target, warm_start=scaled, total_cap=cap)
        second_pass.append(plan)
    return second_pass
