"""Command-line front end: scoring, planning, fixtures, validation, merging.

Every command is deterministic for fixed inputs and seeds: reports are
JSON with sorted keys (or flat CSV), worker count never changes results,
and the resolved configuration is embedded in each report so merged
multi-model summaries stay self-describing.

Exit codes: 0 success, 1 analysis-level warnings (e.g. every labeled
group excluded), 2 input or usage errors.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from typing import Optional

from . import __version__
from .container import (
    LabelTable,
    MapKind,
    read_container,
    read_labels,
    read_predictions,
    write_container,
)
from .errors import AiouError
from .planner import sweep
from .scoring import DEFAULT_EXCLUSION_THRESHOLD, ScoreReport, heatmap_score, mask_score
from .stats import ConfusionCounts, mcc_labels
from .synth import BiasFixture, gen_bias_fixture, labels_to_csv


def _workers() -> int:
    raw = os.environ.get("AIOU_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_labels(cfg) -> Optional[LabelTable]:
    if not cfg.labels:
        return None
    with open(cfg.labels, "r", newline="") as fh:
        labels = read_labels(fh)
    if cfg.predictions:
        with open(cfg.predictions, "r", newline="") as fh:
            ids, attrs, scores = read_predictions(fh)
        labels = labels.with_predictions(ids, attrs, scores)
    return labels


def _config_dict(cfg) -> dict:
    # The output path is where the report lands, not part of the analysis.
    resolved = {k: v for k, v in sorted(vars(cfg).items()) if k not in ("func", "out")}
    resolved["version"] = __version__
    return resolved


def _emit(cfg, payload: dict, csv_rows=None) -> None:
    if getattr(cfg, "format", "json") == "csv" and csv_rows is not None:
        header, rows = csv_rows
        lines = [",".join(header)]
        lines += [",".join("" if v is None else str(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_csv_rows(reports: list[dict]):
    header = [
        "score_kind", "target", "reference", "group",
        "n", "mean", "std", "excluded", "skipped_degenerate",
    ]
    rows = []
    for rep in reports:
        rows.append([
            rep["score_kind"], rep["target"], rep["reference"], "overall",
            rep["n_scored"], rep["overall_mean"], rep["overall_std"], False,
            rep["skipped_degenerate"],
        ])
        for tag, group in (rep.get("per_group") or {}).items():
            rows.append([
                rep["score_kind"], rep["target"], rep["reference"], tag,
                group["n"], group["mean"], group["std"], group["excluded"],
                rep["skipped_degenerate"],
            ])
    return header, rows


def _warn_exit(report: ScoreReport) -> int:
    if report.per_group is None:
        return 0
    populated = [row for row in report.per_group.values() if row.n > 0]
    if populated and all(row.excluded for row in populated):
        print("warning: every populated group is under the exclusion threshold", file=sys.stderr)
        return 1
    return 0


def cmd_score_mask(cfg) -> int:
    with open(cfg.maps, "rb") as fh:
        attn = read_container(fh).by_feature(cfg.target)
    with open(cfg.masks, "rb") as fh:
        masks = read_container(fh).by_feature(cfg.reference)
    labels = _load_labels(cfg)
    report = mask_score(
        attn,
        masks,
        target=cfg.target,
        reference=cfg.reference,
        labels=labels,
        protected=cfg.protected,
        threshold=cfg.threshold,
        use_predictions=cfg.use_predictions,
        workers=_workers(),
    )
    rep = report.to_dict()
    _emit(cfg, {"config": _config_dict(cfg), "report": rep}, _report_csv_rows([rep]))
    return _warn_exit(report)


def cmd_score_heatmap(cfg) -> int:
    with open(cfg.maps, "rb") as fh:
        container = read_container(fh)
    attn_p = container.by_feature(cfg.protected)
    labels = _load_labels(cfg)
    targets = [t.strip() for t in cfg.target.split(",") if t.strip()]

    rows = []
    worst = 0
    for target in targets:
        attn_t = container.by_feature(target)
        report = heatmap_score(
            attn_t,
            attn_p,
            target=target,
            reference=cfg.protected,
            labels=labels,
            protected=cfg.protected,
            threshold=cfg.threshold,
            use_predictions=cfg.use_predictions,
            workers=_workers(),
        )
        rep = report.to_dict()
        if labels is not None:
            rep["abs_mcc_gt"] = abs(mcc_labels(labels, target, cfg.protected))
            rep["abs_mcc_pred"] = (
                abs(mcc_labels(labels, target, cfg.protected, use_predictions=True))
                if labels.predictions is not None or labels.predicted_labels is not None
                else None
            )
        rows.append(rep)
        worst = max(worst, _warn_exit(report))
    _emit(cfg, {"config": _config_dict(cfg), "rows": rows}, _report_csv_rows(rows))
    return worst


def cmd_plan(cfg) -> int:
    labels = _load_labels(cfg)
    if labels is None:
        raise AiouError("plan requires --labels")
    source = (
        labels.effective_predicted_labels() if cfg.use_predictions else labels.ground_truth
    )
    t_col = source[:, labels.attribute_index(cfg.target)]
    p_col = source[:, labels.attribute_index(cfg.protected)]
    original = ConfusionCounts.from_pairs(t_col, p_col)
    targets = [float(v) for v in cfg.targets.split(",") if v.strip()]
    plans = sweep(original, targets)
    payload = {
        "config": _config_dict(cfg),
        "original": original.as_array().astype(int).tolist(),
        "plans": [plan.to_dict() for plan in plans],
    }
    header = ["target_mcc", "n11", "n10", "n01", "n00", "achieved_mcc", "l2_distance", "total"]
    rows = [
        [p.target_mcc, int(p.rounded.n11), int(p.rounded.n10), int(p.rounded.n01),
         int(p.rounded.n00), p.achieved_mcc, p.l2_distance, p.total]
        for p in plans
    ]
    _emit(cfg, payload, (header, rows))
    return 0


def cmd_synth(cfg) -> int:
    fixture = BiasFixture(
        n_images=cfg.images,
        map_size=(cfg.size, cfg.size),
        leakage=cfg.leakage,
        seed=cfg.seed,
    )
    attention, masks, labels = gen_bias_fixture(fixture)
    with open(cfg.maps, "wb") as fh:
        write_container(attention, fh)
    with open(cfg.masks, "wb") as fh:
        write_container(masks, fh)
    with open(cfg.labels, "w", newline="") as fh:
        fh.write(labels_to_csv(labels))
    if cfg.predictions:
        with open(cfg.predictions, "w", newline="") as fh:
            fh.write(labels_to_csv(labels, predictions=True))
    return 0


def cmd_validate(cfg) -> int:
    summary: dict = {"config": _config_dict(cfg)}
    with open(cfg.maps, "rb") as fh:
        container = read_container(fh)
    degenerate = [r.name for r in container.records if r.map.is_degenerate()]
    out_of_range = [
        r.name
        for r in container.records
        if r.kind == MapKind.MASK and float(r.map.data.max()) > 1.0
    ]
    summary["maps"] = {
        "records": len(container.records),
        "features": container.features(),
        "degenerate": len(degenerate),
        "mask_entries_out_of_range": len(out_of_range),
    }
    labels = _load_labels(cfg)
    if labels is not None:
        container_ids = {r.image_id for r in container.records}
        label_ids = set(labels.image_ids)
        summary["labels"] = {
            "images": len(labels.image_ids),
            "attributes": labels.attributes,
            "container_only_ids": sorted(container_ids - label_ids),
            "label_only_ids": sorted(label_ids - container_ids),
        }
    _emit(cfg, summary)
    return 0


def cmd_merge(cfg) -> int:
    import math

    reports = []
    for path in cfg.reports:
        with open(path) as fh:
            doc = json.load(fh)
        reports.append(doc["report"] if "report" in doc else doc)
    if not reports:
        raise AiouError("merge needs at least one report file")

    def mean_std(values):
        n = len(values)
        mean = math.fsum(values) / n
        var = math.fsum((v - mean) ** 2 for v in values) / n
        return {"mean": mean, "std": math.sqrt(max(var, 0.0)), "n_models": n}

    merged = {
        "config": _config_dict(cfg),
        "overall": mean_std([rep["overall_mean"] for rep in reports]),
        "per_group": None,
    }
    group_tags = set()
    for rep in reports:
        group_tags |= set((rep.get("per_group") or {}).keys())
    if group_tags:
        merged["per_group"] = {}
        for tag in sorted(group_tags):
            means = [
                rep["per_group"][tag]["mean"]
                for rep in reports
                if rep.get("per_group", {}).get(tag, {}).get("mean") is not None
            ]
            merged["per_group"][tag] = mean_std(means) if means else None
    _emit(cfg, merged)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aiou", description="Attention-map bias analysis toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_io(p, fmt=True):
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default="json")

    def common_labels(p):
        p.add_argument("--labels", default=None, help="ground-truth label CSV")
        p.add_argument("--predictions", default=None, help="prediction score CSV")
        p.add_argument("--use-predictions", action="store_true",
                       help="stratify / correlate on predicted labels")

    p = sub.add_parser("score-mask", help="attention vs. feature-mask score")
    p.add_argument("--maps", required=True, help="attention container")
    p.add_argument("--masks", required=True, help="feature-mask container")
    p.add_argument("--target", required=True, help="target attribute")
    p.add_argument("--reference", required=True, help="mask feature name")
    p.add_argument("--protected", default=None, help="protected attribute for stratification")
    p.add_argument("--threshold", type=float, default=DEFAULT_EXCLUSION_THRESHOLD)
    common_labels(p)
    common_io(p)
    p.set_defaults(func=cmd_score_mask)

    p = sub.add_parser("score-heatmap", help="target vs. protected attention score")
    p.add_argument("--maps", required=True, help="attention container")
    p.add_argument("--target", required=True, help="comma-separated target attribute(s)")
    p.add_argument("--protected", required=True, help="protected attribute")
    p.add_argument("--threshold", type=float, default=DEFAULT_EXCLUSION_THRESHOLD)
    common_labels(p)
    common_io(p)
    p.set_defaults(func=cmd_score_heatmap)

    p = sub.add_parser("plan", help="subgroup subsampling plans for target MCCs")
    p.add_argument("--target", required=True)
    p.add_argument("--protected", required=True)
    p.add_argument("--targets", required=True, help="comma-separated target MCC values")
    common_labels(p)
    common_io(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("synth", help="generate a synthetic bias fixture")
    p.add_argument("--maps", required=True, help="attention container to write")
    p.add_argument("--masks", required=True, help="mask container to write")
    p.add_argument("--labels", required=True, help="label CSV to write")
    p.add_argument("--predictions", default=None, help="prediction CSV to write")
    p.add_argument("--images", type=int, default=100)
    p.add_argument("--size", type=int, default=8, help="attention map side length")
    p.add_argument("--leakage", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="container / label integrity diagnostics")
    p.add_argument("--maps", required=True)
    common_labels(p)
    common_io(p, fmt=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("merge", help="aggregate per-model reports into mean±std")
    p.add_argument("reports", nargs="+", help="JSON report files")
    common_io(p, fmt=False)
    p.set_defaults(func=cmd_merge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    cfg = parser.parse_args(argv)
    try:
        return cfg.func(cfg)
    except AiouError as exc:
        print(f"error: {type(exc).__name__.removesuffix('Error')}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
