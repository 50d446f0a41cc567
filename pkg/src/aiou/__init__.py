"""Attention-map bias analysis toolkit."""

__version__ = "0.1.0"

from .container import (
    LabelTable,
    MapContainer,
    MapKind,
    MapRecord,
    read_container,
    read_labels,
    read_predictions,
    write_container,
)
from .maps import (
    Map,
    NormalizedMap,
    attention_iou,
    bilinear_downsample,
    l1_normalize,
    nearest_upscale,
)
from .planner import SubsamplePlan, attainable_interval, round_plan, solve_subgroups, sweep
from .scoring import (
    GroupKey,
    GroupRow,
    ScoreReport,
    average_map,
    heatmap_score,
    mask_score,
    stratify,
)
from .stats import (
    ConfusionCounts,
    average_precision,
    kendall_tau,
    mcc,
    mcc_labels,
    normalized_average_precision,
    worst_group_accuracy,
)
from .synth import BiasFixture, BlobSpec, gen_bias_fixture, gen_blob_map

__all__ = [
    "BiasFixture",
    "BlobSpec",
    "ConfusionCounts",
    "GroupKey",
    "GroupRow",
    "LabelTable",
    "Map",
    "MapContainer",
    "MapKind",
    "MapRecord",
    "NormalizedMap",
    "ScoreReport",
    "SubsamplePlan",
    "attainable_interval",
    "attention_iou",
    "average_map",
    "average_precision",
    "bilinear_downsample",
    "gen_bias_fixture",
    "gen_blob_map",
    "heatmap_score",
    "kendall_tau",
    "l1_normalize",
    "mask_score",
    "mcc",
    "mcc_labels",
    "nearest_upscale",
    "normalized_average_precision",
    "read_container",
    "read_labels",
    "read_predictions",
    "round_plan",
    "solve_subgroups",
    "stratify",
    "sweep",
    "worst_group_accuracy",
    "write_container",
]
