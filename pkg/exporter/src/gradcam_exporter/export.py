"""Batch export of attention maps and prediction scores.

One attention record is written per (image, attribute), named
"<image_id>/<attribute>". Prediction scores are the sigmoid of each
attribute logit, written as a CSV whose first column is image_id followed
by one real-valued column per attribute, the schema the downstream toolkit
reads for predictions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, TextIO

import numpy as np
import torch
from torch import nn

from .container import write_attention_container
from .errors import NonScalarOutputError
from .gradcam import gradcam_abs, resolve_layer


@dataclass
class ExportSpec:
    """What to export and where.

    images maps image id to a (C, H, W) tensor already preprocessed to the
    model's input size. attributes pairs each logit index with its column
    name, in model output order starting at logit 0.
    """

    model: nn.Module
    images: Mapping[str, torch.Tensor]
    attributes: list[str]
    layer: str | None = None
    batch_size: int = 16
    extra: dict = field(default_factory=dict)


def predict_scores(model: nn.Module, images: Mapping[str, torch.Tensor],
                   n_attributes: int, batch_size: int) -> dict[str, np.ndarray]:
    """Sigmoid scores per image, batched, in sorted-id order."""
    ids = sorted(images)
    scores: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for start in range(0, len(ids), batch_size):
            chunk = ids[start : start + batch_size]
            batch = torch.stack([images[i] for i in chunk])
            logits = model(batch).reshape(len(chunk), -1)
            if logits.shape[1] < n_attributes:
                raise NonScalarOutputError(
                    f"model emits {logits.shape[1]} logits, need {n_attributes}"
                )
            probs = torch.sigmoid(logits[:, :n_attributes]).cpu().numpy()
            for row, image_id in enumerate(chunk):
                scores[image_id] = probs[row].astype(np.float64)
    return scores


def export(spec: ExportSpec, maps_out, predictions_out: TextIO | None = None) -> int:
    """Run the export; returns the number of attention records written.

    maps_out is a binary stream for the container; predictions_out, when
    given, receives the prediction CSV.
    """
    spec.model.eval()
    layer = resolve_layer(spec.model, spec.layer)
    ids = sorted(spec.images)

    records = []
    for image_id in ids:
        for index, attribute in enumerate(spec.attributes):
            cam = gradcam_abs(spec.model, spec.images[image_id], index, layer)
            records.append((f"{image_id}/{attribute}", cam))
    write_attention_container(records, maps_out)

    if predictions_out is not None:
        scores = predict_scores(spec.model, spec.images, len(spec.attributes),
                                spec.batch_size)
        writer = csv.writer(predictions_out)
        writer.writerow(["image_id", *spec.attributes])
        for image_id in ids:
            writer.writerow([image_id, *(repr(float(v)) for v in scores[image_id])])
    return len(records)
