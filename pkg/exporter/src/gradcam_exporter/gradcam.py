"""GradCAM with an absolute-value gradient rule.

The channel weights are the spatial mean of the gradient of |y_a|, where
y_a is the logit for attribute a. Taking the gradient of the absolute value
rather than the raw logit makes the map independent of the sign convention
of the head: a model scoring "attribute absent" with -y produces the same
map as one scoring "attribute present" with +y. The map is the rectified
weighted sum of the target layer's activation channels, at that layer's
spatial resolution.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import LayerNotFoundError, NonScalarOutputError


def resolve_layer(model: nn.Module, name: str | None = None) -> nn.Module:
    """Find the target layer by dotted name, or default to the last conv."""
    if name is not None:
        for module_name, module in model.named_modules():
            if module_name == name:
                return module
        raise LayerNotFoundError(f"no module named {name!r}")
    last = None
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            last = module
    if last is None:
        raise LayerNotFoundError("model has no Conv2d layer; pass a layer name")
    return last


def gradcam_abs(
    model: nn.Module,
    image: torch.Tensor,
    attribute: int,
    layer: nn.Module | str | None = None,
) -> np.ndarray:
    """Attention map for one image and one attribute index.

    Returns a nonnegative float64 array at the target layer's spatial
    resolution. The image may be (C, H, W) or (1, C, H, W).
    """
    if not isinstance(layer, nn.Module):
        layer = resolve_layer(model, layer)
    if image.dim() == 3:
        image = image.unsqueeze(0)
    if image.dim() != 4 or image.shape[0] != 1:
        raise ValueError("expected a single image, (C, H, W) or (1, C, H, W)")

    # A graph is needed even when the model's weights are frozen.
    image = image.detach().clone().requires_grad_(True)

    captured: list[torch.Tensor] = []

    def hook(_module, _inputs, output):
        captured.append(output)

    handle = layer.register_forward_hook(hook)
    try:
        with torch.enable_grad():
            output = model(image)
    finally:
        handle.remove()
    if not captured:
        raise LayerNotFoundError("target layer did not fire during the forward pass")

    activations = captured[-1]
    if activations.dim() != 4 or activations.shape[0] != 1:
        raise LayerNotFoundError("target layer output is not a spatial batch tensor")

    if output.dim() not in (1, 2):
        raise NonScalarOutputError(
            f"model output must be per-attribute scalar logits, got shape "
            f"{tuple(output.shape)}"
        )
    logits = output.reshape(1, -1)
    if not 0 <= attribute < logits.shape[1]:
        raise ValueError(f"attribute index {attribute} out of range")
    logit = logits[0, attribute]

    (grad,) = torch.autograd.grad(logit.abs(), activations)
    weights = grad.mean(dim=(2, 3))  # (1, C)
    weighted = (weights[:, :, None, None] * activations).sum(dim=1)
    cam = torch.relu(weighted)[0]
    return cam.detach().cpu().numpy().astype(np.float64)
