"""GradCAM attention map exporter for the aiou toolkit."""

from .container import write_attention_container
from .errors import ExporterError, LayerNotFoundError, NonScalarOutputError
from .export import ExportSpec, export, predict_scores
from .gradcam import gradcam_abs, resolve_layer

__version__ = "0.1.0"

__all__ = [
    "ExportSpec",
    "ExporterError",
    "LayerNotFoundError",
    "NonScalarOutputError",
    "export",
    "gradcam_abs",
    "predict_scores",
    "resolve_layer",
    "write_attention_container",
]
