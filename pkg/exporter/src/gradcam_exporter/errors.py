"""Exporter error hierarchy."""


class ExporterError(Exception):
    """Base class for exporter failures."""


class LayerNotFoundError(ExporterError):
    """Requested target layer does not exist, or no conv layer was found."""


class NonScalarOutputError(ExporterError):
    """Selected attribute logit is not a single scalar per image."""
