"""Supervised manifold learning and classification for functional data."""

__version__ = "0.1.0"

from .errors import FsmlError  # noqa: E402
from .fda import Curve, LabeledDataset, SampledCurve  # noqa: E402
from .pipeline import FitConfig, FsmlModel, fit, load, save  # noqa: E402

__all__ = [
    "Curve",
    "FitConfig",
    "FsmlError",
    "FsmlModel",
    "LabeledDataset",
    "SampledCurve",
    "fit",
    "load",
    "save",
]
