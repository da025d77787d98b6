"""Speech corpus construction: text cleaning, VAD, segmentation, transcript matching, packaging."""
from .kernels import BACKEND
from .metrics import ErrorRateOptions, cer, edit_distance, wer
from .textnorm import DropKind, DropReason, NormalizationRules, normalize_text

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DropKind",
    "DropReason",
    "ErrorRateOptions",
    "NormalizationRules",
    "cer",
    "edit_distance",
    "normalize_text",
    "wer",
]
