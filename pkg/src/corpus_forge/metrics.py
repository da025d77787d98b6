"""Character and word error rates on top of an exact Levenshtein distance."""
from __future__ import annotations

import re
import unicodedata
from collections.abc import Hashable, Sequence
from dataclasses import dataclass

import numpy as np

from . import kernels

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class ErrorRateOptions:
    ignore_punctuation: bool = False
    ignore_case: bool = False
    unicode_nfc: bool = True
    whitespace_collapse: bool = True


DEFAULT_OPTIONS = ErrorRateOptions()


def encode_text(text: str) -> np.ndarray:
    """Code points of ``text`` as an int64 array."""
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)


def _encode_pair(a: Sequence[Hashable], b: Sequence[Hashable]) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, str) and isinstance(b, str):
        return encode_text(a), encode_text(b)
    vocab: dict[Hashable, int] = {}
    ia = np.fromiter((vocab.setdefault(s, len(vocab)) for s in a), dtype=np.int64)
    ib = np.fromiter((vocab.setdefault(s, len(vocab)) for s in b), dtype=np.int64)
    return ia, ib


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Minimum number of insertions, deletions and substitutions turning a into b.

    Works on strings (per character) or any sequences of hashable symbols
    such as word lists.
    """
    ia, ib = _encode_pair(a, b)
    return kernels.edit_distance(ia, ib)


def strip_punctuation(text: str) -> str:
    return "".join(" " if unicodedata.category(ch).startswith("P") else ch for ch in text)


def preprocess(text: str, opts: ErrorRateOptions = DEFAULT_OPTIONS) -> str:
    """Apply the option-controlled normalization used by both ref and hyp."""
    if opts.unicode_nfc:
        text = unicodedata.normalize("NFC", text)
    if opts.ignore_case:
        text = text.lower()
    if opts.ignore_punctuation:
        text = strip_punctuation(text)
    if opts.whitespace_collapse:
        text = _WS.sub(" ", text).strip()
    return text


def cer(ref: str, hyp: str, opts: ErrorRateOptions = DEFAULT_OPTIONS) -> float:
    """Character error rate; may exceed 1.0 when the hypothesis is longer."""
    r = preprocess(ref, opts)
    if not r:
        raise ValueError("reference is empty after preprocessing; CER undefined")
    return edit_distance(r, preprocess(hyp, opts)) / len(r)


def wer(ref: str, hyp: str, opts: ErrorRateOptions = DEFAULT_OPTIONS) -> float:
    """Word error rate over whitespace-delimited tokens."""
    r = preprocess(ref, opts).split()
    if not r:
        raise ValueError("reference has no words after preprocessing; WER undefined")
    return edit_distance(r, preprocess(hyp, opts).split()) / len(r)
