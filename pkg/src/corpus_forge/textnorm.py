"""Rule-driven transcript cleaning and drop filters.

All rule tables live in :class:`NormalizationRules` so that another language
only needs a different rules document, not different code.
"""
from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass, field
from functools import cached_property

# Armenian capital and small letters, plus the "ech-yiwn" ligature.
ARMENIAN_ALPHABET = frozenset(
    [chr(c) for c in range(0x0531, 0x0557)] + [chr(c) for c in range(0x0561, 0x0588)]
)

ARMENIAN_FULL_STOP = "\u0589"  # ։
ARMENIAN_COMMA = "\u055d"  # ՝
ARMENIAN_EXCLAMATION = "\u055c"  # ՜
ARMENIAN_EMPHASIS = "\u055b"  # ՛
ARMENIAN_QUESTION = "\u055e"  # ՞

_DASHES = "‐‑‒–—―−"
_DASH_RUN = "[-" + _DASHES + "]*[" + _DASHES + "][-" + _DASHES + "]*"
_HYPHENS = r"(?<!\S)-+(?!\S)"


class DropKind(str, enum.Enum):
    NON_ALPHABETIC = "NonAlphabetic"
    EMPTY = "Empty"
    CORRUPTED = "Corrupted"
    EXPRESSIVE = "Expressive"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class DropReason:
    kind: DropKind
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}" if self.detail else self.kind.value


@dataclass(frozen=True)
class NormalizationRules:
    alphabet: frozenset[str] = ARMENIAN_ALPHABET
    # (regex, replacement) pairs, applied in order
    punctuation_map: tuple[tuple[str, str], ...] = (
        (r"(?<=\S)\s+-+\s+(?=\S)", " — "),
        # a cluster of dashes, with any hyphens stuck to them, becomes one dash
        (r"\s*(?:" + _HYPHENS + r"\s+)*" + _DASH_RUN + r"(?:\s+(?:" + _DASH_RUN + "|" + _HYPHENS + r"))*\s*", " — "),
        (r":", ARMENIAN_FULL_STOP),
        (r"․", ARMENIAN_FULL_STOP),  # one dot leader, a common OCR stand-in
        (r"\.{3,}", "…"),
        (r"ó", "o"),
        (r"Ó", "O"),
    )
    strip_symbols: tuple[str, ...] = ("<<", ">>", "«", "»", "(", ")", "\"", "“", "”", "„")
    sentence_final_marks: frozenset[str] = frozenset({ARMENIAN_FULL_STOP, ".", "?", "!", "…"})
    auxiliary_punctuation: frozenset[str] = frozenset({",", ARMENIAN_COMMA, ";", "—"})
    expressive_marks: frozenset[str] = frozenset({ARMENIAN_EXCLAMATION, ARMENIAN_EMPHASIS})
    # Marks that make a sentence "end with other punctuation" even when written
    # inside the last word, as Armenian places ՞ and ՜ on the stressed vowel.
    question_exclamation_marks: frozenset[str] = frozenset(
        {ARMENIAN_QUESTION, ARMENIAN_EXCLAMATION, "?", "!"}
    )
    colon_marks: frozenset[str] = frozenset({ARMENIAN_FULL_STOP, ":"})
    colon: str = ARMENIAN_FULL_STOP
    expressive_max_count: int = 1
    lowercase_names: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")
        sets = {
            "sentence_final_marks": self.sentence_final_marks,
            "auxiliary_punctuation": self.auxiliary_punctuation,
            "expressive_marks": self.expressive_marks,
        }
        names = list(sets)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if sets[a] & sets[b]:
                    raise ValueError(f"{a} and {b} overlap: {sorted(sets[a] & sets[b])}")
        if self.expressive_max_count < 0:
            raise ValueError("expressive_max_count must be >= 0")

    @cached_property
    def _compiled_map(self) -> tuple[tuple[re.Pattern[str], str], ...]:
        return tuple((re.compile(p), r) for p, r in self.punctuation_map)

    @cached_property
    def allowed_marks(self) -> frozenset[str]:
        return (
            self.sentence_final_marks
            | self.auxiliary_punctuation
            | self.expressive_marks
            | self.question_exclamation_marks
        )

    @cached_property
    def _alphabet_folded(self) -> frozenset[str]:
        return frozenset(c.casefold() for c in self.alphabet)

    def in_alphabet(self, ch: str) -> bool:
        return ch in self.alphabet or ch.casefold() in self._alphabet_folded

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationRules":
        """Build rules from a plain config mapping (lists become sets/tuples)."""
        kw: dict = {}
        for key, value in data.items():
            if key == "alphabet":
                if isinstance(value, str):
                    value = list(value)
                kw[key] = frozenset(value)
            elif key == "punctuation_map":
                kw[key] = tuple((str(p), str(r)) for p, r in value)
            elif key in ("strip_symbols",):
                kw[key] = tuple(value)
            elif key in (
                "sentence_final_marks",
                "auxiliary_punctuation",
                "expressive_marks",
                "question_exclamation_marks",
                "colon_marks",
                "lowercase_names",
            ):
                kw[key] = frozenset(value)
            elif key in ("colon", "expressive_max_count"):
                kw[key] = value
            else:
                raise KeyError(f"unknown normalization rule {key!r}")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "alphabet": "".join(sorted(self.alphabet)),
            "punctuation_map": [list(p) for p in self.punctuation_map],
            "strip_symbols": list(self.strip_symbols),
            "sentence_final_marks": sorted(self.sentence_final_marks),
            "auxiliary_punctuation": sorted(self.auxiliary_punctuation),
            "expressive_marks": sorted(self.expressive_marks),
            "question_exclamation_marks": sorted(self.question_exclamation_marks),
            "colon_marks": sorted(self.colon_marks),
            "colon": self.colon,
            "expressive_max_count": self.expressive_max_count,
            "lowercase_names": sorted(self.lowercase_names),
        }


DEFAULT_RULES = NormalizationRules()

_WS = re.compile(r"\s+")


def _check_text(raw: str | bytes) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8")  # strict: raises UnicodeDecodeError
    try:
        raw.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise UnicodeError(f"malformed text (lone surrogate at {exc.start})") from exc
    return raw


def _is_artifact(ch: str) -> bool:
    return ch == "�" or unicodedata.category(ch) in ("Co", "Cn", "Cs")


def normalize_text(raw: str | bytes, rules: NormalizationRules = DEFAULT_RULES) -> str | DropReason:
    """Clean one transcript line.

    Returns the cleaned text, or a :class:`DropReason` when the line must be
    dropped (letters outside the alphabet, digits, encoding debris, or no
    letters at all).
    """
    text = unicodedata.normalize("NFC", _check_text(raw))
    for pattern, repl in rules._compiled_map:
        text = pattern.sub(repl, text)
    for sym in rules.strip_symbols:
        text = text.replace(sym, " " if sym.isspace() else "")
    if rules.lowercase_names:
        text = " ".join(
            w.lower() if w.strip("".join(rules.allowed_marks)) in rules.lowercase_names else w
            for w in text.split()
        )

    kept: list[str] = []
    letters = 0
    for ch in text:
        if ch.isspace():
            kept.append(" ")
            continue
        if rules.in_alphabet(ch):
            letters += 1
            kept.append(ch)
            continue
        if ch in rules.allowed_marks:
            kept.append(ch)
            continue
        cat = unicodedata.category(ch)
        if cat.startswith("L"):
            return DropReason(DropKind.NON_ALPHABETIC, f"letter {ch!r} (U+{ord(ch):04X}) outside alphabet")
        if cat.startswith("N"):
            return DropReason(DropKind.NON_ALPHABETIC, f"unverbalized numeral {ch!r}")
        if _is_artifact(ch):
            return DropReason(DropKind.NON_ALPHABETIC, f"encoding artifact U+{ord(ch):04X}")
        # any other symbol or punctuation is removed
        kept.append(" ")

    if letters == 0:
        return DropReason(DropKind.EMPTY, "no letters after cleaning")
    out = _WS.sub(" ", "".join(kept)).strip()
    # removal may leave a space before a mark ("word )," -> "word ,")
    tight = (rules.auxiliary_punctuation | rules.sentence_final_marks) - {"—", "…"}
    return re.sub(" (?=[" + re.escape("".join(sorted(tight))) + "])", "", out)


def strip_colons(text: str, rules: NormalizationRules = DEFAULT_RULES) -> tuple[str, list[int]]:
    """Remove every colon mark; return the text and where each one sat.

    Positions index into the returned text, so :func:`restore_colons` can put
    the marks back exactly.
    """
    out: list[str] = []
    positions: list[int] = []
    for ch in text:
        if ch in rules.colon_marks:
            positions.append(len(out))
        else:
            out.append(ch)
    return "".join(out), positions


def restore_colons(text: str, positions: list[int], rules: NormalizationRules = DEFAULT_RULES) -> str:
    """Exact inverse of :func:`strip_colons` given its recorded positions."""
    parts = []
    prev = 0
    for p in positions:
        parts.append(text[prev:p])
        parts.append(rules.colon)
        prev = p
    parts.append(text[prev:])
    return "".join(parts)


def reinsert_colons(text: str, rules: NormalizationRules = DEFAULT_RULES) -> str:
    """Append the colon full stop to a model output that ends without punctuation."""
    stripped = text.rstrip()
    if not stripped:
        return text
    if stripped[-1] in rules.sentence_final_marks:
        return text
    last_word = stripped.rsplit(None, 1)[-1]
    if any(ch in rules.question_exclamation_marks for ch in last_word):
        return text
    return stripped + rules.colon


def count_expressive(text: str, rules: NormalizationRules = DEFAULT_RULES) -> int:
    return sum(1 for ch in text if ch in rules.expressive_marks)


def expressiveness_filter(text: str, rules: NormalizationRules = DEFAULT_RULES) -> bool:
    """True when the text has at most ``expressive_max_count`` emphatic marks."""
    return count_expressive(text, rules) <= rules.expressive_max_count
