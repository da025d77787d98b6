"""Align per-chunk ASR hypotheses to one long transcript (VAD -> ASR -> CER).

The matcher walks the transcript with a word cursor. For each chunk it
scores every source window whose start lies a few words past the cursor and
whose length is close to the hypothesis length, keeps the lowest-CER window,
and accepts it when the CER is under the threshold. Accepted windows are
final; a rejected chunk leaves the cursor where it was and widens the search
for the next chunk.
"""
from __future__ import annotations

import enum
import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .metrics import ErrorRateOptions, cer, encode_text, preprocess, wer

log = logging.getLogger(__name__)

_SPACE = ord(" ")


class MatchStatus(str, enum.Enum):
    EXACT = "Exact"
    FUZZY = "Fuzzy"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class ChunkPrediction:
    index: int
    hyp_text: str
    audio_span: tuple[float, float] | None = None


@dataclass(frozen=True)
class MatchResult:
    chunk_index: int
    matched_text: str
    source_span: tuple[int, int] | None
    cer_value: float
    status: MatchStatus

    @property
    def accepted(self) -> bool:
        return self.status is not MatchStatus.REJECTED

    def report_line(self) -> str:
        if self.source_span is None:
            ws = we = "-"
        else:
            ws, we = self.source_span
        c = "nan" if math.isnan(self.cer_value) else f"{self.cer_value:.4f}"
        return f"{self.chunk_index}\t{self.status.value}\t{c}\t{ws}\t{we}\t{self.matched_text}"


@dataclass(frozen=True)
class VacConfig:
    cer_threshold: float = 0.3
    window_scale: float = 1.5
    start_slack_words: int = 5
    end_slack_words: int = 8
    # after a rejection the next chunk may start this many hypothesis words further on
    widen_on_reject: bool = True
    normalization: ErrorRateOptions = field(
        default_factory=lambda: ErrorRateOptions(ignore_punctuation=True, ignore_case=True)
    )

    def __post_init__(self) -> None:
        if not 0.0 < self.cer_threshold <= 1.0:
            raise ValueError("cer_threshold must be in (0, 1]")
        if self.window_scale < 1.0:
            raise ValueError("window_scale must be >= 1")
        if self.start_slack_words < 0 or self.end_slack_words < 0:
            raise ValueError("slacks must be >= 0")


@dataclass(frozen=True)
class Candidate:
    start: int
    end: int
    distance: int
    n_chars: int

    @property
    def cer(self) -> float:
        return self.distance / self.n_chars


def normalize_words(text: str, opts: ErrorRateOptions) -> list[str]:
    """Per-token normalization; marks inside a word (Armenian ՞ ՜ ՛) vanish rather than split it."""
    return [preprocess(w, opts).replace(" ", "") for w in text.split()]


class TranscriptIndex:
    """Transcript words with their normalized, integer-coded forms."""

    def __init__(self, transcript: str, opts: ErrorRateOptions):
        self.words = transcript.split()
        self.norm = normalize_words(transcript, opts)
        self.codes = [encode_text(w) for w in self.norm]

    def __len__(self) -> int:
        return len(self.words)

    def window(self, start: int, max_words: int) -> tuple[np.ndarray, np.ndarray]:
        """Coded text of words ``start .. start+max_words`` and, per word count, its char length."""
        parts: list[np.ndarray] = []
        ends = np.zeros(max_words + 1, dtype=np.int64)
        length = 0
        for k in range(max_words):
            code = self.codes[start + k]
            if code.size:
                if length:
                    parts.append(np.array([_SPACE], dtype=np.int64))
                    length += 1
                parts.append(code)
                length += code.size
            ends[k + 1] = length
        ref = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return ref, ends

    def text(self, start: int, end: int) -> str:
        return " ".join(self.words[start:end])


def enumerate_candidates(
    index: TranscriptIndex,
    hyp: np.ndarray,
    hyp_words: int,
    starts: Iterable[int],
    config: VacConfig,
    cer_cutoff: float | None = None,
) -> list[Candidate]:
    """Score every (start, length) window for one hypothesis.

    One DP pass per start yields the distance for all window lengths at once.
    With ``cer_cutoff`` set, windows provably above that CER are dropped
    early instead of being scored.
    """
    lo = max(1, math.floor(hyp_words / config.window_scale))
    hi = math.ceil(hyp_words * config.window_scale) + config.end_slack_words
    out: list[Candidate] = []
    for s in starts:
        top = min(hi, len(index) - s)
        if top < lo:
            continue
        ref, ends = index.window(s, top)
        lengths = np.arange(lo, top + 1)
        cps = ends[lengths]
        keep = cps > 0
        if not keep.any():
            continue
        lengths, cps = lengths[keep], cps[keep]
        limit = kernels.ABANDONED - 1 if cer_cutoff is None else math.floor(cer_cutoff * int(cps[-1]))
        dists = kernels.prefix_distances(ref, hyp, cps, limit)
        for L, n_chars, d in zip(lengths.tolist(), cps.tolist(), dists.tolist()):
            if d != kernels.ABANDONED:
                out.append(Candidate(s, s + L, d, n_chars))
    return out


def _rank(c: Candidate, cursor: int, hyp_chars: int) -> tuple:
    return (c.cer, abs(c.start - cursor), abs(c.n_chars - hyp_chars), c.end - c.start, c.start)


def match_transcript(
    chunks: Sequence[ChunkPrediction], transcript: str, config: VacConfig = VacConfig()
) -> list[MatchResult]:
    """Greedy, order-preserving match of each chunk hypothesis to a transcript span."""
    index = TranscriptIndex(transcript, config.normalization)
    if not len(index):
        raise ValueError("transcript is empty")
    results: list[MatchResult] = []
    cursor = 0
    skip = 0
    exhausted_warned = False
    prev_idx = None
    for chunk in chunks:
        if prev_idx is not None and chunk.index <= prev_idx:
            raise ValueError(f"chunk indices must increase ({prev_idx} then {chunk.index})")
        prev_idx = chunk.index
        hyp_norm = " ".join(w for w in normalize_words(chunk.hyp_text, config.normalization) if w)
        if not hyp_norm:
            results.append(MatchResult(chunk.index, "", None, math.nan, MatchStatus.REJECTED))
            continue
        if cursor >= len(index):
            if not exhausted_warned:
                log.warning("transcript exhausted at chunk %d; remaining chunks rejected", chunk.index)
                exhausted_warned = True
            results.append(MatchResult(chunk.index, "", None, math.nan, MatchStatus.REJECTED))
            continue
        hyp = encode_text(hyp_norm)
        hyp_words = len(hyp_norm.split())
        # the backward start slack is cut off by the no-overlap rule: the
        # cursor always sits at the end of the last accepted span
        first = cursor
        last = min(len(index) - 1, cursor + config.start_slack_words + skip)
        cands = enumerate_candidates(index, hyp, hyp_words, range(first, last + 1), config, config.cer_threshold)
        best = min(cands, key=lambda c: _rank(c, cursor, hyp.size), default=None)
        if best is not None and best.cer <= config.cer_threshold:
            status = MatchStatus.EXACT if best.distance == 0 else MatchStatus.FUZZY
            results.append(
                MatchResult(chunk.index, index.text(best.start, best.end), (best.start, best.end), best.cer, status)
            )
            cursor = best.end
            skip = 0
        else:
            value = best.cer if best is not None else math.inf
            results.append(MatchResult(chunk.index, "", None, value, MatchStatus.REJECTED))
            if config.widen_on_reject:
                skip += hyp_words
    return results


# ------------------------------------------------------------------- benchmark


@dataclass(frozen=True)
class BenchmarkStats:
    n: int
    exact_pct: float
    mean_wer: float
    mean_cer: float
    rejected_pct: float
    # means over accepted chunks only
    mean_wer_accepted: float
    mean_cer_accepted: float
    # the raw hypotheses scored against their references, for comparison
    asr_exact_pct: float
    asr_mean_wer: float
    asr_mean_cer: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


EXACT_OPTIONS = ErrorRateOptions()


def _score(ref: str, text: str) -> tuple[bool, float, float]:
    exact = preprocess(text, EXACT_OPTIONS) == preprocess(ref, EXACT_OPTIONS)
    if not text.strip():
        return False, 1.0, 1.0
    return exact, wer(ref, text, EXACT_OPTIONS), cer(ref, text, EXACT_OPTIONS)


def benchmark_merged(
    pairs: Sequence[tuple[str, str]], config: VacConfig = VacConfig(), jobs: int = 1
) -> tuple[BenchmarkStats, list[MatchResult]]:
    """Merge every reference into one transcript, match the hypotheses back, score.

    Rejected chunks are scored against an empty match (WER = CER = 1) in the
    inclusive means.
    """
    if not pairs:
        raise ValueError("no pairs to benchmark")
    refs = [r for r, _ in pairs]
    chunks = [ChunkPrediction(i, h) for i, (_, h) in enumerate(pairs)]
    results = match_transcript(chunks, " ".join(refs), config)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        scored = list(pool.map(_score, refs, [r.matched_text for r in results]))
        raw = list(pool.map(_score, refs, [h for _, h in pairs]))
    n = len(pairs)
    accepted = [s for s, r in zip(scored, results) if r.accepted]

    def mean(xs):
        xs = list(xs)
        return float(np.mean(xs)) if xs else math.nan

    stats = BenchmarkStats(
        n=n,
        exact_pct=100.0 * sum(s[0] for s in scored) / n,
        mean_wer=mean(s[1] for s in scored),
        mean_cer=mean(s[2] for s in scored),
        rejected_pct=100.0 * sum(not r.accepted for r in results) / n,
        mean_wer_accepted=mean(s[1] for s in accepted),
        mean_cer_accepted=mean(s[2] for s in accepted),
        asr_exact_pct=100.0 * sum(s[0] for s in raw) / n,
        asr_mean_wer=mean(s[1] for s in raw),
        asr_mean_cer=mean(s[2] for s in raw),
    )
    return stats, results


def read_hypotheses(lines: Iterable[str]) -> list[ChunkPrediction]:
    """Parse ``index<TAB>text`` lines, or manifest JSON lines (index = line order)."""
    import json

    out = []
    for n, line in enumerate(lines):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.lstrip().startswith("{"):
            rec = json.loads(line)
            text = rec.get("pred_text", rec.get("text", ""))
            out.append(ChunkPrediction(int(rec.get("index", n)), text))
            continue
        idx, _, text = line.partition("\t")
        try:
            out.append(ChunkPrediction(int(idx), text))
        except ValueError:
            raise ValueError(f"hypothesis line {n + 1}: expected 'index<TAB>text'") from None
    out.sort(key=lambda c: c.index)
    return out
