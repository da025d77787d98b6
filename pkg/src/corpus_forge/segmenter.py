"""Turn word-level CTM alignments into 3-15 s sentence-coherent chunks.

Stages, in pipeline order: :func:`merge_to_sentences`,
:func:`mitigate_boundaries`, :func:`split_long`, :func:`consolidate`,
:func:`finalize`. :func:`segment_words` runs the first four,
:func:`run_pipeline` all five.
"""
from __future__ import annotations

import difflib
import enum
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace

from .audio import (
    AudioBuffer,
    SilenceSpan,
    VadParams,
    detect_silences,
    fade_edges,
    snap_to_silence,
    trim_silences,
)
from .metrics import strip_punctuation
from .textnorm import DEFAULT_RULES

log = logging.getLogger(__name__)

OVERLAP_EPS = 0.010
CLOSING_MARKS = "»”\")'"


class Flag(str, enum.Enum):
    UNDER_MIN = "UNDER_MIN"
    BOUNDARY_ADJUSTED = "BOUNDARY_ADJUSTED"
    SPLIT_AT_AP = "SPLIT_AT_AP"
    CONSOLIDATED = "CONSOLIDATED"
    # text ran out (or the utterance changed) before a sentence-final mark
    NO_FINAL_MARK = "NO_FINAL_MARK"
    # no auxiliary-punctuation split fit; split at plain word gaps instead
    SPLIT_FALLBACK = "SPLIT_FALLBACK"
    OVER_MAX = "OVER_MAX"


class CtmParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SegmentBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class WordAlignment:
    utterance_id: str
    start_s: float
    dur_s: float
    word: str

    @property
    def end_s(self) -> float:
        return self.start_s + self.dur_s


@dataclass(frozen=True)
class Segment:
    start_s: float
    end_s: float
    text: str
    word_count: int
    first_word: int = 0
    utterance_id: str = ""
    flags: frozenset[Flag] = frozenset()
    emitted_s: float | None = None

    def __post_init__(self) -> None:
        if not self.end_s > self.start_s:
            raise ValueError(f"segment end {self.end_s} must exceed start {self.start_s}")
        if not self.text:
            raise ValueError("segment text must not be empty")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def word_slice(self) -> slice:
        return slice(self.first_word, self.first_word + self.word_count)

    def flagged(self, *flags: Flag) -> "Segment":
        return replace(self, flags=self.flags | frozenset(flags))


@dataclass(frozen=True)
class SegmenterConfig:
    min_s: float = 3.0
    target_s: float = 8.0
    max_s: float = 15.0
    sentence_final_marks: frozenset[str] = DEFAULT_RULES.sentence_final_marks
    auxiliary_punctuation: frozenset[str] = DEFAULT_RULES.auxiliary_punctuation
    vad: VadParams = VadParams()
    max_gap_s: float = 0.5
    # silence measured within this distance either side of a candidate split
    ap_window_s: float = 0.25
    # an end is "in silence" when it lies this close to a detected span
    boundary_tolerance_s: float = 0.025
    max_snap_s: float = 0.5
    crossfade_ms: float = 10.0
    edge_fade_ms: float = 5.0

    def __post_init__(self) -> None:
        if not self.min_s < self.target_s < self.max_s:
            raise ValueError("need min_s < target_s < max_s")


# ------------------------------------------------------------------------- CTM


def _parse_float(tok: str, line_no: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CtmParseError(line_no, f"non-numeric {what} {tok!r}") from None


def parse_ctm(lines: Iterable[str]) -> list[WordAlignment]:
    """Parse CTM text in either 5-column or 4-column (no channel) layout.

    Extra trailing columns (e.g. confidence) in the 5-column layout are
    ignored. Words are sorted per utterance; overlaps are clamped with a
    warning.
    """
    by_utt: dict[str, list[tuple[float, int, WordAlignment]]] = {}
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith(";;") or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) == 4:
            utt, start, dur, word = fields
        elif len(fields) >= 5:
            utt, _channel, start, dur, word = fields[:5]
        else:
            raise CtmParseError(line_no, f"expected 4 or 5 fields, got {len(fields)}")
        s = _parse_float(start, line_no, "start")
        d = _parse_float(dur, line_no, "duration")
        if d <= 0:
            raise CtmParseError(line_no, f"duration must be positive, got {d}")
        if s < 0:
            raise CtmParseError(line_no, f"start must be non-negative, got {s}")
        by_utt.setdefault(utt, []).append((s, line_no, WordAlignment(utt, s, d, word)))

    out: list[WordAlignment] = []
    for utt, entries in by_utt.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        prev: WordAlignment | None = None
        for _, line_no, w in entries:
            if prev is not None and prev.end_s > w.start_s:
                overlap = prev.end_s - w.start_s
                level = logging.DEBUG if overlap <= OVERLAP_EPS else logging.WARNING
                log.log(level, "line %d: word %r overlaps previous by %.3f s; clamped", line_no, w.word, overlap)
                clamped = w.start_s - prev.start_s
                if clamped <= 0:
                    raise CtmParseError(line_no, f"word {w.word!r} starts together with {prev.word!r}")
                out[-1] = replace(prev, dur_s=clamped)
            out.append(w)
            prev = w
    return out


def attach_punctuation(words: Sequence[WordAlignment], transcript: str) -> list[WordAlignment]:
    """Replace bare CTM words with their punctuated transcript tokens.

    Tokens are paired by sequence alignment on punctuation-free, case-folded
    forms; words that cannot be paired keep their CTM text.
    """
    tokens = transcript.split()

    def key(s: str) -> str:
        return strip_punctuation(s).replace(" ", "").casefold()

    a = [key(w.word) for w in words]
    b = [key(t) for t in tokens]
    out = list(words)
    sm = difflib.SequenceMatcher(None, a, b, autojunk=False)
    for tag, i1, i2, j1, j2 in sm.get_opcodes():
        if tag == "equal" or (tag == "replace" and i2 - i1 == j2 - j1):
            for k in range(i2 - i1):
                out[i1 + k] = replace(out[i1 + k], word=tokens[j1 + k])
    return out


# ------------------------------------------------------------------- sentences


def _ends_with(word: str, marks: frozenset[str]) -> bool:
    w = word.rstrip(CLOSING_MARKS)
    return bool(w) and w[-1] in marks


def _make_segment(words: Sequence[WordAlignment], first: int, last: int, **kw) -> Segment:
    ws = words[first : last + 1]
    return Segment(
        start_s=kw.pop("start_s", ws[0].start_s),
        end_s=kw.pop("end_s", ws[-1].end_s),
        text=" ".join(w.word for w in ws),
        word_count=len(ws),
        first_word=first,
        utterance_id=ws[0].utterance_id,
        **kw,
    )


def merge_to_sentences(words: Sequence[WordAlignment], config: SegmenterConfig = SegmenterConfig()) -> list[Segment]:
    """Group consecutive words into segments closed by sentence-final marks."""
    segments: list[Segment] = []
    first = 0
    for i, w in enumerate(words):
        last_of_utt = i + 1 == len(words) or words[i + 1].utterance_id != w.utterance_id
        if _ends_with(w.word, config.sentence_final_marks):
            segments.append(_make_segment(words, first, i))
            first = i + 1
        elif last_of_utt:
            segments.append(_make_segment(words, first, i, flags=frozenset({Flag.NO_FINAL_MARK})))
            first = i + 1
    return segments


def mitigate_boundaries(
    segments: Sequence[Segment],
    audio: AudioBuffer,
    config: SegmenterConfig = SegmenterConfig(),
    silences: list[SilenceSpan] | None = None,
) -> list[Segment]:
    """Move segment ends that fall in speech back to the nearest earlier silence."""
    spans = detect_silences(audio, config.vad) if silences is None else silences
    tol = config.boundary_tolerance_s
    out: list[Segment] = []
    for seg in segments:
        if out and seg.start_s < out[-1].end_s and seg.utterance_id == out[-1].utterance_id:
            seg = replace(seg, start_s=out[-1].end_s)
        end = seg.end_s
        if not any(sp.start_s - tol <= end <= sp.end_s + tol for sp in spans):
            snapped = snap_to_silence(end, spans, "before")
            if snapped == end:
                log.warning("segment at %.2f s ends in speech with no earlier silence; left as is", seg.start_s)
            elif snapped <= seg.start_s or end - snapped > config.max_snap_s:
                log.warning(
                    "segment at %.2f s ends in speech; nearest silence (%.2f s) is too far back", seg.start_s, snapped
                )
            else:
                seg = replace(seg, end_s=snapped).flagged(Flag.BOUNDARY_ADJUSTED)
        out.append(seg)
    return out


# ------------------------------------------------------------------- splitting


def _overlap(a0: float, a1: float, spans: Iterable[tuple[float, float]]) -> float:
    return sum(max(0.0, min(a1, e) - max(a0, s)) for s, e in spans)


def _us(x: float) -> int:
    return int(round(x * 1_000_000))


@dataclass(frozen=True)
class SplitPlan:
    """Chosen cut positions (indices of the word each part ends on) and score."""

    cuts: tuple[int, ...]
    n_splits: int
    silence_us: int
    deviation_us: int


def split_sites(
    words: Sequence[WordAlignment],
    seg: Segment,
    candidates: Iterable[int],
    silences: Sequence[tuple[float, float]],
    config: SegmenterConfig,
) -> dict[int, tuple[float, int]]:
    """Cut time and silence score (µs) for each candidate word boundary."""
    sites = {}
    for k in candidates:
        t = 0.5 * (words[k].end_s + words[k + 1].start_s)
        t = min(max(t, seg.start_s), seg.end_s)
        w = config.ap_window_s
        sites[k] = (t, _us(_overlap(t - w, t + w, silences)))
    return sites


def plan_splits(
    start_s: float, end_s: float, sites: dict[int, tuple[float, int]], config: SegmenterConfig
) -> SplitPlan | None:
    """Best cut set: fewest splits, then most silence, then parts nearest target.

    Exact dynamic programme over the candidate sites; ties fall to the
    lexicographically smallest cut tuple. ``None`` when no subset keeps every
    part within ``max_s``.
    """
    keys = sorted(sites)
    times = [start_s] + [sites[k][0] for k in keys] + [end_s]
    sil = [0] + [sites[k][1] for k in keys] + [0]
    n = len(times)
    max_us = _us(config.max_s)
    best: list[tuple | None] = [None] * n
    best[0] = (0, 0, 0, ())
    for j in range(1, n):
        last = j == n - 1
        for i in range(j):
            if best[i] is None:
                continue
            length = _us(times[j]) - _us(times[i])
            if length > max_us or length <= 0:
                continue
            ns, neg_sil, dev, path = best[i]
            cand = (
                ns + (0 if last else 1),
                neg_sil - (0 if last else sil[j]),
                dev + abs(length - _us(config.target_s)),
                path if last else path + (keys[j - 1],),
            )
            if best[j] is None or cand < best[j]:
                best[j] = cand
    if best[-1] is None:
        return None
    ns, neg_sil, dev, path = best[-1]
    return SplitPlan(path, ns, -neg_sil, dev)


def split_long(
    segment: Segment,
    words: Sequence[WordAlignment],
    audio: AudioBuffer | None = None,
    config: SegmenterConfig = SegmenterConfig(),
    silences: Sequence[tuple[float, float]] | None = None,
) -> list[Segment]:
    """Split an over-long segment at auxiliary punctuation.

    ``words`` is the full word list the segment indexes into. Silence scores
    come from the audio when given, else from the inter-word gaps.
    """
    if segment.duration_s <= config.max_s:
        return [segment]
    if segment.word_count <= 1:
        log.warning("single-word segment at %.2f s is %.1f s long; cannot split", segment.start_s, segment.duration_s)
        return [segment.flagged(Flag.OVER_MAX)]

    lo, hi = segment.first_word, segment.first_word + segment.word_count
    if silences is None:
        if audio is not None:
            silences = [tuple(sp) for sp in detect_silences(audio, config.vad)]
        else:
            silences = [(words[k].end_s, words[k + 1].start_s) for k in range(lo, hi - 1)]
    aps = [k for k in range(lo, hi - 1) if _ends_with(words[k].word, config.auxiliary_punctuation)]
    flag = Flag.SPLIT_AT_AP
    plan = plan_splits(segment.start_s, segment.end_s, split_sites(words, segment, aps, silences, config), config)
    if plan is None:
        flag = Flag.SPLIT_FALLBACK
        every = range(lo, hi - 1)
        plan = plan_splits(segment.start_s, segment.end_s, split_sites(words, segment, every, silences, config), config)
        if plan is None:
            log.warning("segment at %.2f s cannot be split under %.1f s", segment.start_s, config.max_s)
            return [segment.flagged(Flag.OVER_MAX)]
        log.info("segment at %.2f s split at word gaps; no punctuation split fits", segment.start_s)

    sites = split_sites(words, segment, plan.cuts, silences, config)
    bounds = [segment.start_s] + [sites[k][0] for k in plan.cuts] + [segment.end_s]
    firsts = [lo] + [k + 1 for k in plan.cuts]
    lasts = [k for k in plan.cuts] + [hi - 1]
    inherited = segment.flags - {Flag.BOUNDARY_ADJUSTED, Flag.NO_FINAL_MARK}
    parts = []
    for p, (f, l) in enumerate(zip(firsts, lasts)):
        flags = inherited | {flag}
        if p == len(firsts) - 1:
            flags |= segment.flags & {Flag.BOUNDARY_ADJUSTED, Flag.NO_FINAL_MARK}
        parts.append(_make_segment(words, f, l, start_s=bounds[p], end_s=bounds[p + 1], flags=frozenset(flags)))
    return parts


# --------------------------------------------------------------- consolidation


def _join(a: Segment, b: Segment) -> Segment:
    return Segment(
        start_s=a.start_s,
        end_s=b.end_s,
        text=f"{a.text} {b.text}",
        word_count=a.word_count + b.word_count,
        first_word=a.first_word,
        utterance_id=a.utterance_id,
        flags=(a.flags | b.flags | {Flag.CONSOLIDATED}) - {Flag.UNDER_MIN},
    )


def consolidate(segments: Sequence[Segment], config: SegmenterConfig = SegmenterConfig()) -> list[Segment]:
    """Merge segments shorter than ``min_s`` into a neighbour when it fits.

    A short segment joins its successor first; failing that (or when it is
    the last one) it joins its predecessor. Anything still short is flagged
    ``UNDER_MIN``.
    """
    def fits(a: Segment, b: Segment) -> bool:
        return a.utterance_id == b.utterance_id and b.end_s - a.start_s <= config.max_s

    forward: list[Segment] = []
    for seg in segments:
        if forward and forward[-1].duration_s < config.min_s and fits(forward[-1], seg):
            forward[-1] = _join(forward[-1], seg)
        else:
            forward.append(seg)
    out: list[Segment] = []
    for seg in forward:
        if out and seg.duration_s < config.min_s and fits(out[-1], seg):
            out[-1] = _join(out[-1], seg)
        else:
            out.append(seg)
    return [s.flagged(Flag.UNDER_MIN) if s.duration_s < config.min_s else s for s in out]


# -------------------------------------------------------------------- pipeline


def finalize(
    segments: Sequence[Segment], audio: AudioBuffer, config: SegmenterConfig = SegmenterConfig()
) -> list[tuple[Segment, AudioBuffer]]:
    """Cut each segment's audio, trim long pauses and fade the edges."""
    out = []
    eps = 1.0 / audio.sample_rate
    for i, seg in enumerate(segments):
        if seg.start_s < -eps or seg.end_s > audio.duration_s + eps:
            raise SegmentBoundsError(
                f"segment {i} [{seg.start_s:.3f}, {seg.end_s:.3f}] lies outside the "
                f"{audio.duration_s:.3f} s audio"
            )
        clip = audio.slice(seg.start_s, seg.end_s)
        clip = trim_silences(clip, config.vad, config.max_gap_s, config.crossfade_ms)
        clip = fade_edges(clip, config.edge_fade_ms)
        out.append((replace(seg, emitted_s=round(clip.duration_s, 6)), clip))
    return out


def segment_words(
    words: Sequence[WordAlignment], audio: AudioBuffer | None = None, config: SegmenterConfig = SegmenterConfig()
) -> list[Segment]:
    """Sentence merge, boundary mitigation, long splits and consolidation."""
    silences = detect_silences(audio, config.vad) if audio is not None else None
    segs = merge_to_sentences(words, config)
    if audio is not None:
        segs = mitigate_boundaries(segs, audio, config, silences)
    span_pairs = [tuple(sp) for sp in silences] if silences is not None else None
    split: list[Segment] = []
    for seg in segs:
        split.extend(split_long(seg, words, audio, config, span_pairs))
    return consolidate(split, config)


def run_pipeline(
    words: Sequence[WordAlignment], audio: AudioBuffer, config: SegmenterConfig = SegmenterConfig()
) -> list[tuple[Segment, AudioBuffer]]:
    return finalize(segment_words(words, audio, config), audio, config)


def format_report_line(filename: str, seg: Segment) -> str:
    flags = ",".join(sorted(f.value for f in seg.flags)) or "-"
    return f"{filename}\t{seg.start_s:.3f}\t{seg.end_s:.3f}\t{flags}\t{seg.text}"
