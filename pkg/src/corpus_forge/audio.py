"""Sample-level signal operations on mono float buffers.

Levels are dBFS: 0 dB is a full-scale (amplitude 1.0) RMS. Every function
returns a new :class:`AudioBuffer`; inputs are never modified.
"""
from __future__ import annotations

import logging
import math
import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import resample_poly

from . import kernels
from .textnorm import DropKind, DropReason

log = logging.getLogger(__name__)

DB_FLOOR = -120.0
TARGET_RATE = 16000


class SilentAudioError(ValueError):
    """Raised when an operation needs speech but the buffer has none."""


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=np.float32)
        if x.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {x.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if x.size and (x.max() > 1.0 or x.min() < -1.0):
            raise ValueError("samples must lie in [-1, 1]; use AudioBuffer.from_float to clip")
        if x is self.samples:
            x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @classmethod
    def from_float(cls, x: np.ndarray, sample_rate: int) -> "AudioBuffer":
        return cls(np.clip(np.asarray(x, dtype=np.float32), -1.0, 1.0), sample_rate)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def index(self, t_s: float) -> int:
        return int(min(max(round(t_s * self.sample_rate), 0), self.samples.size))

    def slice(self, start_s: float, end_s: float) -> "AudioBuffer":
        return AudioBuffer(self.samples[self.index(start_s) : self.index(end_s)], self.sample_rate)


@dataclass(frozen=True)
class VadParams:
    threshold_db: float = -20.0
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    min_silence_ms: float = 100.0
    # threshold taken relative to a percentile of the file's own frame levels
    adaptive: bool = False
    adaptive_percentile: float = 95.0

    def __post_init__(self) -> None:
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError("need frame_ms >= hop_ms > 0")
        if self.threshold_db >= 0:
            raise ValueError("threshold_db must be negative")


@dataclass(frozen=True, eq=False)
class FrameAnalysis:
    rms_db: np.ndarray
    zcr: np.ndarray
    hop_s: float
    frame_len: int
    hop_len: int
    n_samples: int
    sample_rate: int

    def frame_bounds(self, i: int) -> tuple[int, int]:
        s = i * self.hop_len
        return s, min(s + self.frame_len, self.n_samples)


class SilenceSpan(NamedTuple):
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


class VadChunk(NamedTuple):
    start_s: float
    end_s: float
    short: bool = False

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


# --------------------------------------------------------------------------- io


def read_wav(path: str | Path) -> AudioBuffer:
    """Decode a 16-bit PCM WAV; multi-channel input is averaged to mono.

    Other encodings must be converted first, e.g.
    ``ffmpeg -i in.mp3 -ac 1 -ar 16000 -sample_fmt s16 out.wav``.
    """
    with wave.open(str(path), "rb") as wf:
        if wf.getcomptype() != "NONE" or wf.getsampwidth() != 2:
            raise ValueError(
                f"{path}: only 16-bit PCM WAV is supported "
                f"(sample width {wf.getsampwidth() * 8} bit, compression {wf.getcomptype()})"
            )
        channels = wf.getnchannels()
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return AudioBuffer(data, rate)


def to_pcm16(buf: AudioBuffer) -> bytes:
    ints = np.clip(np.round(buf.samples.astype(np.float64) * 32768.0), -32768, 32767)
    return ints.astype("<i2").tobytes()


def write_wav(path: str | Path, buf: AudioBuffer, sample_rate: int = TARGET_RATE) -> None:
    """Write mono 16-bit PCM, resampling to ``sample_rate`` first if needed."""
    if buf.sample_rate != sample_rate:
        buf = resample(buf, sample_rate)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(to_pcm16(buf))


# ------------------------------------------------------------------- analysis


def resample(buf: AudioBuffer, target_hz: int, window: tuple | str = ("kaiser", 5.0)) -> AudioBuffer:
    """Polyphase band-limited resampling; ``window`` sets the filter quality."""
    if len(buf) == 0:
        raise ValueError("cannot resample an empty buffer")
    if target_hz <= 0:
        raise ValueError("target rate must be positive")
    if target_hz == buf.sample_rate:
        return buf
    ratio = Fraction(int(target_hz), int(buf.sample_rate))
    y = resample_poly(buf.samples.astype(np.float64), ratio.numerator, ratio.denominator, window=window)
    return AudioBuffer.from_float(y, int(target_hz))


def analyze_frames(buf: AudioBuffer, params: VadParams = VadParams()) -> FrameAnalysis:
    if len(buf) == 0:
        raise ValueError("cannot analyze an empty buffer")
    sr = buf.sample_rate
    frame = max(1, round(params.frame_ms * sr / 1000))
    hop = max(1, round(params.hop_ms * sr / 1000))
    ms, zcr = kernels.frame_stats(buf.samples, frame, hop)
    floor = 10 ** (DB_FLOOR / 10)
    rms_db = 10 * np.log10(np.maximum(ms, floor))
    return FrameAnalysis(
        rms_db=rms_db,
        zcr=zcr,
        hop_s=hop / sr,
        frame_len=min(frame, len(buf)),
        hop_len=hop,
        n_samples=len(buf),
        sample_rate=sr,
    )


def silence_threshold(analysis: FrameAnalysis, params: VadParams) -> float:
    if not params.adaptive:
        return params.threshold_db
    active = analysis.rms_db[analysis.rms_db > DB_FLOOR]
    if active.size == 0:
        return params.threshold_db
    return float(np.percentile(active, params.adaptive_percentile)) + params.threshold_db


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive-exclusive index runs where ``mask`` is true."""
    if mask.size == 0:
        return []
    d = np.diff(mask.astype(np.int8), prepend=0, append=0)
    return list(zip(np.flatnonzero(d == 1).tolist(), np.flatnonzero(d == -1).tolist()))


def _change_point(csum: np.ndarray, lo: int, hi: int, loud_left: bool, margin: int) -> int | None:
    """Split of ``[lo, hi)`` that best fits two constant-power segments.

    ``csum`` is the cumulative sum of squared samples with a leading zero.
    Only splits whose louder side matches ``loud_left`` are considered.
    """
    p = np.arange(lo + margin, hi - margin + 1)
    if p.size == 0:
        return None
    n1 = (p - lo).astype(np.float64)
    n2 = (hi - p).astype(np.float64)
    v1 = (csum[p] - csum[lo]) / n1
    v2 = (csum[hi] - csum[p]) / n2
    tiny = 10 ** (DB_FLOOR / 10)
    ll = -n1 * np.log(v1 + tiny) - n2 * np.log(v2 + tiny)
    ll[(v1 > v2) != loud_left] = -np.inf
    k = int(np.argmax(ll))
    return int(p[k]) if np.isfinite(ll[k]) else None


def _silent_sample_runs(
    analysis: FrameAnalysis,
    params: VadParams,
    min_silence_ms: float | None = None,
    samples: np.ndarray | None = None,
) -> list[tuple[int, int]]:
    thr = silence_threshold(analysis, params)
    min_len = (params.min_silence_ms if min_silence_ms is None else min_silence_ms) / 1000
    runs = []
    for a, b in _runs(analysis.rms_db < thr):
        s = analysis.frame_bounds(a)[0]
        e = analysis.frame_bounds(b - 1)[1]
        if (e - s) / analysis.sample_rate >= min_len - 1e-9:
            runs.append((s, e))
    if samples is None or not runs:
        return runs
    # a frame counts as silent while its speech share keeps it under the
    # threshold, so frame edges drift with the speech level; move each interior
    # edge to the power change point within one frame of it
    x = samples.astype(np.float64)
    csum = np.concatenate(([0.0], np.cumsum(x * x)))
    n, w, margin = analysis.n_samples, analysis.frame_len, max(1, analysis.hop_len // 10)
    out = []
    for i, (s, e) in enumerate(runs):
        left_limit = out[-1][1] if out else 0
        right_limit = runs[i + 1][0] if i + 1 < len(runs) else n
        mid = (s + e) // 2
        if s > 0:
            p = _change_point(csum, max(left_limit, s - w), min(mid, s + w), True, margin)
            s = s if p is None else p
        if e < n:
            p = _change_point(csum, max(mid, e - w), min(right_limit, e + w), False, margin)
            e = e if p is None else p
        out.append((s, e))
    return out


def detect_silences(
    buf: AudioBuffer, params: VadParams = VadParams(), analysis: FrameAnalysis | None = None
) -> list[SilenceSpan]:
    """Maximal runs of frames below the threshold lasting ``min_silence_ms`` or more.

    Runs are found on frames; their interior edges are then placed at the
    sample where the signal power changes.
    """
    analysis = analysis or analyze_frames(buf, params)
    sr = buf.sample_rate
    return [SilenceSpan(s / sr, e / sr) for s, e in _silent_sample_runs(analysis, params, samples=buf.samples)]


def snap_to_silence(t_s: float, spans: list[SilenceSpan], direction: str = "before") -> float:
    """Midpoint of the nearest silence at-or-before (or at-or-after) ``t_s``."""
    if direction == "before":
        best = None
        for sp in spans:
            if sp.start_s <= t_s:
                best = sp
            else:
                break
    elif direction == "after":
        best = next((sp for sp in spans if sp.end_s >= t_s), None)
    else:
        raise ValueError("direction must be 'before' or 'after'")
    return t_s if best is None else best.midpoint


# ------------------------------------------------------------------- editing


def fade_edges(buf: AudioBuffer, fade_ms: float) -> AudioBuffer:
    """Linear fade-in and fade-out of ``fade_ms`` at the buffer edges."""
    n = min(int(round(fade_ms * buf.sample_rate / 1000)), len(buf) // 2)
    if n <= 0:
        return buf
    x = buf.samples.copy()
    ramp = np.linspace(0.0, 1.0, n + 2, dtype=np.float32)[1:-1]
    x[:n] *= ramp
    x[-n:] *= ramp[::-1]
    return AudioBuffer(x, buf.sample_rate)


def splice(x: np.ndarray, cuts: list[tuple[int, int]], fade: int) -> np.ndarray:
    """Remove sample ranges ``[c0, c1)``, crossfading across each join.

    The fade overlaps the first removed samples with the first kept samples,
    so exactly ``c1 - c0`` samples disappear per cut.
    """
    parts: list[np.ndarray] = []
    pos = 0
    for c0, c1 in sorted(cuts):
        if c1 <= c0:
            continue
        n = max(0, min(fade, c1 - c0, x.size - c1))
        parts.append(x[pos:c0])
        if n:
            w = np.linspace(0.0, 1.0, n + 2, dtype=np.float32)[1:-1]
            parts.append(x[c0 : c0 + n] * (1 - w) + x[c1 : c1 + n] * w)
        pos = c1 + n
    parts.append(x[pos:])
    return np.concatenate(parts) if parts else x.copy()


def _trim_cuts(n: int, runs: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    cuts = []
    for s, e in runs:
        length = e - s
        if length <= gap:
            continue
        if s == 0 and e == n:
            cuts.append((gap, n))
        elif s == 0:
            cuts.append((0, e - gap))
        elif e == n:
            cuts.append((s + gap, n))
        else:
            cuts.append((s + gap // 2, e - (gap - gap // 2)))
    return cuts


def trim_silences(
    buf: AudioBuffer, params: VadParams = VadParams(), max_gap_s: float = 0.5, fade_ms: float = 10.0
) -> AudioBuffer:
    """Shorten every detected silence to at most ``max_gap_s``.

    Interior silences lose their centre; leading and trailing silences keep
    the part next to speech. Only samples inside detected silence are removed.
    """
    if max_gap_s <= 0:
        raise ValueError("max_gap_s must be positive")
    if len(buf) == 0:
        return buf
    sr = buf.sample_rate
    gap = int(round(max_gap_s * sr))
    fade = int(round(fade_ms * sr / 1000))
    x = buf.samples
    # Re-detection on the spliced signal sees a shifted frame grid, which can
    # widen a kept gap by a fraction of a frame; a few passes settle it.
    for _ in range(4):
        analysis = analyze_frames(AudioBuffer(x, sr), params)
        cuts = _trim_cuts(x.size, _silent_sample_runs(analysis, params, samples=x), gap)
        if not cuts:
            break
        x = splice(x, cuts, fade)
    return AudioBuffer.from_float(x, sr)


@dataclass(frozen=True)
class VolumeReport:
    input_db: float
    output_db: float
    gain_db: float
    limited_ratio: float


def speech_level_db(
    buf: AudioBuffer, params: VadParams = VadParams(), gate_abs_db: float = -60.0, gate_rel_db: float = 20.0
) -> float:
    """Power-mean level of the non-silent frames.

    Frames below ``gate_abs_db`` are silence; of the rest, frames more than
    ``gate_rel_db`` under the loud (95th percentile) frames are ignored too,
    so long pauses do not drag the estimate down.
    """
    db = analyze_frames(buf, params).rms_db
    active = db[db > gate_abs_db]
    if active.size == 0:
        raise SilentAudioError("no frame above the silence gate; cannot measure speech level")
    active = active[active > np.percentile(active, 95) - gate_rel_db]
    return float(10 * np.log10(np.mean(10 ** (active / 10))))


def normalize_volume(
    buf: AudioBuffer,
    target_rms_db: float = -20.0,
    params: VadParams = VadParams(),
    tolerance_db: float = 0.0,
    max_iter: int = 4,
) -> tuple[AudioBuffer, VolumeReport]:
    """Scale so the speech (non-silent) level hits ``target_rms_db``, then hard-limit.

    Gains smaller than ``tolerance_db`` are skipped so already-conditioned
    audio passes through untouched. Limiting eats level, so the gain is
    re-estimated a few times.
    """
    level_in = speech_level_db(buf, params)
    x = buf.samples.astype(np.float64)
    total_gain = target_rms_db - level_in
    if abs(total_gain) < tolerance_db or total_gain == 0.0:
        return buf, VolumeReport(level_in, level_in, 0.0, float(np.mean(np.abs(x) >= 1.0)))
    out = buf
    limited = 0.0
    for _ in range(max_iter):
        y = x * 10 ** (total_gain / 20)
        limited = float(np.mean(np.abs(y) > 1.0))
        out = AudioBuffer.from_float(y, buf.sample_rate)
        miss = target_rms_db - speech_level_db(out, params)
        if abs(miss) < 0.05:
            break
        total_gain += miss
    level_out = speech_level_db(out, params)
    return out, VolumeReport(level_in, level_out, total_gain, limited)


# -------------------------------------------------------------------- chunking


def _split_long_region(
    analysis: FrameAnalysis, params: VadParams, s: int, e: int, min_len: int, max_len: int
) -> list[tuple[int, int]]:
    if e - s <= max_len:
        return [(s, e)]
    thr = silence_threshold(analysis, params)
    hop, frame = analysis.hop_len, analysis.frame_len
    f0 = -(-s // hop)
    f1 = max(f0, (e - frame) // hop + 1)
    db = analysis.rms_db[f0:f1]
    cands = []
    for a, b in _runs(db < thr):
        cs = (f0 + a) * hop
        ce = (f0 + b - 1) * hop + frame
        cands.append((cs, ce))
    if not cands and db.size:
        k = f0 + int(np.argmin(db))
        cands = [(k * hop, k * hop + frame)]

    def score(c):
        mid = (c[0] + c[1]) // 2
        balanced = min(mid - s, e - mid) >= min_len
        return (balanced, c[1] - c[0], -abs(mid - (s + e) // 2))

    inner = [c for c in cands if s < (c[0] + c[1]) // 2 < e]
    if not inner:
        mid = (s + e) // 2
        return _split_long_region(analysis, params, s, mid, min_len, max_len) + _split_long_region(
            analysis, params, mid, e, min_len, max_len
        )
    cs, ce = max(inner, key=score)
    cs, ce = max(cs, s + 1), min(ce, e - 1)
    left = _split_long_region(analysis, params, s, cs, min_len, max_len) if cs > s else []
    right = _split_long_region(analysis, params, ce, e, min_len, max_len) if ce < e else []
    return left + right


def chunk_by_vad(
    buf: AudioBuffer, params: VadParams = VadParams(), min_s: float = 3.0, max_s: float = 15.0
) -> list[VadChunk]:
    """Cut speech into chunks between silences, merged toward ``[min_s, max_s]``.

    Regions are merged greedily until a chunk reaches ``min_s``; regions longer
    than ``max_s`` are split at their longest quiet stretch. Chunks still under
    ``min_s`` have ``short=True``.
    """
    if not min_s < max_s:
        raise ValueError("need min_s < max_s")
    sr = buf.sample_rate
    analysis = analyze_frames(buf, params)
    silences = _silent_sample_runs(analysis, params, samples=buf.samples)
    n = len(buf)
    regions: list[tuple[int, int]] = []
    pos = 0
    for s, e in silences:
        if s > pos:
            regions.append((pos, s))
        pos = max(pos, e)
    if pos < n:
        regions.append((pos, n))
    min_len, max_len = int(round(min_s * sr)), int(round(max_s * sr))
    pieces: list[tuple[int, int]] = []
    for s, e in regions:
        pieces.extend(_split_long_region(analysis, params, s, e, min_len, max_len))

    merged: list[list[int]] = []
    for s, e in pieces:
        if merged and merged[-1][1] - merged[-1][0] < min_len and e - merged[-1][0] <= max_len:
            merged[-1][1] = e
        else:
            merged.append([s, e])
    # leftover short chunks join their predecessor when that fits
    out: list[list[int]] = []
    for s, e in merged:
        if out and e - s < min_len and e - out[-1][0] <= max_len:
            out[-1][1] = e
        else:
            out.append([s, e])
    return [VadChunk(s / sr, e / sr, (e - s) < min_len) for s, e in out]


# --------------------------------------------------------------------- quality


@dataclass(frozen=True)
class QualityConfig:
    min_mean_zcr: float = 0.01
    max_silence_ratio: float = 0.6
    max_clipping_ratio: float = 0.02
    clip_level: float = 0.999


def silence_ratio(buf: AudioBuffer, params: VadParams = VadParams(), analysis: FrameAnalysis | None = None) -> float:
    spans = detect_silences(buf, params, analysis)
    return sum(sp.duration_s for sp in spans) / buf.duration_s


def quality_check(
    buf: AudioBuffer, params: VadParams = VadParams(), config: QualityConfig = QualityConfig()
) -> DropReason | None:
    """``None`` when the audio is usable, else a ``Corrupted`` drop reason."""
    if len(buf) == 0:
        return DropReason(DropKind.CORRUPTED, "empty audio")
    analysis = analyze_frames(buf, params)
    mean_zcr = float(np.mean(analysis.zcr))
    if mean_zcr < config.min_mean_zcr:
        return DropReason(DropKind.CORRUPTED, f"mean zero-crossing rate {mean_zcr:.4f} < {config.min_mean_zcr}")
    ratio = silence_ratio(buf, params, analysis)
    if ratio > config.max_silence_ratio:
        return DropReason(DropKind.CORRUPTED, f"silence ratio {ratio:.2f} > {config.max_silence_ratio}")
    clipped = float(np.mean(np.abs(buf.samples) >= config.clip_level))
    if clipped > config.max_clipping_ratio:
        return DropReason(DropKind.CORRUPTED, f"clipping ratio {clipped:.3f} > {config.max_clipping_ratio}")
    return None


def level_db(x: np.ndarray) -> float:
    """Whole-signal RMS in dBFS."""
    ms = float(np.mean(np.square(x, dtype=np.float64))) if x.size else 0.0
    return 10 * math.log10(max(ms, 10 ** (DB_FLOOR / 10)))
