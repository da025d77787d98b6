"""Seeded generators for synthetic corpora: sentences, ASR-style noise, books.

Used by the test-suite, the benchmark command and the kernel benchmarks; all
output is a pure function of the seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .segmenter import WordAlignment
from .textnorm import ARMENIAN_COMMA, ARMENIAN_FULL_STOP

_CONSONANTS = [chr(c) for c in range(0x0561, 0x0587) if chr(c) not in "աեէըիոօ"]
_VOWELS = list("աեէըիոօ") + ["ու"]


def pseudo_word(rng: np.random.Generator, min_syll: int = 1, max_syll: int = 4) -> str:
    n = int(rng.integers(min_syll, max_syll + 1))
    parts = []
    for _ in range(n):
        parts.append(str(rng.choice(_CONSONANTS)))
        parts.append(str(rng.choice(_VOWELS)))
        if rng.random() < 0.3:
            parts.append(str(rng.choice(_CONSONANTS)))
    return "".join(parts)


def make_sentence(rng: np.random.Generator, n_words: int, comma_every: tuple[int, int] = (4, 9)) -> list[str]:
    words = [pseudo_word(rng) for _ in range(n_words)]
    words[0] = words[0][0].upper() + words[0][1:]
    k = int(rng.integers(*comma_every))
    while k < n_words - 1:
        words[k - 1] += str(rng.choice([",", ",", ARMENIAN_COMMA]))
        k += int(rng.integers(*comma_every))
    words[-1] += ARMENIAN_FULL_STOP
    return words


def synth_sentences(n: int, seed: int, min_words: int = 5, max_words: int = 14) -> list[str]:
    """``n`` distinct pseudo-Armenian sentences."""
    rng = np.random.default_rng(seed)
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < n:
        s = " ".join(make_sentence(rng, int(rng.integers(min_words, max_words + 1))))
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


_EDIT_OPS = ("sub", "sub", "del", "ins")


def corrupt_hypothesis(ref: str, char_noise_rate: float, seed: int) -> str:
    """Simulate ASR errors: character edits plus the odd repeated word.

    About 90 % of the edit budget goes to per-character substitutions,
    deletions and insertions, the rest to repeating whole words, so the
    character error rate against ``ref`` lands near ``char_noise_rate``.
    """
    if not 0.0 <= char_noise_rate < 1.0:
        raise ValueError("char_noise_rate must be in [0, 1)")
    if char_noise_rate == 0.0 or not ref:
        return ref
    rng = np.random.default_rng(seed)
    alphabet = sorted({c for c in ref if c.isalpha()}) or ["a"]
    p_char = 0.9 * char_noise_rate
    p_word = 0.1 * char_noise_rate

    words = []
    for w in ref.split(" "):
        chars: list[str] = []
        for c in w:
            if rng.random() >= p_char:
                chars.append(c)
                continue
            op = _EDIT_OPS[int(rng.integers(len(_EDIT_OPS)))]
            if op == "sub":
                choices = [a for a in alphabet if a != c] or alphabet
                chars.append(str(choices[int(rng.integers(len(choices)))]))
            elif op == "ins":
                chars.append(c)
                chars.append(str(alphabet[int(rng.integers(len(alphabet)))]))
            # "del": drop the character
        words.append("".join(chars))
        if rng.random() < p_word and words[-1]:
            words.append(words[-1])
    return " ".join(w for w in words if w)


@dataclass(frozen=True)
class SyntheticBook:
    words: list[WordAlignment]
    audio: AudioBuffer
    transcript: str
    # ground-truth speech intervals (seconds), one per word
    speech: list[tuple[float, float]]


def _burst(rng: np.random.Generator, n: int, level_db: float, sr: int) -> np.ndarray:
    x = rng.standard_normal(n)
    # crude speech-band shaping: first difference + moving average
    x = np.convolve(np.diff(x, prepend=0.0), np.ones(3) / 3, mode="same")
    x *= 10 ** (level_db / 20) / (np.sqrt(np.mean(x * x)) + 1e-12)
    ramp = min(n // 4, int(0.005 * sr))
    if ramp:
        env = np.linspace(0.0, 1.0, ramp)
        x[:ramp] *= env
        x[-ramp:] *= env[::-1]
    return x


def synth_book(
    seed: int,
    n_sentences: int = 12,
    sample_rate: int = 16000,
    utterance_id: str = "001",
    speech_db: tuple[float, float] = (-16.0, -8.0),
    floor_db: float = -65.0,
) -> SyntheticBook:
    """Timed words with rendered audio, resembling a read audiobook chapter.

    Sentence lengths mix short greetings, ordinary sentences and occasional
    long comma-laden ones that exceed 15 s.
    """
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(n_sentences):
        r = rng.random()
        if r < 0.12:
            n = int(rng.integers(1, 4))
        elif r < 0.85:
            n = int(rng.integers(6, 16))
        else:
            n = int(rng.integers(28, 46))
        sentences.append(make_sentence(rng, n))

    t = float(rng.uniform(0.3, 0.8))
    timed: list[tuple[float, float, str]] = []
    for words in sentences:
        for j, w in enumerate(words):
            dur = float(rng.uniform(0.22, 0.6))
            timed.append((t, dur, w))
            t += dur
            if j == len(words) - 1:
                t += float(rng.uniform(0.35, 0.9))
            elif w[-1] in (",", ARMENIAN_COMMA):
                t += float(rng.uniform(0.15, 0.45))
            else:
                t += float(rng.uniform(0.03, 0.09))
    total = t + float(rng.uniform(0.2, 0.6))
    n_samples = int(round(total * sample_rate))
    x = rng.standard_normal(n_samples) * 10 ** (floor_db / 20)
    speech = []
    for start, dur, _ in timed:
        a = int(round(start * sample_rate))
        b = int(round((start + dur) * sample_rate))
        x[a:b] = _burst(rng, b - a, float(rng.uniform(*speech_db)), sample_rate)
        speech.append((a / sample_rate, b / sample_rate))
    audio = AudioBuffer.from_float(x, sample_rate)
    alignments = [
        WordAlignment(utterance_id, round(s, 3), round(d, 3), w) for s, d, w in timed
    ]
    return SyntheticBook(alignments, audio, " ".join(w for _, _, w in timed), speech)
