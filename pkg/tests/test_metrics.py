import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corpus_forge.metrics import ErrorRateOptions, cer, edit_distance, preprocess, wer

from conftest import brute_distance


def _all_pairs(alphabet, max_total):
    for la in range(max_total + 1):
        for lb in range(max_total - la + 1):
            for a in itertools.product(alphabet, repeat=la):
                for b in itertools.product(alphabet, repeat=lb):
                    yield "".join(a), "".join(b)


def test_exhaustive_small_lengths():
    # combined length <= 8 here; the full <= 14 sweep runs in the acceptance suite
    for a, b in _all_pairs("abc", 8):
        assert edit_distance(a, b) == brute_distance(a, b)


def test_random_pairs_against_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        a = "".join(rng.choice(list("abcdé"), rng.integers(0, 21)))
        b = "".join(rng.choice(list("abcdé"), rng.integers(0, 21)))
        assert edit_distance(a, b) == brute_distance(a, b)


@given(st.text(max_size=15), st.text(max_size=15), st.text(max_size=15))
def test_metric_axioms(a, b, c):
    assert edit_distance(a, a) == 0
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert abs(len(a) - len(b)) <= edit_distance(a, b) <= max(len(a), len(b))


def test_word_sequences():
    assert edit_distance("the cat sat".split(), "the bat sat down".split()) == 2


def test_cer_examples():
    assert cer("abcd", "abed") == 0.25
    assert cer("abc", "abc") == 0.0
    # insertions can push CER past 1
    assert cer("a", "abc") == 2.0


def test_wer_example():
    assert wer("Բարև աշխարհ", "Բարև աշխար") == 0.5


def test_empty_reference_is_an_error():
    with pytest.raises(ValueError):
        cer("", "abc")
    with pytest.raises(ValueError):
        wer("  ", "abc")
    with pytest.raises(ValueError):
        cer("!!", "x", ErrorRateOptions(ignore_punctuation=True))


def test_options():
    loose = ErrorRateOptions(ignore_punctuation=True, ignore_case=True)
    assert cer("Hello, World!", "hello world", loose) == 0.0
    assert cer("Hello, World!", "hello world") > 0
    assert preprocess("a \t b ") == "a b"
    # NFC: decomposed e + acute equals the precomposed letter
    assert cer("cafe\u0301", "caf\u00e9") == 0.0
    assert math.isclose(cer("cafe\u0301", "caf\u00e9", ErrorRateOptions(unicode_nfc=False)), 0.4)
