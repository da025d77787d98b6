import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from corpus_forge.synth import make_sentence
from corpus_forge.textnorm import (
    DEFAULT_RULES,
    DropKind,
    DropReason,
    NormalizationRules,
    count_expressive,
    expressiveness_filter,
    normalize_text,
    reinsert_colons,
    restore_colons,
    strip_colons,
)

ARM = [chr(c) for c in range(0x0531, 0x0557)] + [chr(c) for c in range(0x0561, 0x0588)]


def test_symbols_removed():
    assert normalize_text("«Բարև», (աշխարհ)") == "Բարև, աշխարհ"
    assert normalize_text("<<Բարև>>") == "Բարև"


def test_empty_inputs():
    for raw in ("", "   ", "«»()", "...", "—"):
        r = normalize_text(raw)
        assert isinstance(r, DropReason) and r.kind is DropKind.EMPTY


def test_foreign_letters_and_digits_dropped():
    for raw in ("Բարև hello", "Բարև 12", "Привет Բարև"):
        r = normalize_text(raw)
        assert isinstance(r, DropReason) and r.kind is DropKind.NON_ALPHABETIC


def test_substitutions():
    assert normalize_text("Բարև - աշխարհ") == "Բարև — աշխարհ"
    assert normalize_text("Բարև–աշխարհ") == "Բարև — աշխարհ"
    assert normalize_text("Գնաց տուն:") == "Գնաց տուն։"
    assert normalize_text("Գնաց ...") == "Գնաց …"


def test_whitespace_and_mark_spacing():
    assert normalize_text("  Բարև \t\n աշխարհ ։ ") == "Բարև աշխարհ։"
    assert normalize_text("Բարև (ձեզ) , աշխարհ") == "Բարև ձեզ, աշխարհ"


def test_malformed_unicode_raises():
    with pytest.raises(UnicodeError):
        normalize_text("Բարև\udc80")
    with pytest.raises(UnicodeError):
        normalize_text(b"\xff\xfe")


def test_nfc_applied():
    # Armenian has no precomposed forms, so use a Latin alphabet for the check
    rules = NormalizationRules(alphabet=frozenset("abcdefé"))
    assert normalize_text("café", rules) == "café"


def test_case_insensitive_alphabet():
    rules = NormalizationRules(alphabet=frozenset("abc"))
    assert normalize_text("ABC cab", rules) == "ABC cab"


def test_rules_disjointness_enforced():
    with pytest.raises(ValueError):
        NormalizationRules(auxiliary_punctuation=frozenset({",", "։"}))
    with pytest.raises(ValueError):
        NormalizationRules(alphabet=frozenset())


def test_rules_dict_round_trip():
    assert NormalizationRules.from_dict(DEFAULT_RULES.to_dict()) == DEFAULT_RULES
    with pytest.raises(KeyError):
        NormalizationRules.from_dict({"bogus": 1})


_text = st.lists(
    st.sampled_from(ARM[:20] + list(" ,։՝՛՜՞?!.«»()-–:") + ["...", "  ", " - "]), max_size=30
).map("".join)


@settings(max_examples=300, deadline=None)
@given(_text)
def test_idempotent_and_letter_count_non_increasing(raw):
    once = normalize_text(raw)
    if isinstance(once, DropReason):
        return
    assert normalize_text(once) == once
    letters = lambda s: sum(ch in DEFAULT_RULES.alphabet for ch in s)
    assert letters(once) <= letters(raw)
    assert all(ch == " " or DEFAULT_RULES.in_alphabet(ch) or ch in DEFAULT_RULES.allowed_marks for ch in once)


@settings(max_examples=200, deadline=None)
@given(_text)
@example("Ա - –")
@example("–-–")
@example("Ա -   –")
def test_punctuation_map_idempotent(raw):
    def apply(t):
        for p, r in DEFAULT_RULES._compiled_map:
            t = p.sub(r, t)
        return t

    assert apply(apply(raw)) == apply(raw)


def test_strip_colons_examples():
    assert strip_colons("Գնաց տուն։") == ("Գնաց տուն", [9])
    assert strip_colons("no colons here") == ("no colons here", [])


def test_reinsert_colons_examples():
    assert reinsert_colons("Գնաց տուն") == "Գնաց տուն։"
    assert reinsert_colons("Ինչպե՞ս") == "Ինչպե՞ս"
    assert reinsert_colons("Ինչ է?") == "Ինչ է?"
    assert reinsert_colons("") == ""


def test_colon_round_trip_on_generated_sentences():
    rng = np.random.default_rng(17)
    for _ in range(100):
        t = normalize_text(" ".join(make_sentence(rng, int(rng.integers(2, 15)))))
        assert t.endswith("։")
        stripped, pos = strip_colons(t)
        assert "։" not in stripped
        assert reinsert_colons(stripped) == t
        assert restore_colons(stripped, pos) == t


def test_restore_is_exact_with_inner_colons():
    t = "Ա։ Բ։ Գ"
    s, pos = strip_colons(t)
    assert restore_colons(s, pos) == t


def test_expressiveness_examples():
    assert expressiveness_filter("Դորի, Նորի, Օրի")
    assert not expressiveness_filter("Նուորրի՛, նորի, օրի՛")
    assert expressiveness_filter("ա՛")
    assert count_expressive("ա՜ բ՛ գ") == 2


@given(st.text(alphabet=st.sampled_from(ARM[:5] + [" ", "՛", "՜"]), max_size=20), st.integers(0, 3))
def test_expressiveness_monotone(text, extra):
    if not expressiveness_filter(text):
        assert not expressiveness_filter(text + "՛" * extra)
