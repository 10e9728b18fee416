"""Sentiment scoring, atmosphere math, and lexicon loading."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from agora.core import AtmosphereWindow
from agora.errors import ConfigInvalid, OutOfRange
from agora.sentiment import (
    ConstantScorer,
    Lexicon,
    LexiconScorer,
    SentimentScore,
    atmosphere_value,
    atmosphere_vector,
    make_scorer,
    register_external_scorer,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestAtmosphereValue:
    def test_extreme_positive(self):
        assert atmosphere_value(SentimentScore(1.0, 0.0, 1.0)) == 1.0

    def test_symmetry_cancels_exactly(self):
        for x in (0.0, 0.25, 0.5, 1.0):
            assert atmosphere_value(SentimentScore(x, x, 0.7)) == 0.0

    def test_hand_case(self):
        # (0.8 - 0.1) * 0.5
        assert atmosphere_value(SentimentScore(0.8, 0.1, 0.5)) == pytest.approx(
            0.35, abs=1e-12
        )

    def test_rejects_out_of_range_components(self):
        for bad in (
            SentimentScore(1.2, 0.0, 1.0),
            SentimentScore(0.0, -0.1, 1.0),
            SentimentScore(0.0, 0.0, 2.0),
        ):
            with pytest.raises(OutOfRange):
                atmosphere_value(bad)

    @given(unit, unit, unit)
    def test_bounded_for_all_valid_scores(self, p, n, c):
        assert -1.0 <= atmosphere_value(SentimentScore(p, n, c)) <= 1.0

    @given(unit, unit, st.floats(min_value=0.01, max_value=1.0))
    def test_nondecreasing_in_positive(self, p, n, c):
        lower = atmosphere_value(SentimentScore(min(p, n), n, c))
        higher = atmosphere_value(SentimentScore(max(p, n), n, c))
        assert higher >= lower


class TestAtmosphereVector:
    def test_fresh_window_is_ten_zeros(self):
        assert atmosphere_vector(AtmosphereWindow()) == [0.0] * 10

    def test_three_messages_right_aligned_oldest_first(self):
        w = AtmosphereWindow()
        for v in (0.2, -0.1, 0.5):
            w.push(v)
        assert atmosphere_vector(w) == [0, 0, 0, 0, 0, 0, 0, 0.2, -0.1, 0.5]

    def test_eleventh_value_evicts_first(self):
        w = AtmosphereWindow()
        for i in range(10):
            w.push(i / 10.0)
        w.push(-1.0)
        vec = atmosphere_vector(w)
        assert len(vec) == 10
        assert vec[0] == 0.1  # the 0.0 first entry fell off
        assert vec[-1] == -1.0

    def test_returns_copy_not_view(self):
        w = AtmosphereWindow()
        vec = atmosphere_vector(w)
        vec[0] = 99.0
        assert atmosphere_vector(w)[0] == 0.0


class TestLexicon:
    def test_parses_tab_separated_lines(self):
        lex = Lexicon.from_lines(["# comment", "", "good\t1", "bad\t-1"])
        assert lex.polarity("good") == 1
        assert lex.polarity("bad") == -1
        assert lex.polarity("unknown") == 0

    def test_rejects_duplicates_and_bad_polarity(self):
        with pytest.raises(ConfigInvalid):
            Lexicon.from_lines(["good\t1", "good\t-1"])
        with pytest.raises(ConfigInvalid):
            Lexicon.from_lines(["good\t2"])
        with pytest.raises(ConfigInvalid):
            Lexicon.from_lines(["good\tx"])
        with pytest.raises(ConfigInvalid):
            Lexicon.from_lines(["good 1"])

    def test_shipped_lexicon_is_large_and_disjoint(self):
        lex = Lexicon.default()
        pos = {t for t, p in lex.polarities.items() if p == 1}
        neg = {t for t, p in lex.polarities.items() if p == -1}
        assert len(pos) >= 200 and len(neg) >= 200
        assert not pos & neg


class TestLexiconScorer:
    def test_counts_over_token_total(self):
        lex = Lexicon.from_lines(["great\t1", "awful\t-1"])
        score = LexiconScorer(lex).score("great great awful day")
        # 4 tokens: P=2/4, N=1/4, C=3/4
        assert score == SentimentScore(0.5, 0.25, 0.75)

    def test_empty_text_scores_zero(self):
        assert LexiconScorer().score("") == SentimentScore(0.0, 0.0, 0.0)

    def test_no_hits_means_zero_confidence(self):
        lex = Lexicon.from_lines(["great\t1"])
        assert LexiconScorer(lex).score("the sky is blue") == SentimentScore(0, 0, 0)

    def test_positive_plus_negative_never_exceeds_one(self):
        scorer = LexiconScorer()
        for text in ("happy sad happy sad", "wonderful terrible", "x y z"):
            s = scorer.score(text)
            assert s.positive + s.negative <= 1.0 + 1e-12


class TestScorerSelection:
    def test_constant_scorer(self):
        s = ConstantScorer(positive=0.9, negative=0.1, confidence=0.5)
        assert atmosphere_value(s.score("anything")) == pytest.approx(0.4)

    def test_make_scorer_kinds(self):
        assert isinstance(make_scorer("lexicon"), LexiconScorer)
        assert isinstance(make_scorer("constant", positive=1.0), ConstantScorer)
        with pytest.raises(ConfigInvalid):
            make_scorer("neural")

    def test_external_scorer_roundtrip(self):
        register_external_scorer(lambda text: SentimentScore(1.0, 0.0, 1.0))
        try:
            assert make_scorer("external").score("x") == SentimentScore(1.0, 0.0, 1.0)
        finally:
            register_external_scorer(None)

    def test_engine_depends_only_on_score_triple(self, room):
        from agora.core import Action, ActionKind

        room.scorer = ConstantScorer(positive=1.0, negative=0.0, confidence=1.0)
        room.submit_action(Action(kind=ActionKind.SPEAK, actor="ann", text="zxqj"))
        assert room.field.atmosphere.as_list()[-1] == 1.0
