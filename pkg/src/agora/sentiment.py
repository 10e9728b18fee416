"""Sentiment scoring and atmosphere quantification.

A scorer maps text to (P, N, C): a positive probability, a negative
probability and a confidence, each in [0, 1]. The atmosphere value of a
text is (P - N) * C, in [-1, 1]; below zero reads as a negative
atmosphere. The engine depends only on the score triple, so scorers are
pluggable; the default is a deterministic lexicon counter standing in for
a pretrained sentiment model.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable, Dict, List, Protocol

from .core import AtmosphereWindow
from .errors import ConfigInvalid, OutOfRange
from .vectorizer import tokenize


@dataclass(frozen=True)
class SentimentScore:
    positive: float
    negative: float
    confidence: float

    def validate(self) -> "SentimentScore":
        for name, value in (
            ("positive", self.positive),
            ("negative", self.negative),
            ("confidence", self.confidence),
        ):
            if not 0.0 <= value <= 1.0:
                raise OutOfRange(f"{name} probability {value} outside [0, 1]")
        return self


def atmosphere_value(score: SentimentScore) -> float:
    """(P - N) * C, guaranteed in [-1, 1] for valid scores."""
    score.validate()
    return (score.positive - score.negative) * score.confidence


def atmosphere_vector(window: AtmosphereWindow) -> List[float]:
    """Copy of the 10 stored window values, oldest first."""
    return window.as_list()


class Scorer(Protocol):
    def score(self, text: str) -> SentimentScore: ...


class Lexicon:
    """Token polarity map (-1 or +1), loaded from a word-list file.

    File format: one ``token<TAB>polarity`` per line, ``#`` comments and
    blank lines ignored. Tokens must be lowercase and unique.
    """

    def __init__(self, polarities: Dict[str, int]):
        for token, polarity in polarities.items():
            if token != token.lower():
                raise ConfigInvalid(f"lexicon token {token!r} is not lowercase")
            if polarity not in (-1, 1):
                raise ConfigInvalid(f"lexicon polarity for {token!r} must be -1 or +1")
        self.polarities = dict(polarities)

    @classmethod
    def from_lines(cls, lines) -> "Lexicon":
        polarities: Dict[str, int] = {}
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ConfigInvalid(f"lexicon line {lineno}: expected token<TAB>polarity")
            token, polarity = parts[0], parts[1]
            if token in polarities:
                raise ConfigInvalid(f"lexicon line {lineno}: duplicate token {token!r}")
            try:
                polarities[token] = int(polarity)
            except ValueError:
                raise ConfigInvalid(f"lexicon line {lineno}: polarity {polarity!r} is not an integer") from None
        return cls(polarities)

    @classmethod
    def from_file(cls, path: str) -> "Lexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def default(cls) -> "Lexicon":
        text = resources.files("agora.data").joinpath("lexicon.tsv").read_text("utf-8")
        return cls.from_lines(text.splitlines())

    def polarity(self, token: str) -> int:
        """+1, -1, or 0 for tokens outside the lexicon."""
        return self.polarities.get(token, 0)


class LexiconScorer:
    """Count lexicon hits: P = pos/t, N = neg/t, C = (pos+neg)/t.

    With t the total token count (floored at 1), so P + N <= 1 and the
    confidence equals lexicon coverage. Empty text scores (0, 0, 0).
    """

    def __init__(self, lexicon: Lexicon | None = None):
        self.lexicon = lexicon if lexicon is not None else Lexicon.default()

    def score(self, text: str) -> SentimentScore:
        tokens = tokenize(text)
        pos = sum(1 for t in tokens if self.lexicon.polarity(t) > 0)
        neg = sum(1 for t in tokens if self.lexicon.polarity(t) < 0)
        total = max(len(tokens), 1)
        return SentimentScore(
            positive=pos / total,
            negative=neg / total,
            confidence=(pos + neg) / total,
        )


class ConstantScorer:
    """Returns a fixed score for every text; used to verify that engine
    behavior depends only on the score triple."""

    def __init__(self, positive: float = 0.0, negative: float = 0.0, confidence: float = 0.0):
        self.fixed = SentimentScore(positive, negative, confidence).validate()

    def score(self, text: str) -> SentimentScore:
        return self.fixed


_external_scorer: Callable[[str], SentimentScore] | None = None


def register_external_scorer(fn: Callable[[str], SentimentScore]) -> None:
    global _external_scorer
    _external_scorer = fn


class _ExternalScorer:
    def score(self, text: str) -> SentimentScore:
        if _external_scorer is None:
            raise ConfigInvalid("no external scorer registered")
        return _external_scorer(text).validate()


def make_scorer(kind: str = "lexicon", **options) -> Scorer:
    """Build a scorer from the ``sentiment.scorer`` config key."""
    if kind == "lexicon":
        path = options.get("lexicon_path")
        lexicon = Lexicon.from_file(path) if path else Lexicon.default()
        return LexiconScorer(lexicon)
    if kind == "constant":
        return ConstantScorer(
            positive=options.get("positive", 0.0),
            negative=options.get("negative", 0.0),
            confidence=options.get("confidence", 0.0),
        )
    if kind == "external":
        return _ExternalScorer()
    raise ConfigInvalid(f"unknown scorer kind {kind!r}")
