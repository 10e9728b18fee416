"""Text vectorization: tokens, streaming TF-IDF stats, action vectors.

Each chat message counts as one TF-IDF document; stats are per-room and
grow online as messages arrive. Word embeddings are pseudo-random Gaussian
unit vectors seeded from a stable hash of the token, so the whole pipeline
is deterministic across runs and platforms with no external model.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List

import numpy as np

from .errors import EmptyToken

VECTOR_DIM = 1024

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> List[str]:
    """Lowercase Unicode-alphanumeric runs; punctuation is discarded."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class CorpusStats:
    """Streaming document counts for TF-IDF weighting."""

    doc_count: int = 0
    doc_frequency: Dict[str, int] = field(default_factory=dict)

    def add_document(self, tokens: List[str]) -> None:
        """Record one document. Token-less documents are not counted."""
        if not tokens:
            return
        self.doc_count += 1
        for token in set(tokens):
            self.doc_frequency[token] = self.doc_frequency.get(token, 0) + 1

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "doc_frequency": dict(sorted(self.doc_frequency.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusStats":
        return cls(
            doc_count=int(data["doc_count"]),
            doc_frequency={str(k): int(v) for k, v in data["doc_frequency"].items()},
        )


def tfidf_weight(stats: CorpusStats, token: str, tf: int, length: int) -> float:
    """(tf/length) * ln(N/df), with unseen tokens treated as df = N.

    Unsmoothed by design: a token present in every document weighs exactly
    zero, and an empty corpus yields zero for everything.
    """
    if length < 1:
        return 0.0
    n = stats.doc_count
    if n == 0:
        return 0.0
    df = stats.doc_frequency.get(token, n)
    return (tf / length) * math.log(n / df)


def _token_seed(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@lru_cache(maxsize=65536)
def word_vector(token: str) -> np.ndarray:
    """Deterministic 1024-dim unit vector for a token.

    Gaussian draws seeded by a 64-bit blake2b hash of the token, then
    normalized. The returned array is cached and read-only.
    """
    if not token:
        raise EmptyToken("cannot embed an empty token")
    rng = np.random.Generator(np.random.PCG64(_token_seed(token)))
    vec = rng.standard_normal(VECTOR_DIM)
    vec /= np.linalg.norm(vec)
    vec.flags.writeable = False
    return vec


def action_vector(stats: CorpusStats, text: str, update: bool = True) -> np.ndarray:
    """TF-IDF-weighted average of the word vectors of ``text``.

    Weights come from the stats as they stood before this text; when
    ``update`` is true the text is then folded in as one new document.
    Returns the zero vector when there are no tokens or every weight is 0.
    """
    tokens = tokenize(text)
    result = np.zeros(VECTOR_DIM)
    if tokens:
        length = len(tokens)
        counts: Dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        total_weight = 0.0
        for token, tf in counts.items():
            w = tfidf_weight(stats, token, tf, length)
            if w > 0.0:
                result += w * word_vector(token)
                total_weight += w
        if total_weight > 0.0:
            result /= total_weight
        else:
            result[:] = 0.0
        if update:
            stats.add_document(tokens)
    return result
