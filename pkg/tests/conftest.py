"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from agora.engine import EngineConfig, Room
from agora.matrix import NoOpMatrix


@pytest.fixture
def room() -> Room:
    """Three-member room, no-op allocator, default engine settings."""
    r = Room("r", topic="tests", config=EngineConfig(), matrix=NoOpMatrix())
    for member in ("ann", "bob", "cid"):
        r.add_member(member)
    return r


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
