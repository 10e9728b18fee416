"""Budget allocators: the pluggable policy deciding per-member budgets.

After every accepted action the room hands the allocator a 1036-float
feature vector (action embedding, resource structure, atmosphere window)
plus the recent feature history, and gets back the actor's new budget.
Four variants share the interface: a pass-through, a banned-token rule,
an interpretable heuristic, and a learned sequence model. Allocators are
pure functions of their configuration and inputs; enforcement (clamping,
spending, mute bookkeeping) stays in the engine.

Feature layout, in order:

    [0:1024]    action embedding (TF-IDF weighted word vectors)
    [1024]      actor budget count
    [1025]      actor share of the room's total budget
    [1026:1036] atmosphere window, oldest first
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .core import Action, ActionKind, MemberId, ResourceStructure, ATMOSPHERE_SLOTS
from .errors import ConfigInvalid, DimensionMismatch, WeightsMissing
from .vectorizer import VECTOR_DIM, tokenize

FEATURE_DIM = VECTOR_DIM + 2 + ATMOSPHERE_SLOTS

ACTION_SLICE = slice(0, VECTOR_DIM)
COUNT_INDEX = VECTOR_DIM
PROPORTION_INDEX = VECTOR_DIM + 1
ATMOSPHERE_SLICE = slice(VECTOR_DIM + 2, FEATURE_DIM)


def assemble_features(
    action_vec: np.ndarray,
    rs: ResourceStructure,
    atmosphere: Sequence[float],
) -> np.ndarray:
    """Concatenate the three feature blocks into one 1036-float vector."""
    action_vec = np.asarray(action_vec, dtype=np.float64)
    if action_vec.shape != (VECTOR_DIM,):
        raise DimensionMismatch(f"action vector shape {action_vec.shape}, expected ({VECTOR_DIM},)")
    if len(atmosphere) != ATMOSPHERE_SLOTS:
        raise DimensionMismatch(f"atmosphere window has {len(atmosphere)} slots, expected {ATMOSPHERE_SLOTS}")
    out = np.empty(FEATURE_DIM, dtype=np.float64)
    out[ACTION_SLICE] = action_vec
    out[COUNT_INDEX] = rs.count
    out[PROPORTION_INDEX] = rs.proportion
    out[ATMOSPHERE_SLICE] = np.asarray(atmosphere, dtype=np.float64)
    return out


def _check_features(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (FEATURE_DIM,):
        raise DimensionMismatch(f"feature vector shape {features.shape}, expected ({FEATURE_DIM},)")
    return features


@dataclass
class MatrixDecision:
    """Allocator verdict for one action.

    ``mute_ticks`` > 0 asks the engine to suspend the actor's budget
    refill for that many ticks; 0 leaves refill untouched.
    """

    actor: MemberId
    new_budget: float
    mute_ticks: int = 0


@dataclass
class RuleConfig:
    banned_tokens: frozenset = frozenset()
    mute_duration_ticks: int = 40

    def __post_init__(self) -> None:
        self.banned_tokens = frozenset(str(t).lower() for t in self.banned_tokens)
        if self.mute_duration_ticks < 0:
            raise ConfigInvalid("mute_duration_ticks must be >= 0")


@dataclass
class HeuristicConfig:
    """new = count + atmosphere_gain * atm_mean + equalize_gain * (target_share - share)."""

    atmosphere_gain: float = 1.0
    equalize_gain: float = 2.0
    target_share: Optional[float] = None  # None: the room fills in 1 / roster size

    def __post_init__(self) -> None:
        if self.atmosphere_gain < 0 or self.equalize_gain < 0:
            raise ConfigInvalid("heuristic gains must be >= 0")
        if self.target_share is not None and not 0.0 < self.target_share <= 1.0:
            raise ConfigInvalid("target_share must be in (0, 1]")


def noop_allocate(actor: MemberId, rs: ResourceStructure) -> MatrixDecision:
    """Budget passes through unchanged."""
    return MatrixDecision(actor=actor, new_budget=float(rs.count))


def rule_allocate(cfg: RuleConfig, action: Action, rs: ResourceStructure) -> MatrixDecision:
    """Zero the budget (and mute) when the action text contains a banned token."""
    text = action.text if action.kind is ActionKind.SPEAK else ""
    if action.kind is ActionKind.ISSUE_TASK:
        text = action.description
    hit = any(token in cfg.banned_tokens for token in tokenize(text))
    if hit:
        return MatrixDecision(actor=action.actor, new_budget=0.0, mute_ticks=cfg.mute_duration_ticks)
    return MatrixDecision(actor=action.actor, new_budget=float(rs.count))


def heuristic_allocate(
    cfg: HeuristicConfig,
    rs: ResourceStructure,
    atm_mean: float,
    *,
    actor: MemberId,
    budget_cap: float,
) -> MatrixDecision:
    """Linear budget update from atmosphere and share of voice, clamped to [0, cap]."""
    target = cfg.target_share
    if target is None:
        raise ConfigInvalid("heuristic target_share unresolved; room must set it")
    new = rs.count + cfg.atmosphere_gain * atm_mean + cfg.equalize_gain * (target - rs.proportion)
    new = min(max(new, 0.0), budget_cap)
    return MatrixDecision(actor=actor, new_budget=float(new))


class Matrix:
    """Common allocator interface; ``kind`` keys config and persistence."""

    kind = "base"

    def allocate(
        self,
        features: np.ndarray,
        history: Sequence[np.ndarray],
        action: Action,
        rs: ResourceStructure,
        *,
        budget_cap: float,
    ) -> MatrixDecision:
        raise NotImplementedError

    def describe(self) -> Dict:
        """JSON-serializable spec sufficient to rebuild via make_matrix."""
        return {"kind": self.kind}


class NoOpMatrix(Matrix):
    kind = "noop"

    def allocate(self, features, history, action, rs, *, budget_cap):
        _check_features(features)
        return noop_allocate(action.actor, rs)


class RuleMatrix(Matrix):
    kind = "rule"

    def __init__(self, cfg: Optional[RuleConfig] = None):
        self.cfg = cfg if cfg is not None else RuleConfig()

    def allocate(self, features, history, action, rs, *, budget_cap):
        _check_features(features)
        return rule_allocate(self.cfg, action, rs)

    def describe(self) -> Dict:
        return {
            "kind": self.kind,
            "banned_tokens": sorted(self.cfg.banned_tokens),
            "mute_duration_ticks": self.cfg.mute_duration_ticks,
        }


class HeuristicMatrix(Matrix):
    kind = "heuristic"

    def __init__(self, cfg: Optional[HeuristicConfig] = None):
        self.cfg = cfg if cfg is not None else HeuristicConfig()

    def allocate(self, features, history, action, rs, *, budget_cap):
        features = _check_features(features)
        atm_mean = float(np.mean(features[ATMOSPHERE_SLICE]))
        return heuristic_allocate(self.cfg, rs, atm_mean, actor=action.actor, budget_cap=budget_cap)

    def describe(self) -> Dict:
        # an auto-tracked share is stored as None so a rebuilt room
        # resumes tracking roster size instead of freezing the value
        auto = getattr(self, "_auto_share", False)
        return {
            "kind": self.kind,
            "atmosphere_gain": self.cfg.atmosphere_gain,
            "equalize_gain": self.cfg.equalize_gain,
            "target_share": None if auto else self.cfg.target_share,
        }


class LearnedMatrix(Matrix):
    """Sequence regressor over the last T feature vectors.

    The history plus the current features are front-padded with zero
    vectors to the model's window length; the model's scalar output is
    clamped to [0, budget_cap].
    """

    kind = "learned"

    def __init__(self, weights=None, weights_path: Optional[str] = None):
        if weights is None and weights_path is not None:
            from .model_store import load_weights

            weights = load_weights(weights_path)
        self.weights = weights
        self.weights_path = weights_path

    def allocate(self, features, history, action, rs, *, budget_cap):
        from .transformer import predict

        if self.weights is None:
            raise WeightsMissing("learned allocator has no weights loaded")
        features = _check_features(features)
        seq_len = self.weights.config.seq_len
        rows = [_check_features(h) for h in list(history)[-(seq_len - 1):] if seq_len > 1]
        rows.append(features)
        seq = np.zeros((seq_len, FEATURE_DIM), dtype=np.float64)
        seq[seq_len - len(rows):] = np.stack(rows)
        value = float(predict(self.weights, seq))
        return MatrixDecision(actor=action.actor, new_budget=min(max(value, 0.0), budget_cap))

    def describe(self) -> Dict:
        return {"kind": self.kind, "weights_path": self.weights_path}


def allocate(
    matrix: Matrix,
    features: np.ndarray,
    history: Sequence[np.ndarray],
    action: Action,
    rs: ResourceStructure,
    *,
    budget_cap: float,
) -> MatrixDecision:
    """Dispatch to the variant; equivalent to calling it directly."""
    decision = matrix.allocate(features, history, action, rs, budget_cap=budget_cap)
    if not np.isfinite(decision.new_budget):
        raise ConfigInvalid(f"allocator {matrix.kind} produced non-finite budget")
    return decision


def make_matrix(spec: Dict) -> Matrix:
    """Build an allocator from a config mapping with a ``kind`` key."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "noop":
        return NoOpMatrix()
    if kind == "rule":
        return RuleMatrix(
            RuleConfig(
                banned_tokens=frozenset(spec.get("banned_tokens", ())),
                mute_duration_ticks=int(spec.get("mute_duration_ticks", 40)),
            )
        )
    if kind == "heuristic":
        return HeuristicMatrix(
            HeuristicConfig(
                atmosphere_gain=float(spec.get("atmosphere_gain", 1.0)),
                equalize_gain=float(spec.get("equalize_gain", 2.0)),
                target_share=spec.get("target_share"),
            )
        )
    if kind == "learned":
        return LearnedMatrix(weights_path=spec.get("weights_path"))
    raise ConfigInvalid(f"unknown matrix kind {kind!r}")
