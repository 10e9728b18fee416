"""Deterministic multi-agent harness: persona policies, regimes, metrics.

Agents are scripted personas taking round-robin turns in one room. Each
turn advances the room clock one tick, shows the agent an observation
(atmosphere window, own resources, open tasks and elections, recent
rejection rate) and submits whatever action its policy draws. Policies
compose three terms: a persona disposition (sentiment bias, speak
probability), a resource term (budget modulates speaking, tokens gate
voting), and a field term (the current window pulls the sentiment
target, and recent rejections push it down - throttled rooms grow
frustrated).

Regimes map to allocators: high_control runs the banned-token rule,
low_control runs the pass-through, heuristic and learned run the
corresponding allocator. Reports carry proxy metrics: mean message
atmosphere, participation Gini, mute-event rate (rejections per
submitted action), interactive freedom (acceptance rate) and task
counts.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Action, ActionKind, MemberId, ResourceStructure, resource_structure
from .engine import EngineConfig, Room, TaskRecord, action_cost
from .errors import ConfigInvalid
from .matrix import (
    FEATURE_DIM,
    HeuristicConfig,
    HeuristicMatrix,
    LearnedMatrix,
    Matrix,
    NoOpMatrix,
    RuleConfig,
    RuleMatrix,
    allocate,
)
from .sentiment import LexiconScorer, atmosphere_value
from .training import LabeledSample


class Persona(str, Enum):
    COOPERATIVE = "cooperative"
    ANTAGONIST = "antagonist"
    LURKER = "lurker"
    TASK_FOCUSED = "task_focused"


_PERSONA_ORDER = [Persona.COOPERATIVE, Persona.ANTAGONIST, Persona.LURKER, Persona.TASK_FOCUSED]
_PERSONA_PREFIX = {
    Persona.COOPERATIVE: "coop",
    Persona.ANTAGONIST: "antag",
    Persona.LURKER: "lurker",
    Persona.TASK_FOCUSED: "tasker",
}


@dataclass
class AgentPolicy:
    """A persona's dispositions plus its phrase inventory."""

    persona: Persona
    speak_probability: float = 0.5
    sentiment_bias: float = 0.0
    atmosphere_pull: float = 0.2
    control_aversion: float = 1.0
    task_probability: float = 0.0
    vote_probability: float = 0.0
    budget_aware: bool = False
    templates: List[Tuple[str, float]] = field(default_factory=list)
    task_templates: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, p in (
            ("speak_probability", self.speak_probability),
            ("task_probability", self.task_probability),
            ("vote_probability", self.vote_probability),
        ):
            if not 0.0 <= p <= 1.0:
                raise ConfigInvalid(f"{name} {p} outside [0, 1]")
        if not -1.0 <= self.sentiment_bias <= 1.0:
            raise ConfigInvalid(f"sentiment_bias {self.sentiment_bias} outside [-1, 1]")


@dataclass
class Observation:
    """What one agent sees before acting."""

    self_id: MemberId
    atmosphere: List[float]
    resources: ResourceStructure
    vote_tokens: int
    open_tasks: List[TaskRecord]
    election_open: bool
    recent_mute_rate: float
    budget_cap: float


DEFAULT_POLICY_FIELDS: Dict[Persona, Dict] = {
    Persona.COOPERATIVE: dict(
        speak_probability=0.6, sentiment_bias=0.35, atmosphere_pull=0.3,
        control_aversion=1.5, vote_probability=0.5,
    ),
    Persona.ANTAGONIST: dict(
        speak_probability=0.9, sentiment_bias=-0.85, atmosphere_pull=0.1,
        control_aversion=1.0,
    ),
    Persona.LURKER: dict(
        speak_probability=0.0, sentiment_bias=0.0, atmosphere_pull=0.2,
    ),
    Persona.TASK_FOCUSED: dict(
        speak_probability=0.5, sentiment_bias=0.2, atmosphere_pull=0.2,
        task_probability=0.25, vote_probability=0.7,
    ),
}


def _load_template_file(name: str) -> List[str]:
    text = resources.files("agora.data.templates").joinpath(name).read_text("utf-8")
    lines = [line.strip() for line in text.splitlines()]
    return [line for line in lines if line and not line.startswith("#")]


def load_templates(persona: Persona) -> List[Tuple[str, float]]:
    """Fixture phrases with their lexicon-scored atmosphere polarity."""
    scorer = LexiconScorer()
    out = []
    for line in _load_template_file(f"{persona.value}.txt"):
        out.append((line, atmosphere_value(scorer.score(line))))
    return out


def load_task_templates() -> List[str]:
    return _load_template_file("tasks.txt")


def make_policy(persona: Persona, overrides: Optional[Dict] = None) -> AgentPolicy:
    fields = dict(DEFAULT_POLICY_FIELDS[persona])
    fields.update(overrides or {})
    policy = AgentPolicy(persona=persona, **fields)
    policy.templates = load_templates(persona)
    if policy.task_probability > 0:
        policy.task_templates = load_task_templates()
    return policy


def agent_step(
    policy: AgentPolicy, obs: Observation, rng: np.random.Generator
) -> Optional[Action]:
    """Draw at most one action for this turn; None means stay silent."""
    # voting: join or open an election for the oldest open task's issuer
    if (
        policy.vote_probability > 0.0
        and obs.vote_tokens >= 1
        and obs.open_tasks
        and rng.random() < policy.vote_probability
    ):
        return Action(ActionKind.VOTE, obs.self_id, candidate=obs.open_tasks[0].issuer)

    # task issuing, only while nothing is pending
    if (
        policy.task_probability > 0.0
        and not obs.open_tasks
        and (not policy.budget_aware or obs.resources.count >= action_cost(ActionKind.ISSUE_TASK))
        and rng.random() < policy.task_probability
    ):
        description = policy.task_templates[rng.integers(len(policy.task_templates))]
        return Action(ActionKind.ISSUE_TASK, obs.self_id, description=description)

    # speaking: probability scales with remaining budget (resource term)
    if policy.speak_probability <= 0.0 or not policy.templates:
        return None
    budget_factor = 0.5 + 0.5 * min(obs.resources.count / obs.budget_cap, 1.0)
    if policy.budget_aware and obs.resources.count < action_cost(ActionKind.SPEAK):
        return None
    if rng.random() >= policy.speak_probability * budget_factor:
        return None
    window_mean = sum(obs.atmosphere) / len(obs.atmosphere)
    target = (
        policy.sentiment_bias
        + policy.atmosphere_pull * window_mean
        - policy.control_aversion * obs.recent_mute_rate
    )
    target = min(max(target, -1.0), 1.0)
    best_text, best_score = None, None
    for text, polarity in policy.templates:
        score = abs(polarity - target) + 0.2 * rng.random()
        if best_score is None or score < best_score:
            best_text, best_score = text, score
    return Action(ActionKind.SPEAK, obs.self_id, text=best_text)


class Regime(str, Enum):
    HIGH_CONTROL = "high_control"
    LOW_CONTROL = "low_control"
    HEURISTIC = "heuristic"
    LEARNED = "learned"


@dataclass
class ScenarioConfig:
    name: str
    regime: Regime
    roster: Dict[Persona, int]
    ticks: int
    seed: int = 0
    topic: str = ""
    engine: Dict = field(default_factory=dict)
    rule: Dict = field(default_factory=dict)
    heuristic: Dict = field(default_factory=dict)
    weights_path: Optional[str] = None
    policies: Dict[Persona, Dict] = field(default_factory=dict)
    mute_rate_window: int = 40

    def __post_init__(self) -> None:
        self.regime = Regime(self.regime)
        self.roster = {Persona(k): int(v) for k, v in self.roster.items()}
        self.policies = {Persona(k): dict(v) for k, v in self.policies.items()}
        if any(v < 0 for v in self.roster.values()):
            raise ConfigInvalid("roster counts must be >= 0")
        if sum(self.roster.values()) < 2:
            raise ConfigInvalid("a scenario needs at least 2 agents")
        if self.ticks < 1:
            raise ConfigInvalid("ticks must be >= 1")
        if self.mute_rate_window < 1:
            raise ConfigInvalid("mute_rate_window must be >= 1")

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "regime": self.regime.value,
            "roster": {p.value: n for p, n in self.roster.items()},
            "ticks": self.ticks,
            "seed": self.seed,
            "topic": self.topic,
            "engine": dict(self.engine),
            "rule": dict(self.rule),
            "heuristic": dict(self.heuristic),
            "weights_path": self.weights_path,
            "policies": {p.value: dict(v) for p, v in self.policies.items()},
            "mute_rate_window": self.mute_rate_window,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ScenarioConfig":
        known = {
            "name", "regime", "roster", "ticks", "seed", "topic", "engine",
            "rule", "heuristic", "weights_path", "policies", "mute_rate_window",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"scenario file {path!r} is not valid JSON: {exc}") from None
        return cls.from_dict(data)


def load_scenario(spec: str) -> ScenarioConfig:
    """Resolve a scenario by file path or by shipped scenario name."""
    if os.path.exists(spec):
        return ScenarioConfig.from_file(spec)
    try:
        res = resources.files("agora.data.scenarios").joinpath(f"{spec}.json")
        text = res.read_text("utf-8")
    except (FileNotFoundError, ModuleNotFoundError):
        raise ConfigInvalid(f"no scenario file or shipped scenario named {spec!r}") from None
    return ScenarioConfig.from_dict(json.loads(text))


def shipped_scenarios() -> List[str]:
    names = []
    for entry in resources.files("agora.data.scenarios").iterdir():
        if entry.name.endswith(".json"):
            names.append(entry.name[: -len(".json")])
    return sorted(names)


@dataclass
class SimulationReport:
    scenario: str
    regime: str
    seed: int
    ticks: int
    mean_atmosphere: float
    participation_gini: float
    mute_event_rate: float
    interactive_freedom: float
    submitted: int
    accepted: int
    rejected: int
    messages: int
    tasks_issued: int
    tasks_completed: int
    participation: Dict[MemberId, int]
    trajectory: List[float]

    def to_dict(self) -> Dict:
        return {
            "scenario": self.scenario,
            "regime": self.regime,
            "seed": self.seed,
            "ticks": self.ticks,
            "mean_atmosphere": self.mean_atmosphere,
            "participation_gini": self.participation_gini,
            "mute_event_rate": self.mute_event_rate,
            "interactive_freedom": self.interactive_freedom,
            "submitted": self.submitted,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "messages": self.messages,
            "tasks_issued": self.tasks_issued,
            "tasks_completed": self.tasks_completed,
            "participation": dict(sorted(self.participation.items())),
            "trajectory": self.trajectory,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def gini(counts: Sequence[float]) -> float:
    """Gini coefficient of a nonnegative count distribution; 0 when the
    total is 0."""
    if len(counts) < 1:
        raise ConfigInvalid("gini needs at least one member")
    if any(c < 0 for c in counts):
        raise ConfigInvalid("gini counts must be nonnegative")
    n = len(counts)
    total = float(sum(counts))
    if total == 0.0:
        return 0.0
    ordered = sorted(counts)
    weighted = sum((i + 1) * c for i, c in enumerate(ordered))
    return (2.0 * weighted) / (n * total) - (n + 1) / n


def _engine_config(cfg: ScenarioConfig) -> EngineConfig:
    return EngineConfig(**cfg.engine)


def _matrix_for(cfg: ScenarioConfig) -> Matrix:
    if cfg.regime is Regime.HIGH_CONTROL:
        return RuleMatrix(
            RuleConfig(
                banned_tokens=frozenset(cfg.rule.get("banned_tokens", ())),
                mute_duration_ticks=int(cfg.rule.get("mute_duration_ticks", 40)),
            )
        )
    if cfg.regime is Regime.LOW_CONTROL:
        return NoOpMatrix()
    if cfg.regime is Regime.HEURISTIC:
        return HeuristicMatrix(
            HeuristicConfig(
                atmosphere_gain=float(cfg.heuristic.get("atmosphere_gain", 1.0)),
                equalize_gain=float(cfg.heuristic.get("equalize_gain", 2.0)),
                target_share=cfg.heuristic.get("target_share"),
            )
        )
    if cfg.regime is Regime.LEARNED:
        if cfg.weights_path is None:
            raise ConfigInvalid("learned regime needs weights_path")
        return LearnedMatrix(weights_path=cfg.weights_path)
    raise ConfigInvalid(f"unhandled regime {cfg.regime}")


def build_agents(cfg: ScenarioConfig) -> List[Tuple[MemberId, AgentPolicy]]:
    agents: List[Tuple[MemberId, AgentPolicy]] = []
    for persona in _PERSONA_ORDER:
        count = cfg.roster.get(persona, 0)
        for i in range(1, count + 1):
            member = f"{_PERSONA_PREFIX[persona]}{i}"
            agents.append((member, make_policy(persona, cfg.policies.get(persona))))
    return agents


def run_scenario(
    cfg: ScenarioConfig,
    *,
    matrix: Optional[Matrix] = None,
    action_tap: Optional[Callable] = None,
) -> SimulationReport:
    """Run one seeded scenario to completion and report its metrics."""
    agents = build_agents(cfg)
    room = Room(
        f"sim-{cfg.name}",
        [member for member, _ in agents],
        topic=cfg.topic,
        config=_engine_config(cfg),
        matrix=matrix if matrix is not None else _matrix_for(cfg),
    )
    room.action_tap = action_tap
    streams = [
        np.random.Generator(np.random.PCG64(child))
        for child in np.random.SeedSequence(cfg.seed).spawn(len(agents))
    ]
    recent = deque(maxlen=cfg.mute_rate_window)
    submitted = accepted = 0
    trajectory: List[float] = []

    for tick in range(cfg.ticks):
        room.advance_time(1)
        idx = tick % len(agents)
        member, policy = agents[idx]
        obs = Observation(
            self_id=member,
            atmosphere=room.field.atmosphere.as_list(),
            resources=resource_structure(room.ledger, member),
            vote_tokens=room.ledger.tokens_of(member),
            open_tasks=room.open_tasks(),
            election_open=room.election is not None,
            recent_mute_rate=(sum(recent) / len(recent)) if recent else 0.0,
            budget_cap=room.config.budget_cap,
        )
        action = agent_step(policy, obs, streams[idx])
        if action is not None:
            outcome = room.submit_action(action)
            submitted += 1
            accepted += 1 if outcome.accepted else 0
            recent.append(0 if outcome.accepted else 1)
        trajectory.append(room.field.atmosphere.mean())

    visible = room.field.visible_messages()
    participation = {member: 0 for member, _ in agents}
    for message in visible:
        participation[message.author] += 1
    rejected = submitted - accepted
    return SimulationReport(
        scenario=cfg.name,
        regime=cfg.regime.value,
        seed=cfg.seed,
        ticks=cfg.ticks,
        mean_atmosphere=(
            sum(m.atmosphere_value for m in visible) / len(visible) if visible else 0.0
        ),
        participation_gini=gini(list(participation.values())),
        mute_event_rate=(rejected / submitted) if submitted else 0.0,
        interactive_freedom=(accepted / submitted) if submitted else 1.0,
        submitted=submitted,
        accepted=accepted,
        rejected=rejected,
        messages=len(visible),
        tasks_issued=len(room.tasks),
        tasks_completed=sum(1 for t in room.tasks if t.status.value == "completed"),
        participation=participation,
        trajectory=trajectory,
    )


def generate_dataset(
    cfg: ScenarioConfig,
    oracle: Matrix,
    n: int,
    seq_len: int = 16,
) -> List[LabeledSample]:
    """Label each accepted action's feature sequence with the oracle's
    budget decision, running extra seeds of the scenario until n samples
    exist."""
    if n < 1:
        raise ConfigInvalid("dataset size must be >= 1")
    engine_cfg = _engine_config(cfg)
    if isinstance(oracle, HeuristicMatrix) and oracle.cfg.target_share is None:
        oracle.cfg.target_share = 1.0 / sum(cfg.roster.values())
    samples: List[LabeledSample] = []

    def tap(action, features, history, rs, decision) -> None:
        if len(samples) >= n:
            return
        rows = list(history[-(seq_len - 1):]) if seq_len > 1 else []
        rows.append(features)
        seq = np.zeros((seq_len, FEATURE_DIM), dtype=np.float64)
        seq[seq_len - len(rows):] = np.stack(rows)
        label = allocate(
            oracle, features, history, action, rs, budget_cap=engine_cfg.budget_cap
        ).new_budget
        samples.append(LabeledSample(features=seq, label=float(label)))

    produced_any = False
    for extra in range(200):
        before = len(samples)
        run_scenario(replace(cfg, seed=cfg.seed + extra), action_tap=tap)
        produced_any = produced_any or len(samples) > before
        if len(samples) >= n:
            return samples[:n]
        if extra >= 1 and not produced_any:
            break
    raise ConfigInvalid(
        f"scenario {cfg.name!r} produced {len(samples)} samples, needed {n}"
    )
