"""Per-room interaction loop: enforce budgets, apply actions, reallocate.

Each accepted action runs one fixed pipeline: validate against the
actor's budget, apply the effect, vectorize (action embedding, resource
structure, atmosphere window as it stood before the action), hand the
features to the allocator, install the returned budget, then deduct the
action cost. Rejected actions mutate nothing.

Logical time is decoupled from submission: callers move the clock with
``advance_time`` (the convention is one tick per submitted action),
which applies budget refill and resolves due elections. Because refill
happens exactly when the clock moves, a submission never observes
pending refill, and rejection atomicity is structural.

An allocator decision that cuts a positive budget to zero is treated as
a mute: the member's refill is suspended for the decision's
``mute_ticks`` (or a configured default when the allocator does not
say), so the member stays silenced instead of being refilled back into
the conversation on the next tick.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .core import (
    Action,
    ActionKind,
    AtmosphereWindow,
    Field,
    MemberId,
    Message,
    ResourceLedger,
    resource_structure,
    validate_member_id,
)
from .errors import ConfigInvalid, NoOpenElection
from .matrix import HeuristicMatrix, Matrix, MatrixDecision, NoOpMatrix, allocate, assemble_features
from .sentiment import LexiconScorer, Scorer, atmosphere_value
from .vectorizer import CorpusStats, action_vector

_BUDGET_COSTS = {
    ActionKind.SPEAK: 1.0,
    ActionKind.WITHDRAW: 1.0,
    ActionKind.ISSUE_TASK: 2.0,
    ActionKind.VOTE: 0.0,
}
VOTE_TOKEN_COST = 1


def action_cost(kind: ActionKind) -> float:
    """Budget cost of an action kind; voting costs a vote token instead."""
    return _BUDGET_COSTS[kind]


class OutcomeReason(str, Enum):
    OK = "ok"
    BUDGET_EXHAUSTED = "budget_exhausted"
    UNKNOWN_MEMBER = "unknown_member"
    INVALID_TARGET = "invalid_target"


@dataclass
class ActionOutcome:
    accepted: bool
    reason: OutcomeReason
    message_id: Optional[str] = None
    decision: Optional[MatrixDecision] = None
    logical_time: Optional[int] = None


class TaskStatus(str, Enum):
    OPEN = "open"
    COMPLETED = "completed"


@dataclass
class TaskRecord:
    task_id: str
    description: str
    issuer: MemberId
    status: TaskStatus = TaskStatus.OPEN


@dataclass
class Election:
    deadline: int
    tallies: Dict[MemberId, int] = dataclass_field(default_factory=dict)
    ballots: Dict[MemberId, int] = dataclass_field(default_factory=dict)


@dataclass
class RoomEvent:
    """State change surfaced to observers (election results, task updates)."""

    kind: str
    payload: Dict


@dataclass
class EngineConfig:
    budget_cap: float = 5.0
    refill_per_minute: float = 5.0
    ticks_per_minute: int = 10
    initial_vote_tokens: int = 1
    election_duration_ticks: int = 30
    history_len: int = 16
    zero_cut_mute_ticks: int = 12
    max_members: int = 64

    def __post_init__(self) -> None:
        if self.budget_cap <= 0 or self.refill_per_minute < 0:
            raise ConfigInvalid("budget_cap must be > 0 and refill_per_minute >= 0")
        if self.ticks_per_minute <= 0:
            raise ConfigInvalid("ticks_per_minute must be > 0")
        if self.initial_vote_tokens < 0 or self.zero_cut_mute_ticks < 0:
            raise ConfigInvalid("token and mute settings must be >= 0")
        if self.election_duration_ticks < 1 or self.history_len < 1 or self.max_members < 1:
            raise ConfigInvalid("election duration, history length and room size must be >= 1")

    def to_dict(self) -> Dict:
        return {
            "budget_cap": self.budget_cap,
            "refill_per_minute": self.refill_per_minute,
            "ticks_per_minute": self.ticks_per_minute,
            "initial_vote_tokens": self.initial_vote_tokens,
            "election_duration_ticks": self.election_duration_ticks,
            "history_len": self.history_len,
            "zero_cut_mute_ticks": self.zero_cut_mute_ticks,
            "max_members": self.max_members,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EngineConfig":
        return cls(**data)


class Room:
    """One chat room: members, transcript, atmosphere, allocator, clock.

    All mutation must go through ``submit_action`` and ``advance_time``;
    callers serialize access per room (the service routes everything
    through one queue).
    """

    def __init__(
        self,
        room_id: str,
        members: Sequence[MemberId] = (),
        *,
        topic: str = "",
        config: Optional[EngineConfig] = None,
        matrix: Optional[Matrix] = None,
        scorer: Optional[Scorer] = None,
    ):
        self.config = config if config is not None else EngineConfig()
        self.matrix = matrix if matrix is not None else NoOpMatrix()
        self.scorer = scorer if scorer is not None else LexiconScorer()
        self.field = Field(room_id=room_id, topic=topic)
        self.ledger = ResourceLedger(
            budget_cap=self.config.budget_cap, refill_rate=self.config.refill_per_minute
        )
        self.corpus = CorpusStats()
        self.clock = 0
        self.muted_until: Dict[MemberId, int] = {}
        self.election: Optional[Election] = None
        self.admin: Optional[MemberId] = None
        self.tasks: List[TaskRecord] = []
        self.feature_history: List[np.ndarray] = []
        self.action_tap: Optional[Callable] = None
        self._last_logical_time = 0
        self._message_seq = 0
        self._task_seq = 0
        for member in members:
            self.add_member(member)

    @property
    def room_id(self) -> str:
        return self.field.room_id

    @property
    def topic(self) -> str:
        return self.field.topic

    # -- membership -----------------------------------------------------

    def add_member(self, member_id: MemberId) -> None:
        validate_member_id(member_id)
        if member_id in self.field.tribe:
            raise ConfigInvalid(f"member {member_id!r} already in room")
        if len(self.field.tribe) >= self.config.max_members:
            raise ConfigInvalid(f"room {self.field.room_id!r} is full")
        self.field.tribe.add(member_id)
        self.ledger.add_member(member_id, vote_tokens=self.config.initial_vote_tokens)
        self._resolve_auto_share()

    def _resolve_auto_share(self) -> None:
        # a heuristic allocator with unset target share tracks 1 / roster size
        if isinstance(self.matrix, HeuristicMatrix) and self.field.tribe:
            if getattr(self.matrix, "_auto_share", self.matrix.cfg.target_share is None):
                self.matrix._auto_share = True
                self.matrix.cfg.target_share = 1.0 / len(self.field.tribe)

    # -- time -----------------------------------------------------------

    def advance_time(self, ticks: int = 1) -> List[RoomEvent]:
        """Move the logical clock, refill budgets, resolve due elections."""
        if ticks < 0:
            raise ConfigInvalid("cannot advance time backwards")
        old, new = self.clock, self.clock + ticks
        per_tick = self.config.refill_per_minute / self.config.ticks_per_minute
        for member in self.ledger.members:
            start = max(old, self.muted_until.get(member, old))
            span = new - start
            if span > 0:
                current = self.ledger.budget_of(member)
                self.ledger.set_budget(member, current + per_tick * span)
        self.clock = new
        events: List[RoomEvent] = []
        if self.election is not None and self.clock >= self.election.deadline:
            events.extend(self._resolve_election())
        return events

    # -- elections and tasks ---------------------------------------------

    def tally_votes(self) -> Optional[MemberId]:
        """Close the open election now and return the winner, if any."""
        if self.election is None:
            raise NoOpenElection(f"no open election in room {self.field.room_id!r}")
        events = self._resolve_election()
        return events[0].payload["winner"]

    def _resolve_election(self) -> List[RoomEvent]:
        election = self.election
        self.election = None
        total = sum(election.tallies.values())
        winner: Optional[MemberId] = None
        if total > 0:
            top = max(election.tallies.values())
            leaders = [c for c, v in sorted(election.tallies.items()) if v == top]
            if len(leaders) == 1 and 2 * top > total:
                winner = leaders[0]
        events: List[RoomEvent] = []
        if winner is not None:
            self.admin = winner
            # winner's spent token comes back, plus a two-token bonus
            self.ledger.add_tokens(winner, VOTE_TOKEN_COST + 2)
            completed = self._complete_oldest_task()
            if completed is not None:
                events.append(
                    RoomEvent(
                        "task_update",
                        {
                            "task_id": completed.task_id,
                            "status": completed.status.value,
                            "description": completed.description,
                            "issuer": completed.issuer,
                        },
                    )
                )
        else:
            for voter, spent in election.ballots.items():
                self.ledger.add_tokens(voter, spent)
        events.insert(
            0,
            RoomEvent(
                "election_result",
                {
                    "winner": winner,
                    "tallies": dict(sorted(election.tallies.items())),
                    "admin": self.admin,
                },
            ),
        )
        return events

    def _complete_oldest_task(self) -> Optional[TaskRecord]:
        # a resolved election with a winner closes the oldest open task
        for task in self.tasks:
            if task.status is TaskStatus.OPEN:
                task.status = TaskStatus.COMPLETED
                return task
        return None

    def open_tasks(self) -> List[TaskRecord]:
        return [t for t in self.tasks if t.status is TaskStatus.OPEN]

    # -- the action loop --------------------------------------------------

    def submit_action(self, action: Action) -> ActionOutcome:
        actor = action.actor
        if actor not in self.field.tribe:
            return ActionOutcome(False, OutcomeReason.UNKNOWN_MEMBER)

        kind = action.kind
        cost = action_cost(kind)
        # validation phase: nothing mutates until every check passes
        if kind is ActionKind.VOTE:
            if self.ledger.tokens_of(actor) < VOTE_TOKEN_COST:
                return ActionOutcome(False, OutcomeReason.BUDGET_EXHAUSTED)
            if action.candidate not in self.field.tribe:
                return ActionOutcome(False, OutcomeReason.INVALID_TARGET)
        elif self.ledger.budget_of(actor) < cost:
            return ActionOutcome(False, OutcomeReason.BUDGET_EXHAUSTED)
        target_message: Optional[Message] = None
        if kind is ActionKind.WITHDRAW:
            target_message = self._find_message(action.message_id)
            if (
                target_message is None
                or target_message.author != actor
                or target_message.withdrawn
            ):
                return ActionOutcome(False, OutcomeReason.INVALID_TARGET)

        atmosphere_before = self.field.atmosphere.as_list()
        logical_time = max(self.clock, self._last_logical_time + 1)
        message_id: Optional[str] = None

        # effect phase
        if kind is ActionKind.SPEAK:
            score = self.scorer.score(action.text)
            self._message_seq += 1
            message_id = f"m{self._message_seq}"
            message = Message(
                id=message_id,
                author=actor,
                text=action.text,
                logical_time=logical_time,
                atmosphere_value=atmosphere_value(score),
            )
            self.field.transcript.append(message)
            self.field.atmosphere.push(message.atmosphere_value)
        elif kind is ActionKind.WITHDRAW:
            target_message.withdrawn = True
            self.field.rebuild_atmosphere()
        elif kind is ActionKind.VOTE:
            if self.election is None:
                self.election = Election(deadline=self.clock + self.config.election_duration_ticks)
            self.election.tallies[action.candidate] = self.election.tallies.get(action.candidate, 0) + 1
            self.election.ballots[actor] = self.election.ballots.get(actor, 0) + VOTE_TOKEN_COST
            self.ledger.add_tokens(actor, -VOTE_TOKEN_COST)
        elif kind is ActionKind.ISSUE_TASK:
            self._task_seq += 1
            self.tasks.append(
                TaskRecord(task_id=f"t{self._task_seq}", description=action.description, issuer=actor)
            )

        # vectorize: the atmosphere block reflects the window before this action
        text = action.text if kind is ActionKind.SPEAK else ""
        if kind is ActionKind.ISSUE_TASK:
            text = action.description
        vec = action_vector(self.corpus, text, update=kind is ActionKind.SPEAK)
        rs = resource_structure(self.ledger, actor)
        features = assemble_features(vec, rs, atmosphere_before)
        history = list(self.feature_history)

        decision = allocate(
            self.matrix, features, history, action, rs, budget_cap=self.config.budget_cap
        )
        if self.action_tap is not None:
            self.action_tap(action, features, history, rs, decision)

        pre_budget = rs.count
        new_budget = min(max(float(decision.new_budget), 0.0), self.config.budget_cap)
        self.ledger.set_budget(actor, new_budget)
        if decision.mute_ticks > 0 or (new_budget == 0.0 and pre_budget > 0.0):
            duration = decision.mute_ticks if decision.mute_ticks > 0 else self.config.zero_cut_mute_ticks
            self.muted_until[actor] = max(self.muted_until.get(actor, 0), self.clock + duration)
        if cost > 0.0:
            self.ledger.spend_budget(actor, cost)

        self.feature_history.append(features)
        del self.feature_history[: -self.config.history_len]
        self._last_logical_time = logical_time
        action.logical_time = logical_time
        return ActionOutcome(
            True,
            OutcomeReason.OK,
            message_id=message_id,
            decision=decision,
            logical_time=logical_time,
        )

    def _find_message(self, message_id: Optional[str]) -> Optional[Message]:
        if message_id is None:
            return None
        for message in self.field.transcript:
            if message.id == message_id:
                return message
        return None

    # -- snapshots ---------------------------------------------------------

    def state_dict(self) -> Dict:
        """Canonical JSON-ready dynamic state (config lives with the setup)."""
        return {
            "version": 1,
            "room_id": self.field.room_id,
            "topic": self.field.topic,
            "clock": self.clock,
            "last_logical_time": self._last_logical_time,
            "message_seq": self._message_seq,
            "task_seq": self._task_seq,
            "tribe": sorted(self.field.tribe),
            "budgets": {m: self.ledger.budget_of(m) for m in sorted(self.field.tribe)},
            "vote_tokens": {m: self.ledger.tokens_of(m) for m in sorted(self.field.tribe)},
            "transcript": [
                {
                    "id": m.id,
                    "author": m.author,
                    "text": m.text,
                    "logical_time": m.logical_time,
                    "atmosphere_value": m.atmosphere_value,
                    "withdrawn": m.withdrawn,
                }
                for m in self.field.transcript
            ],
            "atmosphere": self.field.atmosphere.as_list(),
            "muted_until": dict(sorted(self.muted_until.items())),
            "election": None
            if self.election is None
            else {
                "deadline": self.election.deadline,
                "tallies": dict(sorted(self.election.tallies.items())),
                "ballots": dict(sorted(self.election.ballots.items())),
            },
            "admin": self.admin,
            "tasks": [
                {
                    "id": t.task_id,
                    "description": t.description,
                    "issuer": t.issuer,
                    "status": t.status.value,
                }
                for t in self.tasks
            ],
            "corpus": self.corpus.to_dict(),
            "feature_history": [row.tolist() for row in self.feature_history],
        }

    def state_hash(self) -> str:
        payload = json.dumps(self.state_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def from_state(
        cls,
        state: Dict,
        *,
        config: Optional[EngineConfig] = None,
        matrix: Optional[Matrix] = None,
        scorer: Optional[Scorer] = None,
    ) -> "Room":
        if state.get("version") != 1:
            raise ConfigInvalid(f"unsupported room state version {state.get('version')!r}")
        room = cls(state["room_id"], topic=state["topic"], config=config, matrix=matrix, scorer=scorer)
        for member in state["tribe"]:
            room.add_member(member)
            room.ledger.set_budget(member, state["budgets"][member])
            row = room.ledger.members[member]
            row.vote_tokens = int(state["vote_tokens"][member])
        room.clock = int(state["clock"])
        room._last_logical_time = int(state["last_logical_time"])
        room._message_seq = int(state["message_seq"])
        room._task_seq = int(state["task_seq"])
        room.field.transcript = [
            Message(
                id=m["id"],
                author=m["author"],
                text=m["text"],
                logical_time=int(m["logical_time"]),
                atmosphere_value=float(m["atmosphere_value"]),
                withdrawn=bool(m["withdrawn"]),
            )
            for m in state["transcript"]
        ]
        room.field.atmosphere = AtmosphereWindow(values=list(state["atmosphere"]))
        room.muted_until = {m: int(t) for m, t in state["muted_until"].items()}
        if state["election"] is not None:
            room.election = Election(
                deadline=int(state["election"]["deadline"]),
                tallies={k: int(v) for k, v in state["election"]["tallies"].items()},
                ballots={k: int(v) for k, v in state["election"]["ballots"].items()},
            )
        room.admin = state["admin"]
        room.tasks = [
            TaskRecord(
                task_id=t["id"],
                description=t["description"],
                issuer=t["issuer"],
                status=TaskStatus(t["status"]),
            )
            for t in state["tasks"]
        ]
        room.corpus = CorpusStats.from_dict(state["corpus"])
        room.feature_history = [np.asarray(row, dtype=np.float64) for row in state["feature_history"]]
        return room
