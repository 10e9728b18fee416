"""Domain types shared by every other module.

A room ("field") is a bounded group of members (the tribe) chatting around
a topic. Each member holds consumable speech resources: a message budget
that refills over time and a stock of vote tokens. Every message carries a
sentiment-derived atmosphere value; the room keeps a fixed 10-slot window
of the most recent values as its emotional state.

All types here are value-like. Mutation happens only inside the engine's
per-room serialized loop, so read-only snapshots are safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set

from .errors import OutOfRange, UnknownMember

# Members are identified by opaque nonempty strings, unique within a room.
MemberId = str

ATMOSPHERE_SLOTS = 10


def validate_member_id(member_id: MemberId) -> MemberId:
    if not isinstance(member_id, str) or not member_id:
        raise OutOfRange(f"member id must be a nonempty string, got {member_id!r}")
    return member_id


@dataclass
class AtmosphereWindow:
    """Ring of the 10 most recent message atmosphere values, oldest first.

    Slots are zero-filled until 10 messages exist (a neutral prior), and
    every stored value lies in [-1, 1].
    """

    values: List[float] = field(default_factory=lambda: [0.0] * ATMOSPHERE_SLOTS)

    def __post_init__(self) -> None:
        if len(self.values) != ATMOSPHERE_SLOTS:
            raise OutOfRange(
                f"atmosphere window must hold exactly {ATMOSPHERE_SLOTS} values"
            )
        for v in self.values:
            if not -1.0 <= v <= 1.0:
                raise OutOfRange(f"atmosphere value {v} outside [-1, 1]")

    def push(self, value: float) -> None:
        """Append the newest value, evicting the oldest slot."""
        if not -1.0 <= value <= 1.0:
            raise OutOfRange(f"atmosphere value {value} outside [-1, 1]")
        self.values.append(value)
        del self.values[0]

    def as_list(self) -> List[float]:
        return list(self.values)

    def mean(self) -> float:
        return sum(self.values) / ATMOSPHERE_SLOTS

    def copy(self) -> "AtmosphereWindow":
        return AtmosphereWindow(list(self.values))


class ActionKind(Enum):
    SPEAK = "speak"
    WITHDRAW = "withdraw"
    ISSUE_TASK = "issue_task"
    VOTE = "vote"


@dataclass
class Action:
    """A single member interaction submitted to a room.

    Exactly one payload field is meaningful per kind: ``text`` for SPEAK,
    ``message_id`` for WITHDRAW, ``description`` for ISSUE_TASK and
    ``candidate`` for VOTE. ``logical_time`` is assigned by the engine on
    acceptance and strictly increases per room.
    """

    kind: ActionKind
    actor: MemberId
    text: str = ""
    message_id: Optional[str] = None
    description: str = ""
    candidate: Optional[MemberId] = None
    logical_time: Optional[int] = None


@dataclass
class Message:
    """A transcript entry. Withdrawn messages stay in place as tombstones
    so the transcript remains append-only and auditable; they are excluded
    from atmosphere and participation metrics."""

    id: str
    author: MemberId
    text: str
    logical_time: int
    atmosphere_value: float
    withdrawn: bool = False


@dataclass
class MemberResources:
    """Per-member ledger row: message budget plus vote tokens."""

    budget: float
    vote_tokens: int


@dataclass
class ResourceLedger:
    """Speech resources for every member of one room.

    Budgets are measured in messages permitted in the current window,
    refill continuously at ``refill_rate`` messages per minute and are
    clamped to [0, budget_cap]. Vote tokens are nonnegative integers.
    """

    budget_cap: float = 5.0
    refill_rate: float = 5.0
    members: Dict[MemberId, MemberResources] = field(default_factory=dict)

    def add_member(
        self,
        member_id: MemberId,
        budget: Optional[float] = None,
        vote_tokens: int = 1,
    ) -> None:
        validate_member_id(member_id)
        if member_id in self.members:
            return
        initial = self.budget_cap if budget is None else budget
        self.members[member_id] = MemberResources(
            budget=self._clamp(initial), vote_tokens=max(0, int(vote_tokens))
        )

    def _clamp(self, budget: float) -> float:
        return min(max(budget, 0.0), self.budget_cap)

    def budget_of(self, member_id: MemberId) -> float:
        return self._row(member_id).budget

    def tokens_of(self, member_id: MemberId) -> int:
        return self._row(member_id).vote_tokens

    def set_budget(self, member_id: MemberId, budget: float) -> None:
        self._row(member_id).budget = self._clamp(budget)

    def spend_budget(self, member_id: MemberId, amount: float) -> None:
        row = self._row(member_id)
        row.budget = self._clamp(row.budget - amount)

    def add_tokens(self, member_id: MemberId, count: int) -> None:
        row = self._row(member_id)
        row.vote_tokens = max(0, row.vote_tokens + count)

    def total_budget(self) -> float:
        return sum(row.budget for row in self.members.values())

    def refill(self, elapsed_minutes: float, skip: Set[MemberId] = frozenset()) -> None:
        """Credit every budget with elapsed time at the refill rate.

        ``skip`` suspends refill for muted members; the engine owns that
        bookkeeping.
        """
        if elapsed_minutes < 0:
            raise OutOfRange("elapsed time must be nonnegative")
        gained = self.refill_rate * elapsed_minutes
        if gained == 0:
            return
        for member_id, row in self.members.items():
            if member_id in skip:
                continue
            row.budget = self._clamp(row.budget + gained)

    def _row(self, member_id: MemberId) -> MemberResources:
        try:
            return self.members[member_id]
        except KeyError:
            raise UnknownMember(f"member {member_id!r} not in ledger") from None


@dataclass
class ResourceStructure:
    """The actor's budget and its share of the room total, the two scalar
    resource features fed to allocators."""

    count: float
    proportion: float


def resource_structure(ledger: ResourceLedger, actor: MemberId) -> ResourceStructure:
    """Compute the actor's budget and budget share.

    A zero room total yields proportion 0 rather than dividing by zero.
    Raises UnknownMember for an actor absent from the ledger.
    """
    count = ledger.budget_of(actor)
    total = ledger.total_budget()
    proportion = count / total if total > 0 else 0.0
    return ResourceStructure(count=count, proportion=proportion)


@dataclass
class Field:
    """The interaction environment: a room, its tribe, the current topic,
    the atmosphere window and the append-only transcript."""

    room_id: str
    tribe: Set[MemberId] = field(default_factory=set)
    topic: str = ""
    atmosphere: AtmosphereWindow = field(default_factory=AtmosphereWindow)
    transcript: List[Message] = field(default_factory=list)

    def visible_messages(self) -> List[Message]:
        return [m for m in self.transcript if not m.withdrawn]

    def rebuild_atmosphere(self) -> None:
        """Recompute the window from the 10 most recent non-withdrawn
        messages, used after a withdrawal tombstones a windowed value."""
        recent = [m.atmosphere_value for m in self.visible_messages()[-ATMOSPHERE_SLOTS:]]
        padded = [0.0] * (ATMOSPHERE_SLOTS - len(recent)) + recent
        self.atmosphere = AtmosphereWindow(padded)
