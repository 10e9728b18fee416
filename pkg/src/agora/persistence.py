"""Append-only room log with hash chaining, snapshots and replay.

The log is line-oriented JSON. The first line is a fixed header (its
leading bytes double as the format magic), followed by a ``setup``
record describing how to rebuild the room (engine config, allocator
spec, scorer spec), then a stream of ``snapshot``, ``ticks`` and
``action`` records. Every record after the header carries a sequence
number, the previous record's SHA-256 and its own SHA-256 over the
canonical JSON of the record body, so any in-place edit breaks the
chain and surfaces as ``CorruptLog``. A write that dies mid-line leaves
a trailing fragment that does not parse as JSON; restore drops exactly
that fragment and recovers everything up to the last complete record.

Restoring loads the most recent intact snapshot and replays the records
after it through the real engine; each ``action`` record stores the
post-state hash, so replay divergence is detected, not silently
accepted.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .core import Action, ActionKind
from .engine import ActionOutcome, EngineConfig, MatrixDecision, Room
from .errors import CorruptLog
from .matrix import make_matrix
from .sentiment import make_scorer

LOG_MAGIC = '{"format": "agora-room-log"'
LOG_VERSION = 1

PathLike = Union[str, Path]


def _canonical(record: Dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _record_hash(record: Dict) -> str:
    body = {k: v for k, v in record.items() if k != "hash"}
    return hashlib.sha256(_canonical(body).encode("utf-8")).hexdigest()


def _header_line() -> str:
    return json.dumps(
        {"format": "agora-room-log", "version": LOG_VERSION},
        sort_keys=False,
        separators=(", ", ": "),
    )


def action_to_dict(action: Action) -> Dict:
    return {
        "kind": action.kind.value,
        "actor": action.actor,
        "text": action.text,
        "message_id": action.message_id,
        "description": action.description,
        "candidate": action.candidate,
    }


def action_from_dict(data: Dict) -> Action:
    return Action(
        kind=ActionKind(data["kind"]),
        actor=data["actor"],
        text=data.get("text", ""),
        message_id=data.get("message_id"),
        description=data.get("description", ""),
        candidate=data.get("candidate"),
    )


def outcome_to_dict(outcome: ActionOutcome) -> Dict:
    return {
        "accepted": outcome.accepted,
        "reason": outcome.reason.value,
        "message_id": outcome.message_id,
        "logical_time": outcome.logical_time,
    }


def decision_to_dict(decision: Optional[MatrixDecision]) -> Optional[Dict]:
    if decision is None:
        return None
    return {
        "actor": decision.actor,
        "new_budget": decision.new_budget,
        "mute_ticks": decision.mute_ticks,
    }


def read_records(path: PathLike) -> Tuple[Dict, List[Dict]]:
    """Parse and chain-verify a log; returns (header, records).

    A trailing fragment that does not parse as JSON is treated as a
    torn final write and dropped. Any defect before the final line —
    unparseable record, wrong sequence number, broken hash chain —
    raises ``CorruptLog``.
    """
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptLog(f"{path}: empty log")
    if not lines[0].startswith(LOG_MAGIC):
        raise CorruptLog(f"{path}: missing log magic")
    header = json.loads(lines[0])
    if header.get("version") != LOG_VERSION:
        raise CorruptLog(f"{path}: unsupported log version {header.get('version')!r}")

    records: List[Dict] = []
    prev_hash = hashlib.sha256(lines[0].encode("utf-8")).hexdigest()
    for idx, line in enumerate(lines[1:], start=1):
        last = idx == len(lines) - 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            if last:
                break  # torn tail write; everything before it is intact
            raise CorruptLog(f"{path}: unparseable record at line {idx + 1}")
        if not isinstance(record, dict) or "hash" not in record:
            raise CorruptLog(f"{path}: malformed record at line {idx + 1}")
        if record.get("seq") != idx - 1:
            raise CorruptLog(f"{path}: sequence break at line {idx + 1}")
        if record.get("prev") != prev_hash:
            raise CorruptLog(f"{path}: hash chain break at line {idx + 1}")
        if _record_hash(record) != record["hash"]:
            raise CorruptLog(f"{path}: record hash mismatch at line {idx + 1}")
        prev_hash = record["hash"]
        records.append(record)
    return header, records


class RoomLog:
    """Appender for a single room's log file."""

    def __init__(self, path: PathLike, *, seq: int, last_hash: str):
        self.path = Path(path)
        self._seq = seq
        self._last_hash = last_hash

    # -- construction -------------------------------------------------

    @classmethod
    def create(
        cls,
        path: PathLike,
        room: Room,
        *,
        scorer_spec: Optional[Dict] = None,
    ) -> "RoomLog":
        """Start a fresh log: header, setup record, initial snapshot."""
        path = Path(path)
        header = _header_line()
        path.write_text(header + "\n", encoding="utf-8")
        log = cls(path, seq=0, last_hash=hashlib.sha256(header.encode("utf-8")).hexdigest())
        log._append(
            {
                "type": "setup",
                "room_id": room.room_id,
                "topic": room.topic,
                "engine": room.config.to_dict(),
                "matrix": room.matrix.describe(),
                "scorer": dict(scorer_spec) if scorer_spec else {"kind": "lexicon"},
            }
        )
        log.snapshot(room)
        return log

    @classmethod
    def open(cls, path: PathLike) -> "RoomLog":
        """Open an existing log for appending after verifying its chain."""
        header_line = Path(path).read_text(encoding="utf-8").split("\n", 1)[0]
        _, records = read_records(path)
        if records:
            seq = records[-1]["seq"] + 1
            last_hash = records[-1]["hash"]
        else:
            seq = 0
            last_hash = hashlib.sha256(header_line.encode("utf-8")).hexdigest()
        return cls(path, seq=seq, last_hash=last_hash)

    # -- appending ----------------------------------------------------

    def _append(self, body: Dict) -> None:
        record = dict(body)
        record["seq"] = self._seq
        record["prev"] = self._last_hash
        record["hash"] = _record_hash(record)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(_canonical(record) + "\n")
        self._seq += 1
        self._last_hash = record["hash"]

    def append_action(
        self,
        action: Action,
        outcome: ActionOutcome,
        post_hash: str,
    ) -> None:
        """Record one accepted action and the state hash after it."""
        self._append(
            {
                "type": "action",
                "action": action_to_dict(action),
                "outcome": outcome_to_dict(outcome),
                "decision": decision_to_dict(outcome.decision),
                "post_hash": post_hash,
            }
        )

    def append_ticks(self, ticks: int) -> None:
        self._append({"type": "ticks", "ticks": int(ticks)})

    def append_join(self, member_id: str, post_hash: str) -> None:
        self._append({"type": "join", "member": member_id, "post_hash": post_hash})

    def snapshot(self, room: Room) -> None:
        """Write a full-state snapshot; restore starts from the latest one."""
        self._append({"type": "snapshot", "state": room.state_dict()})


def room_from_setup(setup: Dict, state: Dict) -> Room:
    config = EngineConfig.from_dict(setup["engine"])
    matrix = make_matrix(setup["matrix"])
    scorer_spec = dict(setup.get("scorer") or {"kind": "lexicon"})
    scorer = make_scorer(scorer_spec.pop("kind", "lexicon"), **scorer_spec)
    return Room.from_state(state, config=config, matrix=matrix, scorer=scorer)


def persist_room(room: Room, path: PathLike, *, scorer_spec: Optional[Dict] = None) -> RoomLog:
    """Write a complete, restorable image of ``room`` at ``path``.

    Returns the open log so callers can keep appending to it.
    """
    return RoomLog.create(path, room, scorer_spec=scorer_spec)


def restore_room(path: PathLike) -> Room:
    """Rebuild a room from its log: latest snapshot plus replayed tail."""
    _, records = read_records(path)
    setup = next((r for r in records if r["type"] == "setup"), None)
    if setup is None:
        raise CorruptLog(f"{path}: no setup record")
    snap_index = max(
        (i for i, r in enumerate(records) if r["type"] == "snapshot"),
        default=None,
    )
    if snap_index is None:
        raise CorruptLog(f"{path}: no snapshot record")
    room = room_from_setup(setup, records[snap_index]["state"])
    for record in records[snap_index + 1 :]:
        if record["type"] == "ticks":
            room.advance_time(record["ticks"])
        elif record["type"] == "join":
            room.add_member(record["member"])
            if room.state_hash() != record["post_hash"]:
                raise CorruptLog(f"{path}: replay diverged at seq {record['seq']}")
        elif record["type"] == "action":
            outcome = room.submit_action(action_from_dict(record["action"]))
            if not outcome.accepted:
                raise CorruptLog(
                    f"{path}: logged action rejected on replay ({outcome.reason.value})"
                )
            if room.state_hash() != record["post_hash"]:
                raise CorruptLog(f"{path}: replay diverged at seq {record['seq']}")
        elif record["type"] in ("setup", "snapshot"):
            continue
        else:
            raise CorruptLog(f"{path}: unknown record type {record['type']!r}")
    return room
