"""WebSocket chat service: JSON envelopes in, engine actions out.

Every client request is one JSON envelope and receives exactly one
``ack`` or ``reject`` correlated by the client-assigned ``id``. All
mutations for a room flow through that room's queue and are applied by
a single worker coroutine, so every client observes the room's messages
in the same order. Broadcasts (``message``, ``state_update``,
``task_update``, ``election_result``) fan out after an action commits.

Authentication is by display name only: joining as a name that is in
the roster but not currently connected re-binds that member (a
reconnect) and the ack carries a full room snapshot to resync from;
joining as a name that is actively connected allocates a fresh member
id with a ``#2``-style suffix. With a log directory configured, rooms
persist through an append-only hash-chained log and are restored on
the next start. The envelope schema is documented field-by-field in
``docs/protocol.md``.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from .core import Action, ActionKind, resource_structure
from .engine import EngineConfig, Room
from .matrix import make_matrix
from .persistence import RoomLog, restore_room
from .sentiment import make_scorer

PROTOCOL_VERSION = 1

CLIENT_TYPES = frozenset({"join", "leave", "speak", "withdraw", "issue_task", "vote", "ping"})
_ROOM_ACTIONS = {
    "speak": ActionKind.SPEAK,
    "withdraw": ActionKind.WITHDRAW,
    "issue_task": ActionKind.ISSUE_TASK,
    "vote": ActionKind.VOTE,
}


@dataclass
class ServiceConfig:
    """Server-side defaults applied to every room it hosts."""

    engine: EngineConfig = field(default_factory=EngineConfig)
    matrix_spec: Dict = field(default_factory=lambda: {"kind": "noop"})
    scorer_spec: Dict = field(default_factory=lambda: {"kind": "lexicon"})
    topic: str = ""
    log_dir: Optional[str] = None
    snapshot_every: int = 100


def _dumps(obj: Dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def client_snapshot(room: Room, member_id: str) -> Dict:
    """Resync payload: everything a client needs to render the room."""
    return {
        "room_id": room.room_id,
        "topic": room.topic,
        "clock": room.clock,
        "members": sorted(room.field.tribe),
        "admin": room.admin,
        "transcript": [
            {
                "message_id": m.id,
                "author": m.author,
                "text": "" if m.withdrawn else m.text,
                "logical_time": m.logical_time,
                "withdrawn": m.withdrawn,
            }
            for m in room.field.transcript
        ],
        "atmosphere": room.field.atmosphere.as_list(),
        "budget": room.ledger.budget_of(member_id),
        "proportion": resource_structure(room.ledger, member_id).proportion,
        "vote_tokens": room.ledger.tokens_of(member_id),
        "tasks": [
            {
                "task_id": t.task_id,
                "description": t.description,
                "issuer": t.issuer,
                "status": t.status.value,
            }
            for t in room.tasks
        ],
        "election_deadline": room.election.deadline if room.election else None,
    }


def _state_update(room: Room, member_id: str) -> Dict:
    rs = resource_structure(room.ledger, member_id)
    return {
        "type": "state_update",
        "room_id": room.room_id,
        "payload": {
            "member_id": member_id,
            "budget": rs.count,
            "proportion": rs.proportion,
            "vote_tokens": room.ledger.tokens_of(member_id),
            "atmosphere": room.field.atmosphere.as_list(),
            "clock": room.clock,
            "muted_until": room.muted_until.get(member_id, 0),
            "admin": room.admin,
        },
    }


class _MalformedError(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


def _parse_envelope(raw) -> Dict:
    """Syntactic validation; anything wrong here is MalformedEnvelope."""
    try:
        envelope = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise _MalformedError(f"not valid JSON: {exc}") from exc
    if not isinstance(envelope, dict):
        raise _MalformedError("envelope must be a JSON object")
    if not isinstance(envelope.get("id"), (str, int)):
        raise _MalformedError("missing request id")
    etype = envelope.get("type")
    if etype not in CLIENT_TYPES:
        raise _MalformedError(f"unknown envelope type {etype!r}")
    payload = envelope.get("payload", {})
    if not isinstance(payload, dict):
        raise _MalformedError("payload must be a JSON object")
    envelope["payload"] = payload
    if etype != "ping":
        room_id = envelope.get("room_id")
        if not isinstance(room_id, str) or not room_id:
            raise _MalformedError("missing room_id")
    if etype == "join":
        name = payload.get("display_name")
        if not isinstance(name, str) or not name.strip():
            raise _MalformedError("join needs a nonempty display_name")
    elif etype == "speak":
        if not isinstance(payload.get("text"), str):
            raise _MalformedError("speak needs text")
    elif etype == "withdraw":
        if not isinstance(payload.get("message_id"), str) or not payload["message_id"]:
            raise _MalformedError("withdraw needs a message_id")
    elif etype == "issue_task":
        if not isinstance(payload.get("description"), str) or not payload["description"]:
            raise _MalformedError("issue_task needs a description")
    elif etype == "vote":
        if not isinstance(payload.get("candidate"), str) or not payload["candidate"]:
            raise _MalformedError("vote needs a candidate")
    return envelope


class _RoomRuntime:
    def __init__(self, room: Room, log: Optional[RoomLog], snapshot_every: int):
        self.room = room
        self.log = log
        self.snapshot_every = snapshot_every
        self.queue: asyncio.Queue = asyncio.Queue()
        self.connections: Dict[str, object] = {}  # member_id -> websocket
        self.worker: Optional[asyncio.Task] = None
        self._since_snapshot = 0

    def log_action(self, action: Action, outcome, post_hash: str) -> None:
        if self.log is None:
            return
        self.log.append_action(action, outcome, post_hash)
        self._since_snapshot += 1
        if self._since_snapshot >= self.snapshot_every:
            self.log.snapshot(self.room)
            self._since_snapshot = 0

    def log_ticks(self, ticks: int) -> None:
        if self.log is not None:
            self.log.append_ticks(ticks)

    def log_join(self, member_id: str, post_hash: str) -> None:
        if self.log is not None:
            self.log.append_join(member_id, post_hash)


class ChatService:
    """Hosts rooms over a WebSocket endpoint; one worker per room."""

    def __init__(self, config: Optional[ServiceConfig] = None):
        self.config = config if config is not None else ServiceConfig()
        self.rooms: Dict[str, _RoomRuntime] = {}
        # websocket -> {room_id: member_id}
        self.sessions: Dict[object, Dict[str, str]] = {}
        self._server = None
        self.port: Optional[int] = None

    # -- lifecycle ------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        """Bind and serve; returns the actual port (useful with port 0)."""
        self._server = await serve(self._handler, host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.port

    async def stop(self) -> None:
        for runtime in self.rooms.values():
            if runtime.worker is not None:
                runtime.worker.cancel()
        await asyncio.gather(
            *(r.worker for r in self.rooms.values() if r.worker is not None),
            return_exceptions=True,
        )
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    # -- room management --------------------------------------------------

    def _log_path(self, room_id: str) -> Optional[Path]:
        if self.config.log_dir is None:
            return None
        return Path(self.config.log_dir) / f"{room_id}.log"

    def _get_room(self, room_id: str) -> _RoomRuntime:
        runtime = self.rooms.get(room_id)
        if runtime is not None:
            return runtime
        log_path = self._log_path(room_id)
        log = None
        if log_path is not None and log_path.exists():
            room = restore_room(log_path)
            log = RoomLog.open(log_path)
        else:
            room = Room(
                room_id,
                topic=self.config.topic,
                config=self.config.engine,
                matrix=make_matrix(self.config.matrix_spec),
                scorer=self._make_scorer(),
            )
            if log_path is not None:
                log_path.parent.mkdir(parents=True, exist_ok=True)
                log = RoomLog.create(log_path, room, scorer_spec=self.config.scorer_spec)
        runtime = _RoomRuntime(room, log, self.config.snapshot_every)
        runtime.worker = asyncio.ensure_future(self._worker(runtime))
        self.rooms[room_id] = runtime
        return runtime

    def _make_scorer(self):
        spec = dict(self.config.scorer_spec)
        return make_scorer(spec.pop("kind", "lexicon"), **spec)

    # -- connection handling ----------------------------------------------

    async def _handler(self, websocket) -> None:
        self.sessions[websocket] = {}
        try:
            async for raw in websocket:
                try:
                    envelope = _parse_envelope(raw)
                except _MalformedError as exc:
                    await self._safe_send(
                        websocket,
                        {
                            "id": self._echo_id(raw),
                            "type": "reject",
                            "error": "MalformedEnvelope",
                            "detail": exc.detail,
                        },
                    )
                    continue
                if envelope["type"] == "ping":
                    await self._safe_send(websocket, {"id": envelope["id"], "type": "pong"})
                    continue
                runtime = self._get_room(envelope["room_id"])
                await runtime.queue.put((websocket, envelope))
        except ConnectionClosed:
            pass
        finally:
            bindings = self.sessions.pop(websocket, {})
            for room_id, member_id in bindings.items():
                runtime = self.rooms.get(room_id)
                if runtime is not None and runtime.connections.get(member_id) is websocket:
                    del runtime.connections[member_id]

    @staticmethod
    def _echo_id(raw) -> Optional[object]:
        """Best effort: echo the request id of an envelope we rejected."""
        try:
            parsed = json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            return None
        if isinstance(parsed, dict) and isinstance(parsed.get("id"), (str, int)):
            return parsed["id"]
        return None

    async def _safe_send(self, websocket, envelope: Dict) -> None:
        try:
            await websocket.send(_dumps(envelope))
        except ConnectionClosed:
            pass

    # -- the per-room serialized path ---------------------------------------

    async def _worker(self, runtime: _RoomRuntime) -> None:
        while True:
            websocket, envelope = await runtime.queue.get()
            try:
                await self._process(runtime, websocket, envelope)
            except Exception as exc:  # keep the room alive on handler bugs
                await self._safe_send(
                    websocket,
                    {
                        "id": envelope["id"],
                        "type": "reject",
                        "room_id": envelope.get("room_id"),
                        "error": "Internal",
                        "detail": f"{type(exc).__name__}: {exc}",
                    },
                )

    async def _process(self, runtime: _RoomRuntime, websocket, envelope: Dict) -> None:
        if websocket not in self.sessions:
            return  # connection vanished while the envelope sat in the queue
        etype = envelope["type"]
        if etype == "join":
            await self._process_join(runtime, websocket, envelope)
        elif etype == "leave":
            await self._process_leave(runtime, websocket, envelope)
        else:
            await self._process_action(runtime, websocket, envelope)

    async def _reject(self, websocket, envelope: Dict, error: str, detail: str) -> None:
        await self._safe_send(
            websocket,
            {
                "id": envelope["id"],
                "type": "reject",
                "room_id": envelope["room_id"],
                "error": error,
                "detail": detail,
            },
        )

    async def _ack(self, websocket, envelope: Dict, payload: Dict) -> None:
        await self._safe_send(
            websocket,
            {
                "id": envelope["id"],
                "type": "ack",
                "room_id": envelope["room_id"],
                "payload": payload,
            },
        )

    async def _broadcast(self, runtime: _RoomRuntime, envelope: Dict) -> None:
        raw = _dumps(envelope)
        for member_id, websocket in list(runtime.connections.items()):
            try:
                await websocket.send(raw)
            except ConnectionClosed:
                runtime.connections.pop(member_id, None)

    async def _broadcast_states(self, runtime: _RoomRuntime) -> None:
        for member_id, websocket in list(runtime.connections.items()):
            try:
                await websocket.send(_dumps(_state_update(runtime.room, member_id)))
            except ConnectionClosed:
                runtime.connections.pop(member_id, None)

    async def _broadcast_events(self, runtime: _RoomRuntime, events) -> None:
        for event in events:
            await self._broadcast(
                runtime,
                {"type": event.kind, "room_id": runtime.room.room_id, "payload": event.payload},
            )

    def _allocate_member_id(self, runtime: _RoomRuntime, display_name: str) -> Tuple[str, bool]:
        """Returns (member_id, is_new). Reconnects re-bind existing names."""
        name = display_name.strip()
        room = runtime.room
        if name in room.field.tribe and name not in runtime.connections:
            return name, False
        member_id = name
        suffix = 2
        while member_id in room.field.tribe:
            member_id = f"{name}#{suffix}"
            suffix += 1
        return member_id, True

    async def _process_join(self, runtime: _RoomRuntime, websocket, envelope: Dict) -> None:
        room = runtime.room
        member_id, is_new = self._allocate_member_id(
            runtime, envelope["payload"]["display_name"]
        )
        if is_new:
            if len(room.field.tribe) >= room.config.max_members:
                await self._reject(
                    websocket, envelope, "RoomFull", f"room {room.room_id!r} is at capacity"
                )
                return
            room.add_member(member_id)
            runtime.log_join(member_id, room.state_hash())
        runtime.connections[member_id] = websocket
        self.sessions.setdefault(websocket, {})[envelope["room_id"]] = member_id
        await self._ack(
            websocket,
            envelope,
            {"member_id": member_id, "snapshot": client_snapshot(room, member_id)},
        )

    async def _process_leave(self, runtime: _RoomRuntime, websocket, envelope: Dict) -> None:
        member_id = self.sessions.get(websocket, {}).pop(envelope["room_id"], None)
        if member_id is None:
            await self._reject(websocket, envelope, "NotJoined", "leave before join")
            return
        if runtime.connections.get(member_id) is websocket:
            del runtime.connections[member_id]
        await self._ack(websocket, envelope, {"member_id": member_id})

    async def _process_action(self, runtime: _RoomRuntime, websocket, envelope: Dict) -> None:
        room = runtime.room
        member_id = self.sessions.get(websocket, {}).get(envelope["room_id"])
        if member_id is None:
            await self._reject(
                websocket, envelope, "NotJoined", f"join {envelope['room_id']!r} first"
            )
            return
        payload = envelope["payload"]
        action = Action(
            kind=_ROOM_ACTIONS[envelope["type"]],
            actor=member_id,
            text=payload.get("text", ""),
            message_id=payload.get("message_id"),
            description=payload.get("description", ""),
            candidate=payload.get("candidate"),
        )
        # one logical tick per submitted envelope keeps refill and
        # election deadlines moving at a deterministic, replayable pace
        events = room.advance_time(1)
        runtime.log_ticks(1)
        await self._broadcast_events(runtime, events)

        outcome = room.submit_action(action)
        if not outcome.accepted:
            await self._reject(websocket, envelope, outcome.reason.value, "action refused")
            return
        runtime.log_action(action, outcome, room.state_hash())
        await self._ack(
            websocket,
            envelope,
            {
                "accepted": True,
                "message_id": outcome.message_id,
                "logical_time": outcome.logical_time,
            },
        )
        if action.kind is ActionKind.SPEAK:
            message = room.field.transcript[-1]
            await self._broadcast(
                runtime,
                {
                    "type": "message",
                    "room_id": room.room_id,
                    "payload": {
                        "message_id": message.id,
                        "author": message.author,
                        "text": message.text,
                        "logical_time": message.logical_time,
                        "withdrawn": False,
                    },
                },
            )
        elif action.kind is ActionKind.WITHDRAW:
            await self._broadcast(
                runtime,
                {
                    "type": "message",
                    "room_id": room.room_id,
                    "payload": {
                        "message_id": action.message_id,
                        "author": member_id,
                        "text": "",
                        "logical_time": outcome.logical_time,
                        "withdrawn": True,
                    },
                },
            )
        elif action.kind is ActionKind.ISSUE_TASK:
            task = room.tasks[-1]
            await self._broadcast(
                runtime,
                {
                    "type": "task_update",
                    "room_id": room.room_id,
                    "payload": {
                        "task_id": task.task_id,
                        "description": task.description,
                        "issuer": task.issuer,
                        "status": task.status.value,
                    },
                },
            )
        await self._broadcast_states(runtime)


async def run_service(
    config: Optional[ServiceConfig] = None,
    host: str = "127.0.0.1",
    port: int = 8765,
) -> None:
    """Serve until cancelled (the `serve` CLI subcommand's main loop)."""
    service = ChatService(config)
    bound = await service.start(host, port)
    print(f"listening on ws://{host}:{bound}", flush=True)
    try:
        await asyncio.Future()
    except asyncio.CancelledError:
        pass
    finally:
        await service.stop()
