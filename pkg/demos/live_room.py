"""Scripted two-client session against an in-process chat service.

Starts the WebSocket service with the rule allocator, joins two clients,
and walks through the protocol: speaking, a banned token triggering a
mute, the muted member being refused, and a withdrawal. Every frame the
clients receive is printed as it arrives.

    python3 demos/live_room.py
"""

from __future__ import annotations

import asyncio
import json

import websockets

from agora.service import ChatService, ServiceConfig


class Client:
    def __init__(self, name: str, socket):
        self.name = name
        self.socket = socket
        self._next = 0

    async def send(self, etype: str, payload: dict | None = None) -> dict:
        self._next += 1
        envelope = {"id": f"{self.name}{self._next}", "type": etype, "room_id": "demo"}
        if payload:
            envelope["payload"] = payload
        await self.socket.send(json.dumps(envelope))
        while True:
            frame = json.loads(await self.socket.recv())
            self._show(frame)
            if frame.get("id") == envelope["id"]:
                return frame

    async def drain(self, count: int) -> None:
        for _ in range(count):
            self._show(json.loads(await self.socket.recv()))

    def _show(self, frame: dict) -> None:
        kind = frame.get("type")
        payload = frame.get("payload", {})
        if kind == "message":
            text = "(withdrawn)" if payload["withdrawn"] else payload["text"]
            print(f"  {self.name} sees  [{payload['author']}] {text}")
        elif kind == "state_update":
            print(f"  {self.name} state budget={payload['budget']:.1f} "
                  f"muted_until={payload['muted_until']}")
        elif kind == "reject":
            print(f"  {self.name} REJECTED ({frame['error']})")
        else:
            print(f"  {self.name} {kind}")


async def main() -> None:
    config = ServiceConfig(
        matrix_spec={"kind": "rule", "banned_tokens": ["spoilers"], "mute_duration_ticks": 5}
    )
    service = ChatService(config)
    port = await service.start(port=0)
    print(f"service listening on ws://127.0.0.1:{port}\n")

    try:
        async with (
            websockets.connect(f"ws://127.0.0.1:{port}") as ann_ws,
            websockets.connect(f"ws://127.0.0.1:{port}") as bob_ws,
        ):
            ann, bob = Client("ann", ann_ws), Client("bob", bob_ws)
            await ann.send("join", {"display_name": "ann"})
            await bob.send("join", {"display_name": "bob"})

            print("\nann speaks:")
            ack = await ann.send("speak", {"text": "welcome, great to see everyone"})
            await ann.drain(2)  # own message broadcast + state_update
            await bob.drain(2)
            message_id = ack["payload"]["message_id"]

            print("\nbob trips the keyword rule:")
            await bob.send("speak", {"text": "spoilers incoming"})
            await bob.drain(2)
            await ann.drain(2)

            print("\nbob is muted, his next message is refused:")
            await bob.send("speak", {"text": "hello again"})

            print("\nann withdraws her first message:")
            await ann.send("withdraw", {"message_id": message_id})
            await ann.drain(2)
            await bob.drain(2)
    finally:
        await service.stop()
    print("\nsession complete")


if __name__ == "__main__":
    asyncio.run(main())
