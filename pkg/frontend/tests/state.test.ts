import { describe, expect, it } from "vitest";

import type { RoomSnapshot, ServerEnvelope } from "../src/protocol.js";
import { parseServerEnvelope } from "../src/protocol.js";
import {
  EXHAUSTED_NOTICE,
  applyEnvelope,
  initialViewState,
  replayEnvelopes,
} from "../src/state.js";

const snapshot: RoomSnapshot = {
  room_id: "lounge",
  topic: "weekend plans",
  clock: 0,
  members: ["ann"],
  admin: null,
  transcript: [],
  atmosphere: new Array(10).fill(0),
  budget: 5,
  proportion: 1,
  vote_tokens: 1,
  tasks: [],
  election_deadline: null,
};

// A recorded session: connect, join, two speakers, a reject, a task that
// completes, an election, a withdrawal and one frame from the future.
const recordedStream: ServerEnvelope[] = [
  { type: "connection", status: "connecting" },
  { type: "connection", status: "open" },
  {
    type: "ack",
    id: "c1",
    room_id: "lounge",
    payload: { member_id: "ann", snapshot },
  },
  {
    type: "message",
    room_id: "lounge",
    payload: {
      message_id: "m1",
      author: "ann",
      text: "hello there",
      logical_time: 1,
      withdrawn: false,
    },
  },
  {
    type: "state_update",
    room_id: "lounge",
    payload: {
      member_id: "ann",
      budget: 4,
      proportion: 0.47,
      vote_tokens: 1,
      atmosphere: [...new Array(9).fill(0), 0.5],
      clock: 1,
      muted_until: 0,
      admin: null,
    },
  },
  {
    type: "message",
    room_id: "lounge",
    payload: {
      message_id: "m2",
      author: "bob",
      text: "good plan",
      logical_time: 2,
      withdrawn: false,
    },
  },
  { type: "reject", id: "c2", room_id: "lounge", error: "budget_exhausted", detail: "action refused" },
  {
    type: "task_update",
    room_id: "lounge",
    payload: { task_id: "t1", description: "book the room", issuer: "bob", status: "open" },
  },
  {
    type: "task_update",
    room_id: "lounge",
    payload: { task_id: "t1", description: "book the room", issuer: "bob", status: "completed" },
  },
  {
    type: "election_result",
    room_id: "lounge",
    payload: { winner: "bob", tallies: { bob: 2 }, admin: "bob" },
  },
  {
    type: "message",
    room_id: "lounge",
    payload: { message_id: "m1", author: "ann", text: "", logical_time: 3, withdrawn: true },
  },
  { type: "unknown", raw: '{"type":"telemetry","payload":{}}' },
];

describe("applyEnvelope over a recorded stream", () => {
  it("reaches the expected view", () => {
    const view = replayEnvelopes(recordedStream);
    expect(view.connection).toBe("open");
    expect(view.memberId).toBe("ann");
    expect(view.roomId).toBe("lounge");
    expect(view.members).toEqual(["ann", "bob"]);
    expect(view.transcript.map((m) => m.message_id)).toEqual(["m1", "m2"]);
    expect(view.transcript[0]!.withdrawn).toBe(true);
    expect(view.transcript[0]!.text).toBe("");
    expect(view.budget).toBe(4);
    expect(view.atmosphere[9]).toBe(0.5);
    expect(view.notice).toBe(EXHAUSTED_NOTICE);
    expect(view.tasks).toEqual([
      { task_id: "t1", description: "book the room", issuer: "bob", status: "completed" },
    ]);
    expect(view.admin).toBe("bob");
    expect(view.lastElection).toEqual({ winner: "bob", tallies: { bob: 2 } });
    expect(view.diagnostics).toEqual(['{"type":"telemetry","payload":{}}']);
  });

  it("is deterministic: replaying twice gives deep-equal views", () => {
    expect(replayEnvelopes(recordedStream)).toEqual(replayEnvelopes(recordedStream));
  });

  it("never mutates the previous state", () => {
    let state = initialViewState;
    for (const env of recordedStream) {
      const frozen = Object.freeze(structuredClone(state));
      const before = structuredClone(state);
      state = applyEnvelope(frozen as typeof state, env);
      expect(frozen).toEqual(before);
    }
  });
});

describe("individual envelope rules", () => {
  const joined = replayEnvelopes(recordedStream.slice(0, 3));

  it("renders nothing optimistically: an action ack adds no transcript entry", () => {
    const view = applyEnvelope(joined, {
      type: "ack",
      id: "c9",
      room_id: "lounge",
      payload: { accepted: true, message_id: "m9", logical_time: 9 },
    });
    expect(view.transcript).toEqual([]);
  });

  it("an action ack clears a standing reject notice", () => {
    const rejected = applyEnvelope(joined, {
      type: "reject",
      id: "c3",
      room_id: "lounge",
      error: "budget_exhausted",
      detail: "action refused",
    });
    expect(rejected.notice).toBe(EXHAUSTED_NOTICE);
    const acked = applyEnvelope(rejected, {
      type: "ack",
      id: "c4",
      room_id: "lounge",
      payload: { accepted: true, message_id: null, logical_time: 4 },
    });
    expect(acked.notice).toBeNull();
  });

  it("non-budget rejects surface the error code and detail", () => {
    const view = applyEnvelope(joined, {
      type: "reject",
      id: "c5",
      room_id: "lounge",
      error: "invalid_target",
      detail: "action refused",
    });
    expect(view.notice).toBe("invalid_target: action refused");
  });

  it("a foreign state_update moves shared fields but not own resources", () => {
    const view = applyEnvelope(joined, {
      type: "state_update",
      room_id: "lounge",
      payload: {
        member_id: "bob",
        budget: 1.5,
        proportion: 0.2,
        vote_tokens: 0,
        atmosphere: new Array(10).fill(-1),
        clock: 7,
        muted_until: 12,
        admin: "bob",
      },
    });
    expect(view.budget).toBe(5);
    expect(view.voteTokens).toBe(1);
    expect(view.mutedUntil).toBe(0);
    expect(view.clock).toBe(7);
    expect(view.admin).toBe("bob");
    expect(view.atmosphere).toEqual(new Array(10).fill(-1));
    expect(view.members).toContain("bob");
  });

  it("message upsert replaces an entry instead of duplicating it", () => {
    const first = applyEnvelope(joined, recordedStream[3]!);
    const withdrawn = applyEnvelope(first, recordedStream[10]!);
    expect(withdrawn.transcript).toHaveLength(1);
    expect(withdrawn.transcript[0]!.withdrawn).toBe(true);
  });

  it("keeps unknown envelope types as diagnostic rows, never dropping them", () => {
    const env = parseServerEnvelope('{"type":"surprise","payload":1}');
    expect(env.type).toBe("unknown");
    const view = applyEnvelope(joined, env);
    expect(view.diagnostics).toEqual(['{"type":"surprise","payload":1}']);
  });

  it("treats unparseable frames as diagnostics too", () => {
    const view = applyEnvelope(joined, parseServerEnvelope("not json at all"));
    expect(view.diagnostics).toEqual(["not json at all"]);
  });
});
