// Wire protocol types for the agora chat service (see docs/protocol.md in
// the repository root). Every frame in either direction is one JSON object.

export type ActionType = "speak" | "withdraw" | "issue_task" | "vote";

export type ClientEnvelope = {
  id: string;
  type: "ping" | "join" | "leave" | ActionType;
  room_id?: string;
  payload?: Record<string, unknown>;
};

export type TranscriptMessage = {
  message_id: string;
  author: string;
  text: string;
  logical_time: number;
  withdrawn: boolean;
};

export type TaskEntry = {
  task_id: string;
  description: string;
  issuer: string;
  status: "open" | "completed";
};

export type RoomSnapshot = {
  room_id: string;
  topic: string;
  clock: number;
  members: string[];
  admin: string | null;
  transcript: TranscriptMessage[];
  atmosphere: number[];
  budget: number;
  proportion: number;
  vote_tokens: number;
  tasks: TaskEntry[];
  election_deadline: number | null;
};

export type AckEnvelope = {
  type: "ack";
  id: string | number;
  room_id: string;
  payload: {
    member_id?: string;
    snapshot?: RoomSnapshot;
    accepted?: boolean;
    message_id?: string | null;
    logical_time?: number | null;
  };
};

export type RejectEnvelope = {
  type: "reject";
  id: string | number | null;
  room_id?: string | null;
  error: string;
  detail: string;
};

export type PongEnvelope = {
  type: "pong";
  id: string | number;
};

export type MessageEnvelope = {
  type: "message";
  room_id: string;
  payload: TranscriptMessage;
};

export type StateUpdateEnvelope = {
  type: "state_update";
  room_id: string;
  payload: {
    member_id: string;
    budget: number;
    proportion: number;
    vote_tokens: number;
    atmosphere: number[];
    clock: number;
    muted_until: number;
    admin: string | null;
  };
};

export type TaskUpdateEnvelope = {
  type: "task_update";
  room_id: string;
  payload: TaskEntry;
};

export type ElectionResultEnvelope = {
  type: "election_result";
  room_id: string;
  payload: {
    winner: string | null;
    tallies: Record<string, number>;
    admin: string | null;
  };
};

// Connection lifecycle is fed through the same reducer as server frames so
// that a recorded stream replays to the exact same view, banner included.
export type ConnectionEnvelope = {
  type: "connection";
  status: "connecting" | "open" | "closed";
};

// Anything unrecognized is kept, not dropped: the reducer turns it into a
// diagnostic row.
export type UnknownEnvelope = {
  type: "unknown";
  raw: string;
};

export type ServerEnvelope =
  | AckEnvelope
  | RejectEnvelope
  | PongEnvelope
  | MessageEnvelope
  | StateUpdateEnvelope
  | TaskUpdateEnvelope
  | ElectionResultEnvelope
  | ConnectionEnvelope
  | UnknownEnvelope;

const KNOWN_TYPES = new Set([
  "ack",
  "reject",
  "pong",
  "message",
  "state_update",
  "task_update",
  "election_result",
]);

export function parseServerEnvelope(raw: string): ServerEnvelope {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return { type: "unknown", raw };
  }
  if (
    typeof data !== "object" ||
    data === null ||
    !KNOWN_TYPES.has((data as { type?: unknown }).type as string)
  ) {
    return { type: "unknown", raw };
  }
  return data as ServerEnvelope;
}
