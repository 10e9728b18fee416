import type {
  ServerEnvelope,
  TaskEntry,
  TranscriptMessage,
} from "./protocol.js";

// The whole view is a pure function of the envelope stream: replaying a
// recorded stream through applyEnvelope reproduces the screen exactly.
// Nothing is rendered optimistically — a message exists only once the
// server broadcasts it.

export type ViewState = {
  connection: "connecting" | "open" | "closed";
  memberId: string | null;
  roomId: string | null;
  topic: string;
  members: string[];
  admin: string | null;
  transcript: TranscriptMessage[];
  budget: number;
  proportion: number;
  voteTokens: number;
  atmosphere: number[];
  clock: number;
  mutedUntil: number;
  tasks: TaskEntry[];
  lastElection: {
    winner: string | null;
    tallies: Record<string, number>;
  } | null;
  notice: string | null;
  diagnostics: string[];
};

export const initialViewState: ViewState = {
  connection: "closed",
  memberId: null,
  roomId: null,
  topic: "",
  members: [],
  admin: null,
  transcript: [],
  budget: 0,
  proportion: 0,
  voteTokens: 0,
  atmosphere: new Array(10).fill(0),
  clock: 0,
  mutedUntil: 0,
  tasks: [],
  lastElection: null,
  notice: null,
  diagnostics: [],
};

export const EXHAUSTED_NOTICE = "resources exhausted — refills at 5/min";

function upsertMessage(
  transcript: TranscriptMessage[],
  incoming: TranscriptMessage
): TranscriptMessage[] {
  const at = transcript.findIndex((m) => m.message_id === incoming.message_id);
  if (at === -1) {
    return [...transcript, incoming];
  }
  const next = transcript.slice();
  next[at] = incoming;
  return next;
}

function upsertTask(tasks: TaskEntry[], incoming: TaskEntry): TaskEntry[] {
  const at = tasks.findIndex((t) => t.task_id === incoming.task_id);
  if (at === -1) {
    return [...tasks, incoming];
  }
  const next = tasks.slice();
  next[at] = incoming;
  return next;
}

function rosterWith(members: string[], memberId: string): string[] {
  return members.includes(memberId)
    ? members
    : [...members, memberId].sort();
}

export function applyEnvelope(state: ViewState, env: ServerEnvelope): ViewState {
  switch (env.type) {
    case "connection":
      return { ...state, connection: env.status };

    case "ack": {
      // A join ack carries the full room snapshot; action acks clear any
      // stale reject notice.
      const snapshot = env.payload.snapshot;
      if (snapshot && env.payload.member_id) {
        return {
          ...state,
          memberId: env.payload.member_id,
          roomId: snapshot.room_id,
          topic: snapshot.topic,
          members: snapshot.members,
          admin: snapshot.admin,
          transcript: snapshot.transcript,
          budget: snapshot.budget,
          proportion: snapshot.proportion,
          voteTokens: snapshot.vote_tokens,
          atmosphere: snapshot.atmosphere,
          clock: snapshot.clock,
          tasks: snapshot.tasks,
          notice: null,
        };
      }
      return state.notice === null ? state : { ...state, notice: null };
    }

    case "reject": {
      const notice =
        env.error === "budget_exhausted"
          ? EXHAUSTED_NOTICE
          : `${env.error}: ${env.detail}`;
      return { ...state, notice };
    }

    case "pong":
      return state;

    case "message":
      return {
        ...state,
        transcript: upsertMessage(state.transcript, env.payload),
        members: rosterWith(state.members, env.payload.author),
      };

    case "state_update": {
      // Atmosphere, clock and admin are shared; the resource fields are
      // personalized, so only our own update may touch them.
      const shared = {
        ...state,
        atmosphere: env.payload.atmosphere,
        clock: env.payload.clock,
        admin: env.payload.admin,
        members: rosterWith(state.members, env.payload.member_id),
      };
      if (env.payload.member_id !== state.memberId) {
        return shared;
      }
      return {
        ...shared,
        budget: env.payload.budget,
        proportion: env.payload.proportion,
        voteTokens: env.payload.vote_tokens,
        mutedUntil: env.payload.muted_until,
      };
    }

    case "task_update":
      return { ...state, tasks: upsertTask(state.tasks, env.payload) };

    case "election_result":
      return {
        ...state,
        admin: env.payload.admin,
        lastElection: {
          winner: env.payload.winner,
          tallies: env.payload.tallies,
        },
      };

    case "unknown":
      return {
        ...state,
        diagnostics: [...state.diagnostics, env.raw].slice(-50),
      };
  }
}

export function replayEnvelopes(stream: ServerEnvelope[]): ViewState {
  return stream.reduce(applyEnvelope, initialViewState);
}
