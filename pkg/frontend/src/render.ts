import type { ViewState } from "./state.js";

// Renders the whole view from scratch on every state change. The default
// engine budget cap (5 messages) is used as the meter scale.
const BUDGET_SCALE = 5;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// Map a tone in [-1, 1] onto a red→green hue band.
export function toneColor(value: number): string {
  const clamped = Math.max(-1, Math.min(1, value));
  const hue = Math.round(((clamped + 1) / 2) * 120);
  return `hsl(${hue}, 75%, 45%)`;
}

export function render(state: ViewState): void {
  const banner = el<HTMLDivElement>("banner");
  banner.dataset.status = state.connection;
  banner.textContent =
    state.connection === "open"
      ? `connected — room ${state.roomId ?? "?"} as ${state.memberId ?? "?"}`
      : state.connection === "connecting"
        ? "connecting…"
        : "disconnected";
  el<HTMLButtonElement>("retry").hidden = state.connection !== "closed";

  el<HTMLSpanElement>("topic").textContent = state.topic;
  el<HTMLSpanElement>("clock").textContent = String(state.clock);

  const roster = el<HTMLUListElement>("roster");
  roster.replaceChildren(
    ...state.members.map((member) => {
      const item = document.createElement("li");
      item.textContent = member === state.admin ? `${member} (admin)` : member;
      if (member === state.memberId) {
        item.classList.add("self");
      }
      return item;
    })
  );

  const transcript = el<HTMLUListElement>("transcript");
  transcript.replaceChildren(
    ...state.transcript.map((message) => {
      const item = document.createElement("li");
      const who = document.createElement("strong");
      who.textContent = `${message.author}: `;
      item.appendChild(who);
      const body = document.createElement("span");
      body.textContent = message.withdrawn ? "(withdrawn)" : message.text;
      if (message.withdrawn) {
        item.classList.add("withdrawn");
      }
      item.appendChild(body);
      if (message.author === state.memberId && !message.withdrawn) {
        const button = document.createElement("button");
        button.textContent = "withdraw";
        button.dataset.messageId = message.message_id;
        button.className = "withdraw";
        item.appendChild(button);
      }
      return item;
    })
  );

  const strip = el<HTMLDivElement>("atmosphere");
  strip.replaceChildren(
    ...state.atmosphere.map((value) => {
      const cell = document.createElement("span");
      cell.className = "tone";
      cell.style.backgroundColor = toneColor(value);
      cell.title = value.toFixed(3);
      return cell;
    })
  );

  const fraction = Math.max(0, Math.min(1, state.budget / BUDGET_SCALE));
  el<HTMLDivElement>("budget-fill").style.width = `${(fraction * 100).toFixed(1)}%`;
  el<HTMLSpanElement>("budget-text").textContent =
    `budget ${state.budget.toFixed(2)} · share ${(state.proportion * 100).toFixed(0)}%`;
  el<HTMLSpanElement>("tokens").textContent = `vote tokens: ${state.voteTokens}`;

  const muted = state.mutedUntil > state.clock;
  el<HTMLSpanElement>("muted").hidden = !muted;

  const notice = el<HTMLDivElement>("notice");
  notice.hidden = state.notice === null;
  notice.textContent = state.notice ?? "";

  const tasks = el<HTMLUListElement>("tasks");
  tasks.replaceChildren(
    ...state.tasks.map((task) => {
      const item = document.createElement("li");
      item.textContent = `[${task.status}] ${task.description} — ${task.issuer}`;
      return item;
    })
  );

  const candidates = el<HTMLSelectElement>("candidate");
  const previous = candidates.value;
  candidates.replaceChildren(
    ...state.members.map((member) => {
      const option = document.createElement("option");
      option.value = member;
      option.textContent = member;
      return option;
    })
  );
  if (state.members.includes(previous)) {
    candidates.value = previous;
  }

  const election = el<HTMLDivElement>("election");
  if (state.lastElection === null) {
    election.textContent = "no election yet";
  } else {
    const tallies = Object.entries(state.lastElection.tallies)
      .map(([name, count]) => `${name}: ${count}`)
      .join(", ");
    election.textContent =
      state.lastElection.winner === null
        ? `no majority (${tallies})`
        : `winner ${state.lastElection.winner} (${tallies})`;
  }

  const diagnostics = el<HTMLUListElement>("diagnostics");
  diagnostics.replaceChildren(
    ...state.diagnostics.map((raw) => {
      const item = document.createElement("li");
      item.textContent = `unrecognized frame: ${raw}`;
      return item;
    })
  );
}
