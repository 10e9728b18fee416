import { RoomSession } from "./client.js";
import { render } from "./render.js";

// Server address, room and display name come from the query string when
// present (?server=host:port&room=lounge&name=ann) and can be edited in
// the join form before connecting.

function field(id: string): HTMLInputElement {
  return document.getElementById(id) as HTMLInputElement;
}

function startSession(): RoomSession {
  const session = new RoomSession((url) => new WebSocket(url));
  session.onChange(render);
  return session;
}

let session = startSession();

function connectFromForm(): void {
  const server = field("server").value.trim();
  const room = field("room").value.trim();
  const name = field("name").value.trim();
  if (server === "" || room === "" || name === "") {
    return;
  }
  session.close();
  session = startSession();
  session.connect(server, room, name);
}

addEventListener("DOMContentLoaded", () => {
  const params = new URLSearchParams(location.search);
  field("server").value = params.get("server") ?? "127.0.0.1:8765";
  field("room").value = params.get("room") ?? "lounge";
  field("name").value = params.get("name") ?? "";

  document.getElementById("join-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    connectFromForm();
  });
  document.getElementById("retry")!.addEventListener("click", connectFromForm);

  const compose = field("compose");
  document.getElementById("speak")!.addEventListener("click", () => {
    if (session.speak(compose.value)) {
      compose.value = "";
    }
  });
  compose.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && session.speak(compose.value)) {
      compose.value = "";
    }
  });

  const taskInput = field("task-description");
  document.getElementById("issue-task")!.addEventListener("click", () => {
    if (session.issueTask(taskInput.value)) {
      taskInput.value = "";
    }
  });

  document.getElementById("vote")!.addEventListener("click", () => {
    const candidate = document.getElementById("candidate") as HTMLSelectElement;
    session.vote(candidate.value);
  });

  // Withdraw buttons are re-created on every render; delegate their clicks.
  document.getElementById("transcript")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.withdraw") && target.dataset.messageId) {
      session.withdraw(target.dataset.messageId);
    }
  });

  if (params.get("name")) {
    connectFromForm();
  }
});
