import { render } from "./render.js";
import { SpellerSession } from "./session.js";
import { WebSocketTransport } from "./transport.js";

// Browser entry point. Everything below is wiring: the pointer is the
// gaze source, the server does all the deciding.

const params = new URLSearchParams(location.search);
const url = params.get("server") ?? "ws://127.0.0.1:8765";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const session = new SpellerSession(new WebSocketTransport(url), (state) => {
  render(root, state);
});

root.addEventListener("click", (e) => {
  const target = e.target as HTMLElement;
  if (target.id === "start") session.start();
});

// The board div stands in for the acquisition screen; map pointer
// position inside it back to that screen's pixel grid.
root.addEventListener("pointermove", (e) => {
  const board = (e.target as HTMLElement).closest(".board") as HTMLElement | null;
  if (!board) return;
  const layout = session.view.layout;
  if (!layout) return;
  const rect = board.getBoundingClientRect();
  if (rect.width === 0 || rect.height === 0) return;
  const x = ((e.clientX - rect.left) / rect.width) * layout.screen_w;
  const y = ((e.clientY - rect.top) / rect.height) * layout.screen_h;
  session.setPointer(x, y);
});

window.addEventListener("beforeunload", () => session.close());
