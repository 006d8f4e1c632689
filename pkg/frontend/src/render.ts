import { AoiBox, DecisionMessage } from "./protocol.js";
import { ViewState } from "./session.js";

// Full re-render on every state change. The board is small (a handful of
// words and at most a few dozen decision rows) so diffing buys nothing.
export function render(root: HTMLElement, state: ViewState): void {
  root.textContent = "";
  const wrap = el("div", "speller");
  wrap.appendChild(header(state));
  if (state.layout) wrap.appendChild(board(state));
  wrap.appendChild(decisions(state));
  if (state.lastError) {
    const err = el("div", "error");
    err.textContent = `${state.lastError.code}: ${state.lastError.detail}`;
    wrap.appendChild(err);
  }
  if (state.phase === "disconnected") {
    const overlay = el("div", "overlay");
    overlay.textContent = "connection lost";
    wrap.appendChild(overlay);
  }
  root.appendChild(wrap);
}

function el(tag: string, cls: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  return node;
}

function header(state: ViewState): HTMLElement {
  const bar = el("header", "topbar");

  const status = el("span", `status status-${state.phase}`);
  status.textContent = state.phase;
  bar.appendChild(status);

  const start = el("button", "start") as HTMLButtonElement;
  start.id = "start";
  start.textContent = "start session";
  start.disabled = state.phase !== "ready";
  bar.appendChild(start);

  if (state.trial > 0) {
    const trial = el("span", "trial-no");
    const total = state.layout ? ` / ${state.layout.n_trials}` : "";
    trial.textContent = `trial ${state.trial}${total}`;
    bar.appendChild(trial);
  }
  if (state.targetWord) {
    const target = el("span", "target");
    target.textContent = `look at: ${state.targetWord}`;
    bar.appendChild(target);
  }
  if (state.outOfPhaseCount > 0) {
    const oop = el("span", "oop");
    oop.textContent = `${state.outOfPhaseCount} dropped`;
    bar.appendChild(oop);
  }
  return bar;
}

function board(state: ViewState): HTMLElement {
  const layout = state.layout!;
  const grid = el("div", "board");
  grid.style.aspectRatio = `${layout.screen_w} / ${layout.screen_h}`;
  const last = state.decisions[state.decisions.length - 1];
  for (const aoi of layout.aois) {
    grid.appendChild(cell(aoi, layout.screen_w, layout.screen_h, state, last));
  }
  return grid;
}

function cell(
  aoi: AoiBox,
  screenW: number,
  screenH: number,
  state: ViewState,
  last: DecisionMessage | undefined,
): HTMLElement {
  const node = el("div", "aoi");
  if (state.flashing === aoi.id) node.classList.add("flash");
  if (last && last.aoi_id === aoi.id) node.classList.add("chosen");
  node.dataset.aoi = String(aoi.id);
  // Position as percentages so the board scales with the viewport.
  node.style.left = pct(aoi.x / screenW);
  node.style.top = pct(aoi.y / screenH);
  node.style.width = pct(aoi.w / screenW);
  node.style.height = pct(aoi.h / screenH);
  node.textContent = aoi.word;
  return node;
}

function pct(frac: number): string {
  return `${frac * 100}%`;
}

function decisions(state: ViewState): HTMLElement {
  const list = el("ol", "decisions");
  for (const msg of state.decisions) {
    list.appendChild(decisionRow(msg, state));
  }
  return list;
}

function decisionRow(msg: DecisionMessage, state: ViewState): HTMLElement {
  const row = el("li", `decision mode-${msg.mode}`);
  row.dataset.trial = String(msg.trial);

  const head = el("div", "decision-head");
  const trial = el("span", "trial");
  trial.textContent = `trial ${msg.trial}`;
  head.appendChild(trial);

  const word = el("span", "word");
  word.textContent = msg.word ?? "(no selection)";
  head.appendChild(word);

  const mode = el("span", `mode mode-${msg.mode}`);
  // Anything other than a fused pick means the gaze gate did not confirm
  // the choice; surface that instead of hiding it.
  mode.textContent = msg.mode === "fused" ? "fused" : `warning: ${msg.mode}`;
  head.appendChild(mode);
  row.appendChild(head);

  row.appendChild(scoreRow("et", msg.c_et, state));
  row.appendChild(scoreRow("eeg", msg.c_eeg, state));
  return row;
}

function scoreRow(kind: string, values: number[], state: ViewState): HTMLElement {
  const wrap = el("div", `scores scores-${kind}`);
  wrap.dataset.kind = kind;
  const label = el("span", "kind");
  label.textContent = kind === "et" ? "gaze" : "eeg";
  wrap.appendChild(label);

  values.forEach((v, i) => {
    const item = el("span", "score");
    item.dataset.aoi = String(i + 1);
    // String(v) round-trips the double exactly, so what is shown is the
    // field the server sent, not a reformatting of it.
    item.dataset.value = String(v);

    const bar = el("span", "bar");
    bar.style.width = pct(Math.max(0, Math.min(1, v)));
    item.appendChild(bar);

    const val = el("span", "val");
    val.textContent = String(v);
    item.appendChild(val);

    const name = el("span", "name");
    name.textContent = aoiWord(state, i + 1);
    item.appendChild(name);

    wrap.appendChild(item);
  });
  return wrap;
}

function aoiWord(state: ViewState, id: number): string {
  const hit = state.layout?.aois.find((a) => a.id === id);
  return hit ? hit.word : `#${id}`;
}
