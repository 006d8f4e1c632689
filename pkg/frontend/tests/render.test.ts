// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";
import { DecisionMessage, LayoutMessage } from "../src/protocol.js";
import { render } from "../src/render.js";
import { ViewState } from "../src/session.js";

const LAYOUT: LayoutMessage = {
  type: "layout",
  t_us: 1,
  screen_w: 1000,
  screen_h: 500,
  n_trials: 3,
  aois: [
    { id: 1, word: "WATER", x: 0, y: 0, w: 250, h: 100 },
    { id: 2, word: "FIRE", x: 500, y: 0, w: 250, h: 100 },
    { id: 3, word: "EARTH", x: 0, y: 400, w: 250, h: 100 },
  ],
};

function state(patch: Partial<ViewState> = {}): ViewState {
  return {
    phase: "ready",
    layout: LAYOUT,
    trial: 0,
    targetWord: null,
    flashing: null,
    decisions: [],
    lastError: null,
    outOfPhaseCount: 0,
    ...patch,
  };
}

function decision(extra: Partial<DecisionMessage> = {}): DecisionMessage {
  return {
    type: "decision",
    t_us: 9,
    trial: 1,
    aoi_id: 2,
    word: "FIRE",
    mode: "fused",
    c_et: [0.1, 0.8, 0.1],
    c_eeg: [0.05, 0.9, 0.05],
    ...extra,
  };
}

let root: HTMLElement;
beforeEach(() => {
  document.body.innerHTML = '<main id="app"></main>';
  root = document.getElementById("app")!;
});

describe("board", () => {
  it("lays out one cell per word at proportional coordinates", () => {
    render(root, state());
    const cells = root.querySelectorAll<HTMLElement>(".aoi");
    expect(cells).toHaveLength(3);
    expect([...cells].map((c) => c.textContent)).toEqual(["WATER", "FIRE", "EARTH"]);
    const fire = root.querySelector<HTMLElement>('[data-aoi="2"]')!;
    expect(fire.style.left).toBe("50%");
    expect(fire.style.width).toBe("25%");
    expect(fire.style.height).toBe("20%");
  });

  it("marks exactly the flashing cell and clears it on re-render", () => {
    render(root, state({ flashing: 3, phase: "running" }));
    expect(root.querySelectorAll(".aoi.flash")).toHaveLength(1);
    expect(root.querySelector(".aoi.flash")!.textContent).toBe("EARTH");
    render(root, state({ flashing: null, phase: "running" }));
    expect(root.querySelectorAll(".aoi.flash")).toHaveLength(0);
  });

  it("highlights the most recent chosen word", () => {
    render(root, state({ decisions: [decision()] }));
    const chosen = root.querySelectorAll<HTMLElement>(".aoi.chosen");
    expect(chosen).toHaveLength(1);
    expect(chosen[0]!.dataset.aoi).toBe("2");
  });

  it("renders no board before the layout arrives", () => {
    render(root, state({ layout: null, phase: "connecting" }));
    expect(root.querySelector(".board")).toBeNull();
  });
});

describe("header", () => {
  it("enables the start button only when ready", () => {
    render(root, state({ phase: "connecting", layout: null }));
    expect(root.querySelector<HTMLButtonElement>("#start")!.disabled).toBe(true);
    render(root, state({ phase: "ready" }));
    expect(root.querySelector<HTMLButtonElement>("#start")!.disabled).toBe(false);
    render(root, state({ phase: "running", trial: 1 }));
    expect(root.querySelector<HTMLButtonElement>("#start")!.disabled).toBe(true);
  });

  it("shows the announced target word and trial counter", () => {
    render(root, state({ phase: "running", trial: 2, targetWord: "FIRE" }));
    expect(root.querySelector(".target")!.textContent).toBe("look at: FIRE");
    expect(root.querySelector(".trial-no")!.textContent).toBe("trial 2 / 3");
  });
});

describe("decision panel", () => {
  it("displays every score as the exact double from the message", () => {
    const msg = decision({
      c_et: [0.1 + 0.2, 1 / 3, 0.9999999999999999],
      c_eeg: [5e-324, 0.49999999999999994, 1e-17],
    });
    render(root, state({ decisions: [msg] }));

    for (const [kind, values] of [
      ["et", msg.c_et],
      ["eeg", msg.c_eeg],
    ] as const) {
      const row = root.querySelector(`.scores[data-kind="${kind}"]`)!;
      const items = row.querySelectorAll<HTMLElement>(".score");
      expect(items).toHaveLength(values.length);
      items.forEach((item, i) => {
        // Both the attribute and the visible text must round-trip to the
        // identical double, not a formatted approximation.
        expect(item.dataset.value).toBe(String(values[i]));
        expect(Number(item.dataset.value)).toBe(values[i]);
        expect(item.querySelector(".val")!.textContent).toBe(String(values[i]));
      });
    }
  });

  it("labels scores with the matching words", () => {
    render(root, state({ decisions: [decision()] }));
    const names = root.querySelectorAll('.scores[data-kind="et"] .name');
    expect([...names].map((n) => n.textContent)).toEqual(["WATER", "FIRE", "EARTH"]);
  });

  it("flags non-fused modes as warnings", () => {
    render(
      root,
      state({
        decisions: [
          decision(),
          decision({ trial: 2, mode: "fallback-eeg" }),
          decision({ trial: 3, mode: "rejected", aoi_id: null, word: null }),
        ],
      }),
    );
    const rows = root.querySelectorAll<HTMLElement>(".decision");
    expect(rows).toHaveLength(3);
    expect(rows[0]!.querySelector(".mode")!.textContent).toBe("fused");
    expect(rows[1]!.querySelector(".mode")!.textContent).toBe("warning: fallback-eeg");
    expect(rows[1]!.classList.contains("mode-fallback-eeg")).toBe(true);
    expect(rows[2]!.querySelector(".mode")!.textContent).toBe("warning: rejected");
    expect(rows[2]!.querySelector(".word")!.textContent).toBe("(no selection)");
  });
});

describe("status surfaces", () => {
  it("shows a disconnect overlay only when the link is gone", () => {
    render(root, state({ phase: "running" }));
    expect(root.querySelector(".overlay")).toBeNull();
    render(root, state({ phase: "disconnected" }));
    expect(root.querySelector(".overlay")!.textContent).toBe("connection lost");
  });

  it("prints protocol errors verbatim", () => {
    render(
      root,
      state({
        lastError: { type: "error", t_us: 4, code: "busy", detail: "another client is connected" },
      }),
    );
    expect(root.querySelector(".error")!.textContent).toBe("busy: another client is connected");
  });

  it("reports dropped out-of-phase samples", () => {
    render(root, state({ outOfPhaseCount: 4 }));
    expect(root.querySelector(".oop")!.textContent).toBe("4 dropped");
  });
});
