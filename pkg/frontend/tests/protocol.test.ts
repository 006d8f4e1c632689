import { describe, expect, it } from "vitest";
import {
  DecisionMessage,
  LayoutMessage,
  ProtocolError,
  parseServerMessage,
  serializeClientMessage,
} from "../src/protocol.js";

describe("parseServerMessage", () => {
  it("accepts a layout message and keeps every field", () => {
    const line = JSON.stringify({
      type: "layout",
      t_us: 12,
      screen_w: 1920,
      screen_h: 1080,
      n_trials: 7,
      aois: [{ id: 1, word: "WATER", x: 100, y: 200, w: 300, h: 150 }],
    });
    const msg = parseServerMessage(line) as LayoutMessage;
    expect(msg.type).toBe("layout");
    expect(msg.n_trials).toBe(7);
    expect(msg.aois[0]!.word).toBe("WATER");
  });

  it("keeps decision score doubles bit-exact through JSON", () => {
    // Shortest-round-trip doubles survive stringify/parse untouched.
    const scores = [0.1 + 0.2, 1 / 3, 5e-324, 0.9999999999999999];
    const line = JSON.stringify({
      type: "decision",
      t_us: 99,
      trial: 3,
      aoi_id: 2,
      word: "FIRE",
      mode: "fused",
      c_et: scores,
      c_eeg: scores,
    });
    const msg = parseServerMessage(line) as DecisionMessage;
    scores.forEach((v, i) => {
      expect(msg.c_et[i]).toBe(v);
      expect(msg.c_eeg[i]).toBe(v);
    });
  });

  it("accepts a rejected decision with null selection", () => {
    const msg = parseServerMessage(
      JSON.stringify({
        type: "decision",
        t_us: 5,
        trial: 1,
        aoi_id: null,
        word: null,
        mode: "rejected",
        c_et: [0.5, 0.5],
        c_eeg: [0.5, 0.5],
      }),
    ) as DecisionMessage;
    expect(msg.aoi_id).toBeNull();
    expect(msg.mode).toBe("rejected");
  });

  it("accepts flash, trial_start, trial_end and error", () => {
    expect(
      parseServerMessage('{"type": "flash", "t_us": 1, "aoi_id": 4, "duration_ms": 100}').type,
    ).toBe("flash");
    expect(
      parseServerMessage('{"type": "trial_start", "t_us": 2, "trial": 1, "target_word": "AIR"}')
        .type,
    ).toBe("trial_start");
    expect(parseServerMessage('{"type": "trial_end", "t_us": 3, "trial": 1}').type).toBe(
      "trial_end",
    );
    expect(
      parseServerMessage('{"type": "error", "t_us": 4, "code": "busy", "detail": "x"}').type,
    ).toBe("error");
  });

  it.each([
    ["not json", "{nope"],
    ["a bare array", "[1, 2]"],
    ["a bare scalar", "42"],
    ["missing type", '{"t_us": 1}'],
    ["unknown type", '{"type": "telemetry", "t_us": 1}'],
    ["client type on the server side", '{"type": "gaze", "t_us": 1, "x_px": 0, "y_px": 0}'],
    ["missing t_us", '{"type": "trial_end", "trial": 1}'],
    ["string t_us", '{"type": "trial_end", "t_us": "1", "trial": 1}'],
    ["layout without aois", '{"type": "layout", "t_us": 1, "screen_w": 1, "screen_h": 1, "n_trials": 1}'],
    ["flash without aoi_id", '{"type": "flash", "t_us": 1, "duration_ms": 5}'],
    ["trial_start without trial", '{"type": "trial_start", "t_us": 1}'],
    ["error without detail", '{"type": "error", "t_us": 1, "code": "busy"}'],
    [
      "decision with a string score",
      '{"type": "decision", "t_us": 1, "trial": 1, "aoi_id": 1, "word": "A", "mode": "fused", "c_et": ["0.9"], "c_eeg": [0.1]}',
    ],
    [
      "decision without c_eeg",
      '{"type": "decision", "t_us": 1, "trial": 1, "aoi_id": 1, "word": "A", "mode": "fused", "c_et": [0.9]}',
    ],
  ])("rejects %s", (_label, line) => {
    expect(() => parseServerMessage(line)).toThrow(ProtocolError);
  });
});

describe("serializeClientMessage", () => {
  it("emits one JSON object per message", () => {
    const line = serializeClientMessage({ type: "hello", t_us: 1, protocol: 1 });
    expect(JSON.parse(line)).toEqual({ type: "hello", t_us: 1, protocol: 1 });
  });

  it("round-trips gaze coordinates exactly", () => {
    const x = 123.45600000000002;
    const line = serializeClientMessage({ type: "gaze", t_us: 2, x_px: x, y_px: 0.1 + 0.2 });
    const back = JSON.parse(line);
    expect(back.x_px).toBe(x);
    expect(back.y_px).toBe(0.1 + 0.2);
  });
});
