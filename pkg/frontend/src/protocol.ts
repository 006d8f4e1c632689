// Wire protocol of the live trial service: newline-delimited JSON where
// every message object carries "type" and "t_us". The UI is a pure
// view/controller, so these shapes are the only source of every number it
// ever displays.

export const PROTOCOL_VERSION = 1;

export interface AoiBox {
  id: number;
  word: string;
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface LayoutMessage {
  type: "layout";
  t_us: number;
  screen_w: number;
  screen_h: number;
  n_trials: number;
  aois: AoiBox[];
}

export interface TrialStartMessage {
  type: "trial_start";
  t_us: number;
  trial: number;
  target_word?: string;
}

export interface FlashMessage {
  type: "flash";
  t_us: number;
  aoi_id: number;
  duration_ms: number;
}

export interface TrialEndMessage {
  type: "trial_end";
  t_us: number;
  trial: number;
}

export type DecisionMode = "fused" | "fallback-eeg" | "rejected";

export interface DecisionMessage {
  type: "decision";
  t_us: number;
  trial: number;
  aoi_id: number | null;
  word: string | null;
  mode: DecisionMode;
  c_et: number[];
  c_eeg: number[];
}

export interface ErrorMessage {
  type: "error";
  t_us: number;
  code: string;
  detail: string;
}

export type ServerMessage =
  | LayoutMessage
  | TrialStartMessage
  | FlashMessage
  | TrialEndMessage
  | DecisionMessage
  | ErrorMessage;

export interface HelloMessage {
  type: "hello";
  t_us: number;
  protocol: number;
}

export interface GazeMessage {
  type: "gaze";
  t_us: number;
  x_px: number;
  y_px: number;
  pupil_mm?: number;
}

export interface StartSessionMessage {
  type: "start_session";
  t_us: number;
}

export interface AckMessage {
  type: "ack";
  t_us: number;
}

export type ClientMessage =
  | HelloMessage
  | GazeMessage
  | StartSessionMessage
  | AckMessage;

export class ProtocolError extends Error {}

const SERVER_TYPES = new Set([
  "layout",
  "trial_start",
  "flash",
  "trial_end",
  "decision",
  "error",
]);

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => typeof x === "number");
}

/** Parse one line from the server, rejecting anything off-schema. */
export function parseServerMessage(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 80)}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("message is not an object");
  }
  const msg = raw as Record<string, unknown>;
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) {
    throw new ProtocolError(`unknown message type ${String(msg.type)}`);
  }
  if (typeof msg.t_us !== "number") {
    throw new ProtocolError(`${msg.type}: missing t_us`);
  }
  switch (msg.type) {
    case "layout":
      if (
        typeof msg.screen_w !== "number" ||
        typeof msg.screen_h !== "number" ||
        typeof msg.n_trials !== "number" ||
        !Array.isArray(msg.aois)
      ) {
        throw new ProtocolError("layout: bad fields");
      }
      break;
    case "trial_start":
    case "trial_end":
      if (typeof msg.trial !== "number") {
        throw new ProtocolError(`${msg.type}: missing trial`);
      }
      break;
    case "flash":
      if (typeof msg.aoi_id !== "number" || typeof msg.duration_ms !== "number") {
        throw new ProtocolError("flash: bad fields");
      }
      break;
    case "decision":
      if (
        typeof msg.trial !== "number" ||
        !isNumberArray(msg.c_et) ||
        !isNumberArray(msg.c_eeg) ||
        typeof msg.mode !== "string"
      ) {
        throw new ProtocolError("decision: bad fields");
      }
      break;
    case "error":
      if (typeof msg.code !== "string" || typeof msg.detail !== "string") {
        throw new ProtocolError("error: bad fields");
      }
      break;
  }
  return msg as unknown as ServerMessage;
}

export function serializeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
