import {
  DecisionMessage,
  ErrorMessage,
  LayoutMessage,
  PROTOCOL_VERSION,
  ServerMessage,
} from "./protocol.js";
import { Transport } from "./transport.js";

export type Phase =
  | "connecting"   // hello sent, waiting for layout
  | "ready"        // layout in hand, session not started
  | "running"      // inside a trial, streaming gaze
  | "deciding"     // trial ended, decision pending
  | "done"         // all trials decided
  | "disconnected";

/**
 * Everything the view needs. Decisions are stored verbatim as received:
 * the UI computes nothing, so each rendered score is exactly a server
 * message field.
 */
export interface ViewState {
  phase: Phase;
  layout: LayoutMessage | null;
  trial: number;
  targetWord: string | null;
  flashing: number | null;
  decisions: DecisionMessage[];
  lastError: ErrorMessage | null;
  outOfPhaseCount: number;
}

/**
 * The trial-session controller: consumes server messages, owns the phase
 * machine, streams the pointer as gaze while a trial runs, and
 * acknowledges each decision. It holds no scoring logic of any kind.
 */
export class SpellerSession {
  private state: ViewState = {
    phase: "connecting",
    layout: null,
    trial: 0,
    targetWord: null,
    flashing: null,
    decisions: [],
    lastError: null,
    outOfPhaseCount: 0,
  };
  private pointer: { x: number; y: number } | null = null;
  private seq = 0;

  constructor(
    private transport: Transport,
    private onChange: (state: Readonly<ViewState>) => void,
  ) {
    transport.onMessage((msg) => this.handle(msg));
    transport.onClose(() => this.set({ phase: "disconnected", flashing: null }));
    transport.send({ type: "hello", t_us: this.tick(), protocol: PROTOCOL_VERSION });
  }

  get view(): Readonly<ViewState> {
    return this.state;
  }

  /** Ask the server to run the configured block of trials. */
  start(): void {
    if (this.state.phase !== "ready") return;
    this.transport.send({ type: "start_session", t_us: this.tick() });
  }

  /**
   * Record the operator's pointer in screen coordinates. While a trial is
   * running every update is forwarded as one gaze sample; outside a trial
   * the position is only remembered (the server would reject it).
   */
  setPointer(x: number, y: number): void {
    this.pointer = { x, y };
    if (this.state.phase === "running") this.sendGaze();
  }

  close(): void {
    this.transport.close();
  }

  private tick(): number {
    return ++this.seq;
  }

  private sendGaze(): void {
    if (!this.pointer) return;
    this.transport.send({
      type: "gaze",
      t_us: this.tick(),
      x_px: this.pointer.x,
      y_px: this.pointer.y,
    });
  }

  private set(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  private handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "layout":
        this.set({ layout: msg, phase: "ready" });
        break;
      case "trial_start":
        this.set({
          phase: "running",
          trial: msg.trial,
          targetWord: msg.target_word ?? null,
          flashing: null,
        });
        break;
      case "flash":
        this.set({ flashing: msg.aoi_id });
        // Dwell: one sample per flash even if the pointer never moves.
        this.sendGaze();
        break;
      case "trial_end":
        this.set({ phase: "deciding", flashing: null });
        break;
      case "decision": {
        const decisions = [...this.state.decisions, msg];
        const total = this.state.layout?.n_trials ?? Infinity;
        this.transport.send({ type: "ack", t_us: this.tick() });
        this.set({
          decisions,
          phase: decisions.length >= total ? "done" : "deciding",
        });
        break;
      }
      case "error":
        if (msg.code === "out-of-phase") {
          // A gaze sample raced a trial boundary; the server dropped it
          // and the session goes on.
          this.set({ outOfPhaseCount: this.state.outOfPhaseCount + 1 });
        } else if (msg.code === "empty-trial") {
          // Discarded trial: the server still expects an acknowledgement
          // before moving on, same as after a decision.
          this.transport.send({ type: "ack", t_us: this.tick() });
          this.set({ lastError: msg, phase: "deciding" });
        } else {
          this.set({ lastError: msg });
        }
        break;
    }
  }
}
