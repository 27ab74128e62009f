/**
 * Console session state: one worker, one run, one pending request at most.
 *
 * The store owns all data the UI renders. It re-syncs fully from the
 * service on every wake-up (push event, poll tick or reconnect), so a lost
 * message can delay an update but never corrupt the view. Decisions are
 * fire-and-confirm with an optimistic lock on the request id: a dialog
 * answered twice posts once.
 */

import {
  Decision,
  PendingRequest,
  SchedulerClient,
  Snapshot,
} from "./api.js";

export type ConsolePhase =
  | "idle"          // nothing assigned to this worker
  | "offered"       // decision dialog visible
  | "working"       // accepted; completion control armed
  | "finished";     // run reached a terminal verdict

export interface ConsoleState {
  phase: ConsolePhase;
  pending: PendingRequest | null;
  snapshot: Snapshot | null;
  lastError: string;
}

type Listener = (state: ConsoleState) => void;

export class ConsoleSession {
  readonly state: ConsoleState = {
    phase: "idle",
    pending: null,
    snapshot: null,
    lastError: "",
  };
  private listeners: Listener[] = [];
  private posted = new Set<string>();   // request ids already answered
  private timer: ReturnType<typeof setInterval> | null = null;
  private aborter: AbortController | null = null;

  constructor(
    readonly client: SchedulerClient,
    readonly workerId: string,
    private runId: string,
  ) {}

  onChange(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Pull the full truth from the service and recompute the phase. */
  async sync(): Promise<void> {
    try {
      const [snapshot, pending] = await Promise.all([
        this.client.getState(this.runId),
        this.client.getPending(this.workerId),
      ]);
      this.state.snapshot = snapshot;
      this.state.pending = pending;
      if (snapshot.verdict !== "running") {
        this.state.phase = "finished";
        this.stop();  // terminal: nothing will change any more
      } else if (pending === null) {
        this.state.phase = "idle";
      } else if (pending.phase === "decision") {
        this.state.phase = this.posted.has(pending.request)
          ? "working" : "offered";
      } else {
        this.state.phase = "working";
      }
      this.state.lastError = "";
    } catch (err) {
      this.state.lastError = String(err);
    }
    this.emit();
  }

  /** Answer the visible offer; double submissions collapse to one post. */
  async decide(decision: Decision): Promise<void> {
    const pending = this.state.pending;
    if (!pending || pending.phase !== "decision") return;
    if (this.posted.has(pending.request)) return;
    this.posted.add(pending.request);
    try {
      await this.client.postDecision(this.workerId, pending.request, decision);
    } catch (err) {
      this.posted.delete(pending.request);
      this.state.lastError = String(err);
    }
    await this.sync();
  }

  /** Confirm the in-progress action is done (the Yes side of the guard). */
  async confirmCompletion(): Promise<void> {
    const pending = this.state.pending;
    if (!pending || pending.phase !== "completion") return;
    if (this.posted.has(pending.request)) return;
    this.posted.add(pending.request);
    try {
      await this.client.postCompletion(this.workerId, pending.request);
    } catch (err) {
      this.posted.delete(pending.request);
      this.state.lastError = String(err);
    }
    await this.sync();
  }

  async reportPosition(position: [number, number, number]): Promise<void> {
    try {
      await this.client.postPosition(this.workerId, position);
    } catch (err) {
      this.state.lastError = String(err);
    }
  }

  /** Server push with a slow safety poll; reconnects re-sync everything. */
  start(pollMs = 1000): void {
    this.stop();
    this.timer = setInterval(() => void this.sync(), pollMs);
    this.aborter = new AbortController();
    const listen = async (): Promise<void> => {
      for (;;) {
        if (this.aborter === null || this.aborter.signal.aborted) return;
        try {
          await this.client.subscribe(
            this.workerId, () => void this.sync(), this.aborter.signal);
        } catch {
          // stream dropped: fall through to the retry delay
        }
        if (this.state.phase === "finished") return;
        await new Promise((resolve) => setTimeout(resolve, 500));
      }
    };
    void listen();
    void this.sync();
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
    this.aborter?.abort();
    this.aborter = null;
  }
}

/** Rows for the team board, derived purely from a snapshot. */
export interface BoardRow {
  action: string;
  status: string;
  candidate: string;
  start: string;
  end: string;
}

export function boardRows(snapshot: Snapshot): BoardRow[] {
  return Object.entries(snapshot.actions).map(([action, info]) => ({
    action,
    status: info.status,
    candidate: info.candidate ?? "-",
    start: info.start === null ? "-" : info.start.toFixed(2),
    end: info.end === null ? "-" : info.end.toFixed(2),
  }));
}

/** Gantt bars (per base worker lane) from the completed trace lines. */
export interface GanttBar {
  worker: string;
  action: string;
  start: number;
  end: number;
}

export function ganttBars(snapshot: Snapshot): GanttBar[] {
  const bars: GanttBar[] = [];
  for (const line of snapshot.trace) {
    const [candidate, action, start, end] = line.split(",");
    for (const worker of candidate.split("+")) {
      bars.push({ worker, action, start: Number(start), end: Number(end) });
    }
  }
  return bars;
}
