/**
 * Typed client for the scheduler service.
 *
 * Every piece of console state comes from these endpoints; the UI never
 * fabricates anything. The push channel is server-sent events parsed off a
 * fetch stream so the same code runs in the browser and under vitest.
 */

export interface PendingRequest {
  request: string;
  action: string;
  phase: "decision" | "completion";
  candidate: string;
  collaborative: boolean;
  instruction: string;
}

export interface ActionInfo {
  status: "pending" | "allocated" | "negotiating" | "executing" | "completed";
  candidate: string | null;
  start: number | null;
  end: number | null;
}

export interface WorkerInfo {
  id: string;
  type: "human" | "robot";
  available: boolean;
  busy_action: string | null;
}

export interface Snapshot {
  run_id: string;
  job: string;
  variant: string;
  verdict: string;
  reason: string;
  makespan: number | null;
  actions: Record<string, ActionInfo>;
  workers: Record<string, WorkerInfo>;
  allocations: Record<string, string>;
  trace: string[];
  rejections: [string, string, number][];
  pending?: Record<string, PendingRequest>;
  time?: number;
}

export type Decision = "accepted" | "rejected";

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = "";
    try {
      detail = JSON.stringify((await response.json()).detail);
    } catch {
      detail = response.statusText;
    }
    throw new Error(`${response.status}: ${detail}`);
  }
  return (await response.json()) as T;
}

export class SchedulerClient {
  constructor(private readonly base: string) {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async startRun(mode: "simulated" | "live" | "mixed" = "live",
                 variant?: string): Promise<{ run_id: string }> {
    return asJson(await fetch(this.url("/runs"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(variant ? { mode, variant } : { mode }),
    }));
  }

  async getState(runId: string): Promise<Snapshot> {
    return asJson(await fetch(this.url(`/runs/${runId}/state`)));
  }

  async getPending(workerId: string): Promise<PendingRequest | null> {
    const body = await asJson<{ pending: PendingRequest | null }>(
      await fetch(this.url(`/workers/${workerId}/pending`)));
    return body.pending;
  }

  async postDecision(workerId: string, request: string,
                     decision: Decision): Promise<{ status: string }> {
    return asJson(await fetch(this.url(`/workers/${workerId}/decision`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ request, decision }),
    }));
  }

  async postCompletion(workerId: string,
                       request: string): Promise<{ status: string }> {
    return asJson(await fetch(this.url(`/workers/${workerId}/completion`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ request }),
    }));
  }

  async postPosition(workerId: string,
                     position: [number, number, number]): Promise<void> {
    await asJson(await fetch(this.url(`/workers/${workerId}/position`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ position }),
    }));
  }

  /**
   * Subscribe to the worker's push channel. Calls `onEvent` for every
   * pending-request notification; resolves when the stream closes or the
   * abort signal fires. Callers should re-sync from getState/getPending
   * after reconnecting - the stream is a wake-up call, not a data source.
   */
  async subscribe(workerId: string, onEvent: (kind: string) => void,
                  signal?: AbortSignal): Promise<void> {
    const response = await fetch(this.url(`/workers/${workerId}/events`), {
      headers: { accept: "text/event-stream" },
      signal,
    });
    if (!response.ok || response.body === null) {
      throw new Error(`subscribe failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let cut;
        while ((cut = buffer.indexOf("\n\n")) >= 0) {
          const frame = buffer.slice(0, cut);
          buffer = buffer.slice(cut + 2);
          const eventLine = frame.split("\n").find((l) => l.startsWith("event: "));
          const kind = eventLine ? eventLine.slice(7).trim() : "message";
          if (kind !== "ping" && kind !== "hello") onEvent(kind);
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}
