/**
 * Console bootstrap: reads `?worker=<id>&run=<id>` from the URL (starting a
 * fresh live run when no run id is given), builds the session store and
 * mounts the view.
 */

import { SchedulerClient } from "./api.js";
import { ConsoleSession } from "./store.js";
import { ConsoleView } from "./ui.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const worker = params.get("worker") ?? "h";
  const client = new SchedulerClient("");
  let runId = params.get("run");
  if (!runId) {
    const started = await client.startRun("live");
    runId = started.run_id;
  }
  const session = new ConsoleSession(client, worker, runId);
  const root = document.getElementById("console-root");
  if (!root) throw new Error("missing #console-root");
  new ConsoleView(root, session);
  session.start();
}

void boot();
