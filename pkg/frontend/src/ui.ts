/**
 * DOM layer: renders the console state into the page.
 *
 * Three zones: the request dialog (Accept / Cancel, with a badge when the
 * action is collaborative), the completion control (guarded by a Yes/No
 * confirm step), and the team board with a simple Gantt strip. A position
 * slider stands in for the headset tracking that would normally feed the
 * distance cost.
 */

import { ConsoleSession, ConsoleState, boardRows, ganttBars } from "./store.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className = "", text = ""): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class ConsoleView {
  private dialog: HTMLElement;
  private workArea: HTMLElement;
  private board: HTMLElement;
  private gantt: HTMLElement;
  private status: HTMLElement;
  private confirming = false;

  constructor(root: HTMLElement, private session: ConsoleSession) {
    root.innerHTML = "";
    const header = el("header", "console-header");
    header.append(el("h1", "", `Worker console - ${session.workerId}`));
    this.status = el("div", "run-status", "connecting...");
    header.append(this.status);
    root.append(header);

    this.dialog = el("section", "dialog-zone");
    this.workArea = el("section", "work-zone");
    this.board = el("section", "board-zone");
    this.gantt = el("section", "gantt-zone");
    root.append(this.dialog, this.workArea, this.board, this.gantt);
    root.append(this.buildPositionControl());

    session.onChange((state) => this.render(state));
  }

  private buildPositionControl(): HTMLElement {
    const wrap = el("section", "position-zone");
    wrap.append(el("label", "", "Reported position x (stand-in for tracking)"));
    const slider = el("input") as HTMLInputElement;
    slider.type = "range";
    slider.min = "0";
    slider.max = "3";
    slider.step = "0.1";
    slider.value = "2.2";
    slider.id = "position-slider";
    slider.addEventListener("change", () => {
      void this.session.reportPosition([Number(slider.value), 0, 0]);
    });
    wrap.append(slider);
    return wrap;
  }

  private render(state: ConsoleState): void {
    this.renderStatus(state);
    this.renderDialog(state);
    this.renderWork(state);
    if (state.snapshot) {
      this.renderBoard(state);
      this.renderGantt(state);
    }
  }

  private renderStatus(state: ConsoleState): void {
    const snap = state.snapshot;
    if (!snap) {
      this.status.textContent = state.lastError || "connecting...";
      return;
    }
    const makespan = snap.makespan !== null && snap.verdict === "completed"
      ? ` - makespan ${snap.makespan.toFixed(2)} s` : "";
    this.status.textContent = `${snap.job} [${snap.variant}] ${snap.verdict}${makespan}`;
  }

  private renderDialog(state: ConsoleState): void {
    this.dialog.innerHTML = "";
    if (state.phase !== "offered" || !state.pending) return;
    const pending = state.pending;
    const card = el("div", "dialog-card");
    card.dataset.request = pending.request;
    const title = el("h2", "", `Assigned: ${pending.instruction}`);
    card.append(title);
    if (pending.collaborative) {
      card.append(el("span", "collab-badge", "collaborative"));
    }
    const accept = el("button", "accept-btn", "Accept");
    accept.addEventListener("click", () => void this.session.decide("accepted"));
    const cancel = el("button", "cancel-btn", "Cancel");
    cancel.addEventListener("click", () => void this.session.decide("rejected"));
    const buttons = el("div", "dialog-buttons");
    buttons.append(accept, cancel);
    card.append(buttons);
    this.dialog.append(card);
  }

  private renderWork(state: ConsoleState): void {
    this.workArea.innerHTML = "";
    this.confirming = this.confirming && state.phase === "working";
    if (state.phase !== "working" || !state.pending) return;
    const pending = state.pending;
    const card = el("div", "work-card");
    card.append(el("h2", "", `In progress: ${pending.instruction}`));
    if (pending.phase !== "completion") {
      card.append(el("p", "hint", "waiting for the system..."));
      this.workArea.append(card);
      return;
    }
    if (!this.confirming) {
      const done = el("button", "done-btn", "Mark completed");
      done.addEventListener("click", () => {
        this.confirming = true;
        this.render(state);
      });
      card.append(done);
    } else {
      card.append(el("p", "confirm-q", "Is the action completed?"));
      const yes = el("button", "confirm-yes", "Yes");
      yes.addEventListener("click", () => {
        this.confirming = false;
        void this.session.confirmCompletion();
      });
      const no = el("button", "confirm-no", "No");
      no.addEventListener("click", () => {
        this.confirming = false;
        this.render(state);
      });
      const row = el("div", "confirm-row");
      row.append(yes, no);
      card.append(row);
    }
    this.workArea.append(card);
  }

  private renderBoard(state: ConsoleState): void {
    const snap = state.snapshot!;
    this.board.innerHTML = "";
    this.board.append(el("h2", "", "Team board"));
    const table = el("table", "board-table");
    const head = el("tr");
    for (const label of ["action", "status", "worker", "start", "end"]) {
      head.append(el("th", "", label));
    }
    table.append(head);
    for (const row of boardRows(snap)) {
      const tr = el("tr", `status-${row.status}`);
      tr.dataset.action = row.action;
      for (const cell of [row.action, row.status, row.candidate,
                          row.start, row.end]) {
        tr.append(el("td", "", cell));
      }
      table.append(tr);
    }
    this.board.append(table);

    const workers = el("div", "worker-strip");
    for (const info of Object.values(snap.workers)) {
      const chip = el("span",
        `worker-chip ${info.available ? "free" : "busy"}`,
        info.busy_action ? `${info.id}: ${info.busy_action}` : `${info.id}: idle`);
      workers.append(chip);
    }
    this.board.append(workers);
  }

  private renderGantt(state: ConsoleState): void {
    const snap = state.snapshot!;
    this.gantt.innerHTML = "";
    const bars = ganttBars(snap);
    if (bars.length === 0) return;
    this.gantt.append(el("h2", "", "Executed so far"));
    const horizon = Math.max(...bars.map((b) => b.end), 1);
    const lanes = new Map<string, HTMLElement>();
    for (const worker of Object.keys(snap.workers)) {
      const lane = el("div", "gantt-lane");
      lane.append(el("span", "lane-label", worker));
      const track = el("div", "lane-track");
      lane.append(track);
      lanes.set(worker, track);
      this.gantt.append(lane);
    }
    for (const bar of bars) {
      const track = lanes.get(bar.worker);
      if (!track) continue;
      const block = el("div", "gantt-bar", bar.action);
      block.style.left = `${(bar.start / horizon) * 100}%`;
      block.style.width = `${((bar.end - bar.start) / horizon) * 100}%`;
      track.append(block);
    }
  }
}
