// DOM wiring for the annotation app.  All task/definition text reaches the
// page through textContent, never through innerHTML: generated definitions
// are untrusted input and must render verbatim.

import { AnnotationApi, ApiError } from "./api.js";
import { bindHotkeys } from "./hotkeys.js";
import { LabelQueue } from "./queue.js";
import { PLACEHOLDER, reportRows } from "./report.js";
import {
  applyOptimistic,
  nextPendingId,
  orderTasks,
  pendingCount,
  rollback,
} from "./state.js";
import type { LabelPayload, TaskView } from "./types.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const annotator = params.get("annotator") ?? "anonymous";

const api = new AnnotationApi(baseUrl);
const queue = new LabelQueue(window.localStorage);

let tasks: TaskView[] = [];
let activeTaskId: string | null = null;
let offline = false;

interface FormState {
  fluency: boolean;
  adequacy: boolean;
  override: boolean | null;
}
const form: FormState = { fluency: false, adequacy: false, override: null };

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

function toast(message: string): void {
  const node = el("toast");
  node.textContent = message;
  node.classList.add("visible");
  window.setTimeout(() => node.classList.remove("visible"), 2500);
}

function setOffline(value: boolean): void {
  offline = value;
  el("offline-banner").hidden = !value;
}

function activeTask(): TaskView | null {
  return tasks.find((t) => t.task_id === activeTaskId) ?? null;
}

function selectTask(taskId: string | null): void {
  activeTaskId = taskId;
  const task = activeTask();
  form.fluency = false;
  form.adequacy = false;
  form.override = null;
  renderDetail(task);
  renderTaskList();
}

function renderTaskList(): void {
  const list = el("task-list");
  list.textContent = "";
  el("pending-count").textContent = String(pendingCount(tasks));
  for (const task of orderTasks(tasks)) {
    const item = document.createElement("li");
    item.className = `task ${task.status}${task.task_id === activeTaskId ? " active" : ""}`;
    const word = document.createElement("span");
    word.className = "word";
    word.textContent = `${task.word} / ${task.sense_id}`;
    const status = document.createElement("span");
    status.className = "status";
    status.textContent = task.status;
    item.append(word, status);
    item.addEventListener("click", () => selectTask(task.task_id));
    list.append(item);
  }
}

function renderDetail(task: TaskView | null): void {
  const detail = el("task-detail");
  detail.hidden = task === null;
  if (!task) return;
  el("detail-word").textContent = `${task.word} (${task.sense_id})`;
  el("detail-prediction").textContent = task.predicted_definition;
  el("detail-gold").textContent = task.gold_definition ?? PLACEHOLDER;
  el("detail-usage").textContent = task.usage ?? PLACEHOLDER;
  el("detail-circular").textContent = task.auto_circular ? "yes" : "no";
  syncFormControls();
}

function syncFormControls(): void {
  (el("flag-fluency") as HTMLInputElement).checked = form.fluency;
  (el("flag-adequacy") as HTMLInputElement).checked = form.adequacy;
  el("override-state").textContent =
    form.override === null ? "auto" : form.override ? "circular" : "not circular";
}

async function refreshReport(): Promise<void> {
  try {
    const report = await api.getReport();
    const table = el("report-body");
    table.textContent = "";
    for (const row of reportRows(report)) {
      const tr = document.createElement("tr");
      for (const value of [
        row.model,
        row.fluency,
        row.adequacy,
        row.circularity,
        `${row.labeled}/${row.total}`,
      ]) {
        const td = document.createElement("td");
        td.textContent = value;
        tr.append(td);
      }
      table.append(tr);
    }
  } catch {
    // report refresh is best-effort; the banner already tracks offline state
  }
}

async function refreshTasks(): Promise<void> {
  try {
    const listing = await api.listTasks();
    tasks = listing.tasks;
    setOffline(false);
    if (!activeTaskId || !activeTask()) {
      selectTask(nextPendingId(tasks, null));
    } else {
      renderTaskList();
      renderDetail(activeTask());
    }
  } catch (error) {
    if (error instanceof ApiError && error.offline) setOffline(true);
  }
}

async function deliver(label: LabelPayload): Promise<void> {
  await api.postLabel(label);
}

async function submitActive(): Promise<void> {
  const task = activeTask();
  if (!task || task.status === "labeled") return;
  const label: LabelPayload = {
    task_id: task.task_id,
    fluency_issue: form.fluency,
    adequacy_issue: form.adequacy,
    circular_override: form.override,
    annotator,
  };
  const snapshot = applyOptimistic(tasks, task.task_id);
  renderTaskList();
  try {
    await deliver(label);
    setOffline(false);
  } catch (error) {
    if (error instanceof ApiError && error.offline) {
      // keep the optimistic state; the queue guarantees delivery later
      queue.enqueue(label);
      setOffline(true);
      toast("offline: label queued locally");
    } else if (error instanceof ApiError && error.status === 404) {
      if (snapshot) rollback(tasks, snapshot);
      toast(`stale task: ${error.message}`);
      await refreshTasks();
      return;
    } else {
      if (snapshot) rollback(tasks, snapshot);
      renderTaskList();
      toast(`label rejected: ${String(error)}`);
      return;
    }
  }
  await refreshReport();
  selectTask(nextPendingId(tasks, task.task_id));
}

async function flushQueue(): Promise<void> {
  if (queue.size() === 0) return;
  const delivered = await queue.flush(deliver);
  if (delivered > 0) {
    setOffline(false);
    toast(`${delivered} queued label(s) delivered`);
    await refreshReport();
  }
}

function cycleOverride(): void {
  form.override = form.override === null ? true : form.override ? false : null;
  syncFormControls();
}

function moveSelection(step: number): void {
  if (tasks.length === 0) return;
  const ordered = orderTasks(tasks);
  const index = ordered.findIndex((t) => t.task_id === activeTaskId);
  const next = ordered[(index + step + ordered.length) % ordered.length];
  if (next) selectTask(next.task_id);
}

function wireUp(): void {
  (el("flag-fluency") as HTMLInputElement).addEventListener("change", (e) => {
    form.fluency = (e.target as HTMLInputElement).checked;
  });
  (el("flag-adequacy") as HTMLInputElement).addEventListener("change", (e) => {
    form.adequacy = (e.target as HTMLInputElement).checked;
  });
  el("override-button").addEventListener("click", cycleOverride);
  el("submit-button").addEventListener("click", () => void submitActive());

  bindHotkeys({
    f: () => {
      form.fluency = !form.fluency;
      syncFormControls();
    },
    a: () => {
      form.adequacy = !form.adequacy;
      syncFormControls();
    },
    c: cycleOverride,
    enter: () => void submitActive(),
    j: () => moveSelection(1),
    k: () => moveSelection(-1),
  });

  window.addEventListener("online", () => void flushQueue());
  window.setInterval(() => void flushQueue(), 5000);

  void refreshTasks().then(refreshReport).then(flushQueue);
}

wireUp();
