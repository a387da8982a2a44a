// Pure task-list state transitions: optimistic labeling with rollback and
// pending-first navigation.  No DOM access here, so everything is testable
// in plain node.

import type { TaskStatus, TaskView } from "./types.js";

export interface TaskSnapshot {
  taskId: string;
  status: TaskStatus;
}

/** Pending tasks first (original order within each group). */
export function orderTasks(tasks: readonly TaskView[]): TaskView[] {
  const pending = tasks.filter((t) => t.status === "pending");
  const labeled = tasks.filter((t) => t.status === "labeled");
  return [...pending, ...labeled];
}

export function pendingCount(tasks: readonly TaskView[]): number {
  return tasks.filter((t) => t.status === "pending").length;
}

/** Mark a task labeled immediately; returns a snapshot for rollback. */
export function applyOptimistic(
  tasks: TaskView[],
  taskId: string,
): TaskSnapshot | null {
  const task = tasks.find((t) => t.task_id === taskId);
  if (!task) return null;
  const snapshot: TaskSnapshot = { taskId, status: task.status };
  task.status = "labeled";
  return snapshot;
}

/** Undo an optimistic update after a server error. */
export function rollback(tasks: TaskView[], snapshot: TaskSnapshot): void {
  const task = tasks.find((t) => t.task_id === snapshot.taskId);
  if (task) task.status = snapshot.status;
}

/**
 * The next pending task after `fromId` in list order, wrapping around;
 * null when nothing is pending.
 */
export function nextPendingId(
  tasks: readonly TaskView[],
  fromId: string | null,
): string | null {
  const pending = tasks.filter((t) => t.status === "pending");
  if (pending.length === 0) return null;
  if (fromId === null) return pending[0]!.task_id;
  const start = tasks.findIndex((t) => t.task_id === fromId);
  const ordered = [...tasks.slice(start + 1), ...tasks.slice(0, start + 1)];
  return ordered.find((t) => t.status === "pending")?.task_id ?? null;
}
