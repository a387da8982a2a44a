// Thin typed client for the annotation service REST API.
// fetch is injectable so tests can script failures and offline periods.

import type { LabelPayload, ReportPayload, TaskListPayload, TaskView } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
  ) {
    super(message);
  }

  /** True for transport-level failures (service unreachable / offline). */
  get offline(): boolean {
    return this.status === null;
  }
}

export class AnnotationApi {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(`service unreachable: ${String(error)}`, null);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return response;
  }

  async listTasks(): Promise<TaskListPayload> {
    return (await this.request("/tasks")).json() as Promise<TaskListPayload>;
  }

  async getTask(taskId: string): Promise<TaskView> {
    return (await this.request(`/tasks/${encodeURIComponent(taskId)}`)).json() as Promise<TaskView>;
  }

  async postLabel(payload: LabelPayload): Promise<void> {
    await this.request("/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async getReport(): Promise<ReportPayload> {
    return (await this.request("/report")).json() as Promise<ReportPayload>;
  }

  /** Raw JSON-lines export of effective labels. */
  async getExport(): Promise<string> {
    return (await this.request("/export")).text();
  }
}
