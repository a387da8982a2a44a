import { describe, expect, it } from "vitest";

import { AnnotationApi, ApiError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";

const jsonResponse = (body: unknown, status = 200): Response =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });

describe("AnnotationApi", () => {
  it("posts labels as JSON to /labels", async () => {
    const calls: Array<{ url: string; init?: RequestInit }> = [];
    const fetchFn: FetchLike = async (url, init) => {
      calls.push({ url, init });
      return jsonResponse({ ok: true });
    };
    const api = new AnnotationApi("http://svc:1234", fetchFn);
    await api.postLabel({
      task_id: "t1",
      fluency_issue: true,
      adequacy_issue: false,
      circular_override: null,
      annotator: "me",
    });
    expect(calls[0]?.url).toBe("http://svc:1234/labels");
    expect(calls[0]?.init?.method).toBe("POST");
    const body = JSON.parse(String(calls[0]?.init?.body));
    expect(body.task_id).toBe("t1");
    expect(body.fluency_issue).toBe(true);
  });

  it("maps transport failures to offline errors", async () => {
    const api = new AnnotationApi("http://svc", async () => {
      throw new TypeError("fetch failed");
    });
    const error = await api.listTasks().catch((e) => e as ApiError);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).offline).toBe(true);
  });

  it("surfaces HTTP error details without marking offline", async () => {
    const api = new AnnotationApi("http://svc", async () =>
      jsonResponse({ detail: "unknown task 'x'" }, 404),
    );
    const error = await api
      .postLabel({
        task_id: "x",
        fluency_issue: false,
        adequacy_issue: false,
        circular_override: null,
        annotator: "me",
      })
      .catch((e) => e as ApiError);
    expect((error as ApiError).status).toBe(404);
    expect((error as ApiError).offline).toBe(false);
    expect((error as ApiError).message).toContain("unknown task");
  });
});
