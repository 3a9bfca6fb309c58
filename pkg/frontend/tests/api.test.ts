import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function fakeFetch(handler: (url: string, init?: RequestInit) => Response) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("returns null on an empty queue (204)", async () => {
    const { impl } = fakeFetch(() => new Response(null, { status: 204 }));
    const client = new ApiClient("http://svc", impl);
    expect(await client.queueNext("r1")).toBeNull();
  });

  it("parses a leased item and encodes the reviewer", async () => {
    const { impl, calls } = fakeFetch(() => jsonResponse({ shape_id: "a", status: "LEASED" }));
    const client = new ApiClient("http://svc/", impl);
    const item = await client.queueNext("team/1");
    expect(item?.shape_id).toBe("a");
    expect(calls[0].url).toBe("http://svc/queue/next?reviewer=team%2F1");
  });

  it("posts decisions as JSON", async () => {
    const { impl, calls } = fakeFetch(() => jsonResponse({ shape_id: "a", status: "REVIEWED" }));
    const client = new ApiClient("http://svc", impl);
    const decision = {
      reviewer: "r1",
      revision: 0,
      verdicts: [{ partlet_index: 0, verdict: "ACCEPT" as const }],
    };
    await client.submitDecision("a", decision);
    expect(calls[0].url).toBe("http://svc/items/a/decision");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual(decision);
  });

  it("raises ApiError with detail and suggestions from the error body", async () => {
    const { impl } = fakeFetch(() =>
      jsonResponse({ detail: "unknown label", suggestions: ["backrest"] }, 422));
    const client = new ApiClient("http://svc", impl);
    const err = await client
      .submitDecision("a", { reviewer: "r", revision: 0, verdicts: [] })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).detail).toBe("unknown label");
    expect((err as ApiError).suggestions).toEqual(["backrest"]);
  });

  it("queries vocab with the class parameter", async () => {
    const { impl, calls } = fakeFetch(() =>
      jsonResponse({ object_class: "chair", labels: ["seat"] }));
    const client = new ApiClient("http://svc", impl);
    const vocab = await client.vocab("chair");
    expect(vocab.labels).toEqual(["seat"]);
    expect(calls[0].url).toBe("http://svc/vocab?class=chair");
  });

  it("passes export status filters through", async () => {
    const { impl, calls } = fakeFetch(() => jsonResponse({ format: "x", items: [] }));
    const client = new ApiClient("http://svc", impl);
    await client.exportItems(["REVIEWED", "AUTO_ACCEPTED"]);
    expect(calls[0].url).toBe("http://svc/export?status=REVIEWED%2CAUTO_ACCEPTED");
  });
});
