import { describe, expect, it } from "vitest";

import { ApiError, Client, type FetchLike } from "../src/api.js";

interface Call {
  url: string;
  body: unknown;
}

function stub(status: number, payload: unknown): { fetch: FetchLike; calls: Call[] } {
  const calls: Call[] = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({ url, body: init?.body ? JSON.parse(init.body as string) : undefined });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    };
  };
  return { fetch, calls };
}

describe("Client", () => {
  it("posts session parameters to /session", async () => {
    const { fetch, calls } = stub(200, { session_id: "abc", canonical_png_b64: "xx" });
    const client = new Client("http://h:1", fetch);
    const out = await client.newSession(7, 16, "ckpt/final");
    expect(out.session_id).toBe("abc");
    expect(calls[0]?.url).toBe("http://h:1/session");
    expect(calls[0]?.body).toEqual({ seed: 7, frames: 16, checkpoint: "ckpt/final" });
  });

  it("omits optional session fields when unset", async () => {
    const { fetch, calls } = stub(200, { session_id: "abc", canonical_png_b64: "xx" });
    await new Client("http://h:1", fetch).newSession(3);
    expect(calls[0]?.body).toEqual({ seed: 3 });
  });

  it("routes each operation to its endpoint", async () => {
    const { fetch, calls } = stub(200, {
      frames_png_b64: [],
      trajectory: [],
      masks_png_b64: [],
    });
    const client = new Client("http://h:1", fetch);
    await client.resample("s", 9);
    await client.edit("s", "B64");
    await client.track("s", 4, 5);
    await client.mask("s", "M64");
    expect(calls.map((c) => c.url)).toEqual([
      "http://h:1/session/s/resample",
      "http://h:1/session/s/edit",
      "http://h:1/session/s/track",
      "http://h:1/session/s/mask",
    ]);
    expect(calls[0]?.body).toEqual({ motion_seed: 9 });
    expect(calls[1]?.body).toEqual({ edited_canonical_png_b64: "B64" });
    expect(calls[2]?.body).toEqual({ x: 4, y: 5 });
    expect(calls[3]?.body).toEqual({ mask_png_b64: "M64" });
  });

  it("maps structured error bodies to ApiError", async () => {
    const { fetch } = stub(404, {
      detail: { error: "unknown_session", message: "no such session" },
    });
    const client = new Client("http://h:1", fetch);
    const err = await client.resample("gone", 1).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(404);
    expect(apiErr.code).toBe("unknown_session");
    expect(apiErr.message).toBe("no such session");
  });

  it("survives unstructured error bodies", async () => {
    const { fetch } = stub(500, "oops");
    const err = await new Client("http://h:1", fetch)
      .track("s", 0, 0)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("unknown_error");
  });

  it("maps network failures to an unreachable ApiError", async () => {
    const fetch: FetchLike = async () => {
      throw new TypeError("fetch failed");
    };
    const err = await new Client("http://h:1", fetch)
      .newSession(0)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(0);
    expect((err as ApiError).code).toBe("unreachable");
  });

  it("health returns false instead of throwing", async () => {
    const down: FetchLike = async () => {
      throw new TypeError("refused");
    };
    expect(await new Client("http://h:1", down).health()).toBe(false);
    const { fetch } = stub(200, { status: "ok" });
    expect(await new Client("http://h:1", fetch).health()).toBe(true);
  });
});
