import { describe, expect, it } from "vitest";

import { ApiError, DashboardClient, ServiceDownError, effectsUrl } from "../src/client.js";
import { EffectsResponse, ErrorResponse, SessionList } from "../src/types.js";
import { jsonResponse, loadFixture, routedFetch } from "./helpers.js";

describe("effectsUrl", () => {
  it("builds the query string from params", () => {
    const url = effectsUrl("http://svc:8000", "abc123", {
      outcome: "m01",
      arm: "arm01",
      groupBy: ["country"],
      covariance: "hc1",
    });
    expect(url).toBe(
      "http://svc:8000/sessions/abc123/effects?outcome=m01&arm=arm01&group_by=country&covariance=hc1",
    );
  });

  it("repeats group_by for composite slices and carries the level", () => {
    const url = effectsUrl("http://svc:8000", "s", {
      outcome: "m01",
      arm: "arm01",
      groupBy: ["country", "period"],
      level: 0.9,
    });
    const parsed = new URL(url);
    expect(parsed.searchParams.getAll("group_by")).toEqual(["country", "period"]);
    expect(parsed.searchParams.get("level")).toBe("0.9");
    expect(parsed.searchParams.get("covariance")).toBeNull();
  });

  it("escapes session ids", () => {
    const url = effectsUrl("http://svc:8000", "a/b", { outcome: "y", arm: "t" });
    expect(url).toContain("/sessions/a%2Fb/effects");
  });
});

describe("DashboardClient", () => {
  const sessions = loadFixture<SessionList>("sessions.json");
  const ate = loadFixture<EffectsResponse>("effects_ate.json");
  const conflict = loadFixture<ErrorResponse>("error_409.json");

  it("strips trailing slashes from the base url", () => {
    const client = new DashboardClient("http://svc:8000///");
    expect(client.baseUrl).toBe("http://svc:8000");
  });

  it("fetches and types the session list", async () => {
    const fetchFn = routedFetch([
      { match: (u) => u.endsWith("/sessions"), reply: () => jsonResponse(sessions) },
    ]);
    const client = new DashboardClient("http://svc:8000", fetchFn);
    const list = await client.listSessions();
    expect(fetchFn.calls).toEqual(["http://svc:8000/sessions"]);
    expect(list.schema_version).toBe("1");
    expect(list.sessions[0].session_id).toBe(sessions.sessions[0].session_id);
  });

  it("fetches effects with the encoded query", async () => {
    const fetchFn = routedFetch([
      { match: (u) => u.includes("/effects?"), reply: () => jsonResponse(ate) },
    ]);
    const client = new DashboardClient("http://svc:8000", fetchFn);
    const response = await client.getEffects("s1", {
      outcome: "m01",
      arm: "arm01",
      covariance: "hc1",
    });
    expect(fetchFn.calls[0]).toContain("outcome=m01");
    expect(fetchFn.calls[0]).toContain("covariance=hc1");
    expect(response.effects).toHaveLength(1);
    expect(response.effects[0].estimate).toBe(ate.effects[0].estimate);
  });

  it("turns a non-2xx reply into an ApiError with the envelope", async () => {
    const fetchFn = routedFetch([{ match: () => true, reply: () => jsonResponse(conflict, 409) }]);
    const client = new DashboardClient("http://svc:8000", fetchFn);
    const err = await client
      .getEffects("s1", { outcome: "m01", arm: "arm01", groupBy: ["user"] })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(409);
    expect(apiErr.body?.type).toBe("GroupKeyError");
    expect(apiErr.body?.message).toBe(conflict.error.message);
  });

  it("maps a network failure to ServiceDownError", async () => {
    const client = new DashboardClient("http://svc:8000", () =>
      Promise.reject(new TypeError("fetch failed")),
    );
    const err = await client.listSessions().then(() => null).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceDownError);
    expect((err as ServiceDownError).message).toContain("http://svc:8000");
  });
});
