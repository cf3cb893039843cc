import { beforeEach, describe, expect, it } from "vitest";

import { renderDiagnostics, renderSessionList } from "../src/sessions.js";
import { SessionDetail, SessionList } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const sessions = loadFixture<SessionList>("sessions.json");
const empty = loadFixture<SessionList>("sessions_empty.json");
const detail = loadFixture<SessionDetail>("session_detail.json");

let container: HTMLElement;

beforeEach(() => {
  container = document.createElement("div");
});

describe("renderSessionList", () => {
  it("shows one selectable row per session with its summary numbers", () => {
    renderSessionList(container, sessions, null, () => {});
    const rows = container.querySelectorAll<HTMLTableRowElement>(".session-row");
    expect(rows).toHaveLength(sessions.sessions.length);
    const first = sessions.sessions[0];
    const cells = rows[0].cells;
    expect(cells[0].textContent).toBe(first.session_id);
    expect(Number(cells[2].textContent)).toBe(first.n);
    expect(Number(cells[3].textContent)).toBe(first.p);
    expect(Number(cells[4].textContent)).toBe(first.groups);
    expect(Number(cells[5].textContent)).toBe(first.compression_ratio);
    expect(Number(cells[6].textContent)).toBe(first.fit_seconds);
  });

  it("invokes the selection callback with the clicked session id", () => {
    let picked: string | null = null;
    renderSessionList(container, sessions, null, (id) => {
      picked = id;
    });
    container.querySelector<HTMLTableRowElement>(".session-row")!.click();
    expect(picked).toBe(sessions.sessions[0].session_id);
  });

  it("marks the currently selected session", () => {
    const id = sessions.sessions[0].session_id;
    renderSessionList(container, sessions, id, () => {});
    expect(container.querySelector(".session-row.selected")).not.toBeNull();
  });

  it("renders an empty-state prompt when no sessions exist", () => {
    renderSessionList(container, empty, null, () => {});
    expect(container.querySelector(".session-row")).toBeNull();
    const prompt = container.querySelector(".empty-state");
    expect(prompt).not.toBeNull();
    expect(prompt!.textContent).toContain("No sessions");
  });
});

describe("renderDiagnostics", () => {
  it("displays n, p, groups, compression ratio and fit time verbatim", () => {
    renderDiagnostics(container, detail);
    const field = (name: string): string =>
      container.querySelector<HTMLElement>(`dd[data-field="${name}"]`)!.textContent!;
    const d = detail.diagnostics;
    expect(Number(field("rows (n)"))).toBe(d.n);
    expect(Number(field("parameters (p)"))).toBe(d.p);
    expect(Number(field("groups"))).toBe(d.groups);
    expect(Number(field("compression ratio"))).toBe(d.compression_ratio);
    expect(Number(field("fit seconds"))).toBe(d.timings["fit"]);
    expect(Number(field("fit count"))).toBe(d.fit_count);
    expect(field("outcomes")).toBe(d.outcomes.join(", "));
    expect(field("grouping keys")).toBe(d.grouping_keys.join(", "));
  });
});
