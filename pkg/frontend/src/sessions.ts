import { exact } from "./format.js";
import { SessionDetail, SessionList } from "./types.js";

/**
 * Render the session picker: one selectable row per fitted session, or an
 * empty-state prompt when the service has none.  Sessions are created from
 * the CLI/service side; this list is read-only.
 */
export function renderSessionList(
  container: HTMLElement,
  list: SessionList,
  selectedId: string | null,
  onSelect: (sessionId: string) => void,
): void {
  container.textContent = "";
  if (list.sessions.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent =
      "No sessions yet. Create one from the command line " +
      "(lmfx session create --data ... --spec ...) and refresh.";
    container.appendChild(empty);
    return;
  }
  const table = document.createElement("table");
  table.className = "session-list";
  const head = table.createTHead().insertRow();
  for (const title of ["session", "created", "rows", "params", "groups", "ratio", "fit (s)"]) {
    const th = document.createElement("th");
    th.textContent = title;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const session of list.sessions) {
    const row = body.insertRow();
    row.className = "session-row";
    row.dataset.sessionId = session.session_id;
    if (session.session_id === selectedId) row.classList.add("selected");
    const cells: (string | number)[] = [
      session.session_id,
      session.created_at,
      session.n,
      session.p,
      session.groups,
      session.compression_ratio,
      session.fit_seconds,
    ];
    for (const value of cells) {
      row.insertCell().textContent = exact(value);
    }
    row.addEventListener("click", () => onSelect(session.session_id));
  }
  container.appendChild(table);
}

/** Fill the diagnostics panel for the selected session. */
export function renderDiagnostics(container: HTMLElement, detail: SessionDetail): void {
  const d = detail.diagnostics;
  container.textContent = "";
  const dl = document.createElement("dl");
  dl.className = "diagnostics";
  const entries: [string, string][] = [
    ["session", detail.session_id],
    ["rows (n)", exact(d.n)],
    ["parameters (p)", exact(d.p)],
    ["groups", exact(d.groups)],
    ["compression ratio", exact(d.compression_ratio)],
    ["fit seconds", exact(d.timings["fit"] ?? null)],
    ["fit count", exact(d.fit_count)],
    ["outcomes", d.outcomes.join(", ")],
    ["arms", [d.reference, ...d.arms].join(", ")],
    ["reference", d.reference],
    ["grouping keys", d.grouping_keys.join(", ")],
    ["created", d.created_at],
  ];
  for (const [label, value] of entries) {
    const dt = document.createElement("dt");
    dt.textContent = label;
    const dd = document.createElement("dd");
    dd.dataset.field = label;
    dd.textContent = value;
    dl.appendChild(dt);
    dl.appendChild(dd);
  }
  container.appendChild(dl);
}
