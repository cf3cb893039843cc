import { exact, groupLabel } from "./format.js";
import { EffectsResponse } from "./types.js";

const COLUMNS = [
  "group",
  "estimate",
  "std_error",
  "statistic",
  "p_value",
  "ci_low",
  "ci_high",
  "n_group",
  "arm_support",
] as const;

/**
 * Render the estimates table, one row per effect cell.  Every numeric cell
 * is the service's value verbatim (class names match the response fields so
 * tests and stylesheets can address them).
 */
export function renderEffectsTable(container: HTMLElement, response: EffectsResponse): void {
  container.textContent = "";
  const table = document.createElement("table");
  table.className = "effects-table";
  const head = table.createTHead().insertRow();
  for (const name of COLUMNS) {
    const th = document.createElement("th");
    th.textContent = name;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const effect of response.effects) {
    const row = body.insertRow();
    row.className = "effect-row";
    row.dataset.groupKey = JSON.stringify(effect.group_key);

    const group = row.insertCell();
    group.className = "group";
    group.textContent = groupLabel(effect.group_key);

    for (const field of ["estimate", "std_error", "statistic", "p_value", "ci_low", "ci_high", "n_group"] as const) {
      const cell = row.insertCell();
      cell.className = `num ${field}`;
      cell.textContent = exact(effect[field]);
    }

    const support = row.insertCell();
    support.className = "arm_support";
    const badge = document.createElement("span");
    badge.className = `badge badge-${effect.arm_support.replace(/_/g, "-")}`;
    badge.textContent = effect.arm_support;
    support.appendChild(badge);
  }
  container.appendChild(table);

  const caption = document.createElement("p");
  caption.className = "query-caption";
  caption.textContent =
    `${response.query.outcome} · ${response.query.arm} vs reference · ` +
    `${response.query.covariance} covariance · level ${exact(response.query.confidence_level)}`;
  container.appendChild(caption);
}
