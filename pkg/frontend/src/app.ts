import { clearBanner, renderErrorBanner } from "./banner.js";
import { DashboardClient, EffectsParams, FetchLike } from "./client.js";
import { renderDteChart, isTimeGrouping } from "./dteChart.js";
import { renderEffectsTable } from "./effectsTable.js";
import { renderForestPlot } from "./forestPlot.js";
import { latestWins } from "./latest.js";
import { renderDiagnostics, renderSessionList } from "./sessions.js";
import { COVARIANCE_TYPES, EffectsResponse, SessionDetail } from "./types.js";

export interface DashboardOptions {
  baseUrl?: string;
  fetchFn?: FetchLike;
}

const DEFAULT_BASE_URL = "http://localhost:8000";

function option(value: string, label?: string): HTMLOptionElement {
  const el = document.createElement("option");
  el.value = value;
  el.textContent = label ?? value;
  return el;
}

/**
 * The interactive loop: pick a session, choose outcome/arm/slice/covariance,
 * read the table and charts, pivot to the next slice.  Each control change
 * issues exactly one effects query; a newer change supersedes any still in
 * flight.  All statistics come from the service — this class only routes
 * responses to renderers.
 */
export class Dashboard {
  readonly client: DashboardClient;
  readonly outcomeSelect: HTMLSelectElement;
  readonly armSelect: HTMLSelectElement;
  readonly groupBySelect: HTMLSelectElement;
  readonly groupByInput: HTMLInputElement;
  readonly covarianceSelect: HTMLSelectElement;

  private bannerSlot: HTMLElement;
  private sessionSlot: HTMLElement;
  private diagnosticsSlot: HTMLElement;
  private tableSlot: HTMLElement;
  private chartSlot: HTMLElement;
  private session: SessionDetail | null = null;
  private fetchEffects: (sessionId: string, params: EffectsParams) => Promise<EffectsResponse | null>;

  /** Responses applied to the screen, oldest first (exposed for tests). */
  readonly applied: EffectsResponse[] = [];

  constructor(root: HTMLElement, options: DashboardOptions = {}) {
    this.client = new DashboardClient(options.baseUrl ?? DEFAULT_BASE_URL, options.fetchFn);
    this.fetchEffects = latestWins((sessionId: string, params: EffectsParams) =>
      this.client.getEffects(sessionId, params),
    );

    root.textContent = "";
    this.bannerSlot = this.slot(root, "banner-slot");
    this.sessionSlot = this.slot(root, "sessions-panel");
    this.diagnosticsSlot = this.slot(root, "diagnostics-panel");

    const controls = document.createElement("div");
    controls.className = "controls";
    root.appendChild(controls);
    this.outcomeSelect = this.control(controls, "outcome");
    this.armSelect = this.control(controls, "arm");
    this.groupBySelect = this.control(controls, "group-by");
    this.groupByInput = this.customGroupInput(controls);
    this.covarianceSelect = this.control(controls, "covariance");

    this.tableSlot = this.slot(root, "table-slot");
    this.chartSlot = this.slot(root, "chart-slot");
    this.setControlsEnabled(false);
  }

  private slot(root: HTMLElement, className: string): HTMLElement {
    const el = document.createElement("div");
    el.className = className;
    root.appendChild(el);
    return el;
  }

  private control(parent: HTMLElement, name: string): HTMLSelectElement {
    const label = document.createElement("label");
    label.textContent = name;
    const select = document.createElement("select");
    select.className = `control control-${name}`;
    select.addEventListener("change", () => {
      if (select === this.groupBySelect) this.groupByInput.value = "";
      void this.runQuery();
    });
    label.appendChild(select);
    parent.appendChild(label);
    return select;
  }

  /**
   * Free-text slice column.  The dropdown only lists the fit's compression
   * keys; any other data column typed here reaches the service, whose 409
   * reply explains how to make that column sliceable.
   */
  private customGroupInput(parent: HTMLElement): HTMLInputElement {
    const label = document.createElement("label");
    label.textContent = "slice by column";
    const input = document.createElement("input");
    input.type = "text";
    input.className = "control control-custom-group";
    input.placeholder = "e.g. user";
    input.addEventListener("change", () => {
      void this.runQuery();
    });
    label.appendChild(input);
    parent.appendChild(label);
    return input;
  }

  private setControlsEnabled(enabled: boolean): void {
    const controls = [this.outcomeSelect, this.armSelect, this.groupBySelect, this.covarianceSelect];
    for (const select of controls) {
      select.disabled = !enabled;
    }
    this.groupByInput.disabled = !enabled;
  }

  /** Load (or reload) the session list; the entry point after construction. */
  async start(): Promise<void> {
    try {
      const list = await this.client.listSessions();
      clearBanner(this.bannerSlot);
      renderSessionList(this.sessionSlot, list, this.session?.session_id ?? null, (id) => {
        void this.selectSession(id);
      });
      // A session deleted on the server disappears from the refreshed list;
      // drop its panels rather than keep showing stale diagnostics.
      if (this.session && !list.sessions.some((s) => s.session_id === this.session?.session_id)) {
        this.session = null;
        this.diagnosticsSlot.textContent = "";
        this.tableSlot.textContent = "";
        this.chartSlot.textContent = "";
        this.setControlsEnabled(false);
      }
    } catch (err) {
      renderErrorBanner(this.bannerSlot, err, () => {
        void this.start();
      });
    }
  }

  async selectSession(sessionId: string): Promise<void> {
    try {
      const detail = await this.client.getSession(sessionId);
      this.session = detail;
      clearBanner(this.bannerSlot);
      renderDiagnostics(this.diagnosticsSlot, detail);
      this.populateControls(detail);
      this.setControlsEnabled(true);
      await this.runQuery();
    } catch (err) {
      renderErrorBanner(this.bannerSlot, err, () => {
        void this.selectSession(sessionId);
      });
    }
  }

  private populateControls(detail: SessionDetail): void {
    const d = detail.diagnostics;
    this.outcomeSelect.textContent = "";
    for (const outcome of d.outcomes) this.outcomeSelect.appendChild(option(outcome));
    this.armSelect.textContent = "";
    for (const arm of d.arms) this.armSelect.appendChild(option(arm, `${arm} vs ${d.reference}`));
    this.groupBySelect.textContent = "";
    this.groupBySelect.appendChild(option("", "overall (ATE)"));
    for (const key of d.grouping_keys) this.groupBySelect.appendChild(option(key, `by ${key}`));
    this.covarianceSelect.textContent = "";
    // CR1 needs a declared cluster key; hide it when the fit has none.
    const types = COVARIANCE_TYPES.filter((t) => t !== "cr1" || d.n_clusters > 0);
    for (const type of types) this.covarianceSelect.appendChild(option(type));
  }

  /** Current control state as query parameters; typed column wins over dropdown. */
  params(): EffectsParams {
    const custom = this.groupByInput.value.trim();
    const chosen = custom || this.groupBySelect.value;
    return {
      outcome: this.outcomeSelect.value,
      arm: this.armSelect.value,
      groupBy: chosen ? [chosen] : [],
      covariance: this.covarianceSelect.value || "homoskedastic",
    };
  }

  /**
   * Issue one effects query for the current controls and render whatever
   * comes back, unless a newer query has superseded this one by then.
   */
  async runQuery(): Promise<void> {
    if (!this.session) return;
    try {
      const response = await this.fetchEffects(this.session.session_id, this.params());
      if (response === null) return; // superseded: a newer query owns the screen
      this.applyEffects(response);
    } catch (err) {
      renderErrorBanner(this.bannerSlot, err);
    }
  }

  /** Route a response to the table and the appropriate chart. */
  applyEffects(response: EffectsResponse): void {
    clearBanner(this.bannerSlot);
    this.applied.push(response);
    renderEffectsTable(this.tableSlot, response);
    if (isTimeGrouping(response)) {
      renderDteChart(this.chartSlot, response);
    } else {
      renderForestPlot(this.chartSlot, response);
    }
  }
}
