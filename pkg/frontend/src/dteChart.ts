import { Effect, EffectsResponse } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const LAYOUT = {
  width: 680,
  height: 300,
  marginLeft: 56,
  marginRight: 24,
  marginTop: 16,
  marginBottom: 36,
};

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

/**
 * True when a grouped response is a time slice: exactly one grouping key
 * and every cell keyed by a single number.  Such responses draw as a line
 * through time; anything else belongs on the forest plot.
 */
export function isTimeGrouping(response: EffectsResponse): boolean {
  if (response.query.group_by.length !== 1) return false;
  if (response.effects.length === 0) return false;
  return response.effects.every(
    (e) => e.group_key.length === 1 && typeof e.group_key[0] === "number",
  );
}

/**
 * Dynamic-treatment-effect chart: the per-period estimates as a line, the
 * confidence bounds as a shaded band.  Periods, estimates and bounds are
 * taken directly from the response cells and echoed into data attributes.
 */
export function renderDteChart(container: HTMLElement, response: EffectsResponse): SVGSVGElement {
  container.textContent = "";
  const { width, height, marginLeft, marginRight, marginTop, marginBottom } = LAYOUT;

  const svg = svgEl("svg");
  svg.setAttribute("class", "dte-chart");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);

  const cells = response.effects
    .slice()
    .sort((a, b) => Number(a.group_key[0]) - Number(b.group_key[0]));
  if (cells.length === 0) {
    container.appendChild(svg);
    return svg;
  }

  const periods = cells.map((e) => Number(e.group_key[0]));
  const yLo = Math.min(0, ...cells.map((e) => e.ci_low));
  const yHi = Math.max(0, ...cells.map((e) => e.ci_high));
  const tLo = periods[0];
  const tHi = periods[periods.length - 1];

  const x = (t: number): number => {
    const span = tHi - tLo || 1;
    return marginLeft + ((t - tLo) / span) * (width - marginLeft - marginRight);
  };
  const y = (v: number): number => {
    const span = yHi - yLo || 1;
    return height - marginBottom - ((v - yLo) / span) * (height - marginTop - marginBottom);
  };

  const band = svgEl("polygon");
  band.setAttribute("class", "ci-band");
  const upper = cells.map((e, i) => `${x(periods[i])},${y(e.ci_high)}`);
  const lower = cells
    .slice()
    .reverse()
    .map((e, i) => `${x(periods[cells.length - 1 - i])},${y(e.ci_low)}`);
  band.setAttribute("points", [...upper, ...lower].join(" "));
  svg.appendChild(band);

  const zero = svgEl("line");
  zero.setAttribute("class", "zero-line");
  zero.setAttribute("x1", String(marginLeft));
  zero.setAttribute("x2", String(width - marginRight));
  zero.setAttribute("y1", String(y(0)));
  zero.setAttribute("y2", String(y(0)));
  svg.appendChild(zero);

  const line = svgEl("polyline");
  line.setAttribute("class", "effect-line");
  line.setAttribute("fill", "none");
  line.setAttribute(
    "points",
    cells.map((e, i) => `${x(periods[i])},${y(e.estimate)}`).join(" "),
  );
  svg.appendChild(line);

  cells.forEach((effect: Effect, i: number) => {
    const point = svgEl("circle");
    point.setAttribute("class", "dte-point");
    point.setAttribute("cx", String(x(periods[i])));
    point.setAttribute("cy", String(y(effect.estimate)));
    point.setAttribute("r", "3.5");
    point.dataset.period = String(effect.group_key[0]);
    point.dataset.estimate = String(effect.estimate);
    point.dataset.ciLow = String(effect.ci_low);
    point.dataset.ciHigh = String(effect.ci_high);
    svg.appendChild(point);

    const tick = svgEl("text");
    tick.setAttribute("class", "axis-tick");
    tick.setAttribute("x", String(x(periods[i])));
    tick.setAttribute("y", String(height - marginBottom + 18));
    tick.setAttribute("text-anchor", "middle");
    tick.textContent = String(effect.group_key[0]);
    svg.appendChild(tick);
  });

  container.appendChild(svg);
  return svg;
}
