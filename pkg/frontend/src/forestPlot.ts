import { groupLabel } from "./format.js";
import { Effect, EffectsResponse } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const LAYOUT = {
  width: 680,
  rowHeight: 28,
  marginLeft: 150,
  marginRight: 24,
  marginTop: 16,
  marginBottom: 16,
};

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

/** Map a data value onto the plot's x pixel range. */
function scaleX(value: number, lo: number, hi: number): number {
  const span = hi - lo || 1;
  const inner = LAYOUT.width - LAYOUT.marginLeft - LAYOUT.marginRight;
  return LAYOUT.marginLeft + ((value - lo) / span) * inner;
}

/**
 * Forest plot: one confidence-interval bar per effect cell, with the point
 * estimate marked and a reference line at zero.  Geometry is scaled from
 * the service's ci_low/ci_high/estimate fields; the same values are kept
 * verbatim in data attributes so nothing displayed is recomputed.
 */
export function renderForestPlot(container: HTMLElement, response: EffectsResponse): SVGSVGElement {
  container.textContent = "";
  const effects = response.effects;
  const height = LAYOUT.marginTop + LAYOUT.marginBottom + effects.length * LAYOUT.rowHeight;

  const svg = svgEl("svg");
  svg.setAttribute("class", "forest-plot");
  svg.setAttribute("width", String(LAYOUT.width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("viewBox", `0 0 ${LAYOUT.width} ${height}`);

  if (effects.length === 0) {
    container.appendChild(svg);
    return svg;
  }

  const lo = Math.min(0, ...effects.map((e) => e.ci_low));
  const hi = Math.max(0, ...effects.map((e) => e.ci_high));

  const zero = svgEl("line");
  zero.setAttribute("class", "zero-line");
  zero.setAttribute("x1", String(scaleX(0, lo, hi)));
  zero.setAttribute("x2", String(scaleX(0, lo, hi)));
  zero.setAttribute("y1", String(LAYOUT.marginTop));
  zero.setAttribute("y2", String(height - LAYOUT.marginBottom));
  svg.appendChild(zero);

  effects.forEach((effect: Effect, i: number) => {
    const y = LAYOUT.marginTop + (i + 0.5) * LAYOUT.rowHeight;
    const bar = svgEl("g");
    bar.setAttribute("class", "ci-bar");
    bar.dataset.group = groupLabel(effect.group_key);
    bar.dataset.estimate = String(effect.estimate);
    bar.dataset.ciLow = String(effect.ci_low);
    bar.dataset.ciHigh = String(effect.ci_high);

    const label = svgEl("text");
    label.setAttribute("class", "row-label");
    label.setAttribute("x", String(LAYOUT.marginLeft - 8));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("text-anchor", "end");
    label.textContent = groupLabel(effect.group_key);
    bar.appendChild(label);

    const interval = svgEl("line");
    interval.setAttribute("class", "ci-interval");
    interval.setAttribute("x1", String(scaleX(effect.ci_low, lo, hi)));
    interval.setAttribute("x2", String(scaleX(effect.ci_high, lo, hi)));
    interval.setAttribute("y1", String(y));
    interval.setAttribute("y2", String(y));
    bar.appendChild(interval);

    const point = svgEl("circle");
    point.setAttribute("class", "point-estimate");
    point.setAttribute("cx", String(scaleX(effect.estimate, lo, hi)));
    point.setAttribute("cy", String(y));
    point.setAttribute("r", "4");
    bar.appendChild(point);

    svg.appendChild(bar);
  });

  container.appendChild(svg);
  return svg;
}
