// SVG profile traces: one row per response (plus a desirability row when
// goals are set), one column per factor.  All numbers come from the server
// state; this module only draws.

import type { Factor, ServerState, Trace } from "./api";

const SVG_NS = "http://www.w3.org/2000/svg";
export const CELL_W = 220;
export const CELL_H = 140;
const PAD = { left: 44, right: 10, top: 10, bottom: 24 };

interface Scale {
  (v: number): number;
}

function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

function el<K extends string>(tag: K, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

function xScaleFor(factor: Factor): { scale: Scale; position(v: number | string): number } {
  if (factor.kind === "continuous") {
    const scale = linearScale(factor.low, factor.high, PAD.left, CELL_W - PAD.right);
    return { scale, position: (v) => scale(Number(v)) };
  }
  const n = Math.max(factor.levels.length - 1, 1);
  const scale = linearScale(0, n, PAD.left, CELL_W - PAD.right);
  return { scale, position: (v) => scale(factor.levels.indexOf(String(v))) };
}

function drawShading(svg: SVGElement, factor: Factor, trace: Trace, x: ReturnType<typeof xScaleFor>) {
  const interval = trace.interval;
  if (interval === null) return;
  const top = PAD.top;
  const height = CELL_H - PAD.top - PAD.bottom;
  const shade = (x0: number, x1: number) => {
    if (x1 - x0 <= 0) return;
    svg.appendChild(
      el("rect", {
        x: x0, y: top, width: x1 - x0, height, class: "infeasible",
        fill: "#d0d0d0", opacity: 0.55,
      }),
    );
  };
  if (factor.kind === "continuous" && !("levels" in interval)) {
    const left = PAD.left;
    const right = CELL_W - PAD.right;
    if (interval.low === null || interval.high === null) {
      shade(left, right);
      return;
    }
    shade(left, x.scale(interval.low));
    shade(x.scale(interval.high), right);
  } else if (factor.kind !== "continuous" && "levels" in interval) {
    const ok = new Set(interval.levels);
    const slot = (CELL_W - PAD.left - PAD.right) / Math.max(factor.levels.length, 1);
    for (const level of factor.levels) {
      if (!ok.has(level)) {
        const cx = x.position(level);
        shade(cx - slot / 2, cx + slot / 2);
      }
    }
  }
}

function drawCurve(
  svg: SVGElement,
  trace: Trace,
  values: number[],
  x: ReturnType<typeof xScaleFor>,
  y: Scale,
  marker: { at: number | string; value: number } | null,
) {
  const points = trace.grid
    .map((g, i) => `${x.position(g).toFixed(2)},${y(values[i]).toFixed(2)}`)
    .join(" ");
  svg.appendChild(
    el("polyline", { points, fill: "none", stroke: "#1f77b4", "stroke-width": 1.6, class: "curve" }),
  );
  if (marker) {
    svg.appendChild(
      el("circle", {
        cx: x.position(marker.at).toFixed(2), cy: y(marker.value).toFixed(2),
        r: 3.5, fill: "#d62728", class: "marker",
      }),
    );
  }
}

function axisLabels(svg: SVGElement, factor: Factor, lo: number, hi: number, y: Scale) {
  const text = (x: number, yy: number, s: string, anchor: string) => {
    const t = el("text", { x, y: yy, "font-size": 9, "text-anchor": anchor, fill: "#444" });
    t.textContent = s;
    svg.appendChild(t);
  };
  text(PAD.left - 4, y(lo) + 3, lo.toPrecision(3), "end");
  text(PAD.left - 4, y(hi) + 3, hi.toPrecision(3), "end");
  if (factor.kind === "continuous") {
    text(PAD.left, CELL_H - 8, factor.low.toPrecision(3), "start");
    text(CELL_W - PAD.right, CELL_H - 8, factor.high.toPrecision(3), "end");
  } else {
    const xs = xScaleFor(factor);
    for (const level of factor.levels) {
      text(xs.position(level), CELL_H - 8, level, "middle");
    }
  }
}

/** Render every trace cell into `container` (cleared first). */
export function renderTraces(container: HTMLElement, state: ServerState): void {
  container.textContent = "";
  const factorsByName = new Map(state.factors.map((f) => [f.name, f]));
  const shade = state.mode !== "off";

  const rows: { label: string; values(t: Trace): number[] | null; lo: number; hi: number }[] =
    state.responses.map((resp) => {
      const all = state.traces.flatMap((t) => t.predicted[resp] ?? []);
      const lo = Math.min(...all);
      const hi = Math.max(...all);
      return { label: resp, values: (t: Trace) => t.predicted[resp] ?? null, lo, hi };
    });
  const anyDesir = state.traces.some((t) => t.desirability !== null);
  if (anyDesir) {
    rows.push({ label: "desirability", values: (t) => t.desirability, lo: 0, hi: 1 });
  }

  for (const row of rows) {
    const rowDiv = document.createElement("div");
    rowDiv.className = "trace-row";
    const label = document.createElement("div");
    label.className = "trace-row-label";
    label.textContent = row.label;
    rowDiv.appendChild(label);

    for (const trace of state.traces) {
      const factor = factorsByName.get(trace.factor);
      if (!factor) continue;
      const cell = document.createElement("div");
      cell.className = "trace-cell";
      cell.dataset.factor = trace.factor;
      cell.dataset.row = row.label;
      const svg = el("svg", { width: CELL_W, height: CELL_H, viewBox: `0 0 ${CELL_W} ${CELL_H}` });
      const x = xScaleFor(factor);
      const y = linearScale(row.lo, row.hi, CELL_H - PAD.bottom, PAD.top);
      if (shade) drawShading(svg, factor, trace, x);
      const values = row.values(trace);
      if (values) {
        const markerValue =
          row.label === "desirability" ? state.desirability : state.predicted[row.label];
        drawCurve(svg, trace, values, x, y,
          markerValue === null || markerValue === undefined
            ? null
            : { at: factor.value, value: markerValue });
      }
      axisLabels(svg, factor, row.lo, row.hi, y);
      cell.appendChild(svg);
      rowDiv.appendChild(cell);
    }
    container.appendChild(rowDiv);
  }
}
