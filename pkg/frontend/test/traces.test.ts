// Trace rendering: vertex counts, feasible shading alignment, markers.

import { beforeEach, describe, expect, it } from "vitest";

import { renderTraces } from "../src/traces";
import type { ServerState } from "../src/api";
import { FakeServer } from "./helpers";

function stateWithGrid(gridPoints: number, mode: "off" | "warn" | "constrain" = "warn"): ServerState {
  const fake = new FakeServer({ gridPoints });
  const id = "direct";
  fake.sessions.set(id, {
    mode,
    goals: { y: { goal: "maximize", low: 0, high: 25 } },
    settings: { a: 5, b: 0 },
  });
  return fake.state(id);
}

function parsePoints(poly: Element): [number, number][] {
  return (poly.getAttribute("points") ?? "")
    .split(" ")
    .filter(Boolean)
    .map((pair) => {
      const [x, y] = pair.split(",").map(Number);
      return [x, y];
    });
}

describe("renderTraces", () => {
  let container: HTMLElement;

  beforeEach(() => {
    container = document.createElement("div");
    document.body.appendChild(container);
  });

  it("renders one vertex per grid point (101-point contract)", () => {
    renderTraces(container, stateWithGrid(101));
    const cell = container.querySelector('.trace-cell[data-factor="a"][data-row="y"]')!;
    const poly = cell.querySelector("polyline.curve")!;
    expect(parsePoints(poly)).toHaveLength(101);
  });

  it("adds a desirability row when goals are set", () => {
    renderTraces(container, stateWithGrid(31));
    const labels = [...container.querySelectorAll(".trace-row-label")].map(
      (n) => n.textContent,
    );
    expect(labels).toEqual(["y", "desirability"]);
  });

  it("aligns shading edges with the feasible interval", () => {
    const state = stateWithGrid(101);
    renderTraces(container, state);
    const cell = container.querySelector('.trace-cell[data-factor="a"][data-row="y"]')!;
    const rects = [...cell.querySelectorAll("rect.infeasible")];
    expect(rects).toHaveLength(2);

    const poly = parsePoints(cell.querySelector("polyline.curve")!);
    const trace = state.traces.find((t) => t.factor === "a")!;
    const grid = trace.grid as number[];
    // x positions are affine in the grid value: recover the map from two vertices
    const slope = (poly[1][0] - poly[0][0]) / (grid[1] - grid[0]);
    const xOf = (v: number) => poly[0][0] + (v - grid[0]) * slope;

    const interval = trace.interval as { low: number; high: number };
    const [leftShade, rightShade] = rects.map((r) => ({
      x0: Number(r.getAttribute("x")),
      x1: Number(r.getAttribute("x")) + Number(r.getAttribute("width")),
    }));
    expect(Math.abs(leftShade.x1 - xOf(interval.low))).toBeLessThan(0.6);
    expect(Math.abs(rightShade.x0 - xOf(interval.high))).toBeLessThan(0.6);
  });

  it("shades the whole cell when the feasible interval is empty", () => {
    const state = stateWithGrid(21);
    state.traces[0].interval = { low: null, high: null };
    renderTraces(container, state);
    const cell = container.querySelector('.trace-cell[data-factor="a"][data-row="y"]')!;
    const rects = [...cell.querySelectorAll("rect.infeasible")];
    expect(rects).toHaveLength(1);
  });

  it("keeps the current-setting marker on the trace curve", () => {
    const state = stateWithGrid(101);
    renderTraces(container, state);
    const cell = container.querySelector('.trace-cell[data-factor="a"][data-row="y"]')!;
    const marker = cell.querySelector("circle.marker")!;
    const poly = parsePoints(cell.querySelector("polyline.curve")!);
    const cx = Number(marker.getAttribute("cx"));
    const cy = Number(marker.getAttribute("cy"));
    // interpolate the curve at the marker x; the marker must sit on it
    let best = Infinity;
    for (let i = 0; i + 1 < poly.length; i++) {
      const [x0, y0] = poly[i];
      const [x1, y1] = poly[i + 1];
      if (cx >= Math.min(x0, x1) - 0.01 && cx <= Math.max(x0, x1) + 0.01) {
        const t = x1 === x0 ? 0 : (cx - x0) / (x1 - x0);
        best = Math.min(best, Math.abs(y0 + t * (y1 - y0) - cy));
      }
    }
    expect(best).toBeLessThan(0.6);
  });

  it("does not shade in off mode", () => {
    renderTraces(container, stateWithGrid(21, "off"));
    expect(container.querySelectorAll("rect.infeasible")).toHaveLength(0);
  });
});
