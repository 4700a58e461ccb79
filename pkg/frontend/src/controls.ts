// Factor controls (sliders and level pickers) and the request coalescer
// that keeps at most one factor mutation in flight per session.

import type { Factor } from "./api";

/** Runs async tasks one at a time; while a task is in flight only the most
 * recently pushed task is kept, so a burst of slider events reconciles with
 * a single trailing round trip. */
export class Coalescer {
  private inFlight = false;
  private queued: (() => Promise<void>) | null = null;

  push(task: () => Promise<void>): void {
    if (this.inFlight) {
      this.queued = task;
      return;
    }
    this.inFlight = true;
    void task().finally(() => {
      this.inFlight = false;
      const next = this.queued;
      this.queued = null;
      if (next) this.push(next);
    });
  }

  get busy(): boolean {
    return this.inFlight;
  }
}

export interface ControlCallbacks {
  onEdit(factor: string, value: number | string): void;
  onCommit(factor: string, value: number | string): void;
}

export function buildControl(
  factor: Factor,
  displayValue: number | string,
  frozen: boolean,
  cb: ControlCallbacks,
): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "factor-control";
  wrap.dataset.factor = factor.name;

  const label = document.createElement("label");
  label.textContent = factor.name;
  wrap.appendChild(label);

  if (factor.kind === "continuous") {
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = String(factor.low);
    slider.max = String(factor.high);
    slider.step = String((factor.high - factor.low) / 1000);
    slider.value = String(displayValue);
    slider.className = "factor-slider";
    slider.disabled = frozen;
    const readout = document.createElement("span");
    readout.className = "factor-value";
    readout.textContent = Number(displayValue).toPrecision(5);
    slider.addEventListener("input", () => {
      const value = Number(slider.value);
      readout.textContent = value.toPrecision(5);
      cb.onEdit(factor.name, value);
      cb.onCommit(factor.name, value);
    });
    wrap.appendChild(slider);
    wrap.appendChild(readout);
  } else {
    const select = document.createElement("select");
    select.className = "factor-picker";
    select.disabled = frozen;
    for (const level of factor.levels) {
      const opt = document.createElement("option");
      opt.value = level;
      opt.textContent = level;
      opt.selected = level === String(displayValue);
      select.appendChild(opt);
    }
    select.addEventListener("change", () => {
      cb.onEdit(factor.name, select.value);
      cb.onCommit(factor.name, select.value);
    });
    wrap.appendChild(select);
  }

  if (frozen) {
    const note = document.createElement("span");
    note.className = "frozen-note";
    note.textContent = "no feasible values at the current settings; control frozen";
    wrap.appendChild(note);
  }
  return wrap;
}
