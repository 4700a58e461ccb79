// Application wiring: bootstrap a session, render the profiler view as a
// pure projection of the store, and reconcile every edit with the server.
// No prediction or metric math happens here; the service is the single
// source of truth for every number on screen.

import { ApiError, ProfilerApi } from "./api";
import type { GoalDoc, Mode, OptimumReport, ServerState } from "./api";
import { Coalescer, buildControl } from "./controls";
import { SessionStore } from "./state";
import { renderTraces } from "./traces";

export interface AppOptions {
  api: ProfilerApi;
  root: HTMLElement;
  model?: string;
  initialMode?: Mode;
  /** milliseconds for the optimize slider animation; 0 disables */
  animateMs?: number;
}

const MODES: Mode[] = ["off", "warn", "constrain"];

function defaultGoals(state: ServerState): Record<string, GoalDoc> {
  const goals: Record<string, GoalDoc> = {};
  for (const resp of state.responses) {
    const [low, high] = state.response_ranges[resp];
    goals[resp] = { goal: "maximize", low, high, importance: 1 };
  }
  return goals;
}

export class ProfilerApp {
  readonly api: ProfilerApi;
  readonly root: HTMLElement;
  store!: SessionStore;
  private coalescer = new Coalescer();
  private goals: Record<string, GoalDoc> = {};
  private model = "";
  private animateMs: number;

  constructor(private options: AppOptions) {
    this.api = options.api;
    this.root = options.root;
    this.animateMs = options.animateMs ?? 250;
  }

  // -- bootstrap -----------------------------------------------------------

  async boot(sessionFromHash: string | null): Promise<void> {
    if (sessionFromHash) {
      try {
        const doc = await this.api.getSession(sessionFromHash);
        this.goals = doc.state.goals;
        this.attach(doc.session, doc.state);
        return;
      } catch (err) {
        if (!(err instanceof ApiError) || err.status !== 404) throw err;
      }
    }
    const models = await this.api.listModels();
    if (models.models.length === 0) throw new Error("no model artifacts on the server");
    this.model = this.options.model ?? models.models[0];
    const mode = this.options.initialMode ?? "warn";
    const bare = await this.api.createSession(this.model, mode, {});
    this.goals = defaultGoals(bare.state);
    const doc = await this.api.createSession(this.model, mode, this.goals);
    this.attach(doc.session, doc.state);
  }

  private attach(sessionId: string, state: ServerState) {
    this.store = new SessionStore(sessionId, state);
    this.store.subscribe(() => this.render());
    window.location.hash = `s=${sessionId}`;
    this.render();
  }

  // -- interactions ----------------------------------------------------------

  private commitFactor(name: string, value: number | string) {
    this.coalescer.push(async () => {
      try {
        const resp = await this.api.setFactor(this.store.current.sessionId, name, value);
        this.store.reconcile(resp.state, name, resp.frozen);
        if (resp.frozen) {
          this.store.update({ notice: `${name}: no feasible values at the current settings` });
        } else if (this.store.current.notice?.startsWith(name + ":")) {
          this.store.update({ notice: null });
        }
      } catch (err) {
        this.store.update({ notice: `factor update failed: ${describe(err)}` });
      }
    });
  }

  async runOptimize(): Promise<void> {
    const { sessionId, state } = this.store.current;
    this.store.update({ optimizing: true, notice: null });
    const before: Record<string, number> = {};
    for (const f of state.factors) {
      if (f.kind === "continuous") before[f.name] = Number(f.value);
    }
    try {
      const resp = await this.api.optimize(sessionId);
      const reports = { ...this.store.current.reports, [state.mode]: resp.report };
      await this.animateSliders(before, resp.report);
      this.store.update({ optimizing: false, reports });
      this.store.reconcile(resp.state);
    } catch (err) {
      const notice =
        err instanceof ApiError && err.status === 409
          ? "an optimization is already running for this session"
          : `optimize failed: ${describe(err)}`;
      this.store.update({ optimizing: false, notice });
    }
  }

  private animateSliders(before: Record<string, number>, report: OptimumReport): Promise<void> {
    if (this.animateMs <= 0 || typeof requestAnimationFrame === "undefined") {
      return Promise.resolve();
    }
    const start = performance.now();
    const duration = this.animateMs;
    return new Promise((resolve) => {
      const tick = (now: number) => {
        const t = Math.min((now - start) / duration, 1);
        for (const [name, target] of Object.entries(report.settings)) {
          if (typeof target !== "number" || !(name in before)) continue;
          const slider = this.root.querySelector<HTMLInputElement>(
            `.factor-control[data-factor="${name}"] input[type=range]`,
          );
          if (slider) slider.value = String(before[name] + (target - before[name]) * t);
        }
        if (t < 1) requestAnimationFrame(tick);
        else resolve();
      };
      requestAnimationFrame(tick);
    });
  }

  async switchMode(mode: Mode): Promise<void> {
    const { state } = this.store.current;
    if (mode === state.mode) return;
    const doc = await this.api.createSession(this.model || "", mode, this.goals);
    let latest = doc.state;
    for (const f of state.factors) {
      const resp = await this.api.setFactor(doc.session, f.name, f.value);
      latest = resp.state;
    }
    const reports = this.store.current.reports;
    this.store = new SessionStore(doc.session, latest);
    this.store.update({ reports });
    this.store.subscribe(() => this.render());
    window.location.hash = `s=${doc.session}`;
    this.render();
  }

  // -- view -------------------------------------------------------------------

  render(): void {
    const session = this.store.current;
    const state = session.state;
    const root = this.root;
    root.textContent = "";

    root.appendChild(this.banner(state, session.notice));

    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";
    const modeWrap = document.createElement("span");
    modeWrap.className = "mode-toggle";
    for (const mode of MODES) {
      const btn = document.createElement("button");
      btn.textContent = mode;
      btn.className = mode === state.mode ? "mode active" : "mode";
      btn.addEventListener("click", () => void this.switchMode(mode));
      modeWrap.appendChild(btn);
    }
    toolbar.appendChild(modeWrap);

    const optimizeBtn = document.createElement("button");
    optimizeBtn.id = "optimize";
    optimizeBtn.textContent = session.optimizing ? "optimizing…" : "maximize desirability";
    optimizeBtn.disabled = session.optimizing;
    optimizeBtn.addEventListener("click", () => void this.runOptimize());
    toolbar.appendChild(optimizeBtn);
    root.appendChild(toolbar);

    const readout = document.createElement("div");
    readout.className = "prediction-readout";
    const parts = state.responses.map(
      (r) => `${r} = ${state.predicted[r].toPrecision(5)}`,
    );
    if (state.desirability !== null) {
      parts.push(`desirability = ${state.desirability.toFixed(4)}`);
    }
    readout.textContent = parts.join("   ");
    root.appendChild(readout);

    const controls = document.createElement("div");
    controls.className = "controls";
    for (const f of state.factors) {
      controls.appendChild(
        buildControl(f, this.store.displayValue(f.name),
          session.frozenFactors[f.name] ?? false, {
            onEdit: (name, value) => this.store.beginEdit(name, value),
            onCommit: (name, value) => this.commitFactor(name, value),
          }),
      );
    }
    root.appendChild(controls);

    const traces = document.createElement("div");
    traces.id = "traces";
    renderTraces(traces, state);
    root.appendChild(traces);

    root.appendChild(this.reportPanel(session.reports));
  }

  private banner(state: ServerState, notice: string | null): HTMLElement {
    const banner = document.createElement("div");
    banner.id = "banner";
    if (state.warning && state.status) {
      banner.className = "banner warn";
      banner.textContent =
        `EXTRAPOLATION WARNING: ${state.status.kind} metric ` +
        `${state.status.metric.toPrecision(4)} exceeds threshold ` +
        `${state.status.threshold.toPrecision(4)}`;
    } else if (state.mode === "constrain" && state.status) {
      banner.className = "banner info";
      banner.textContent =
        `extrapolation control active: metric ${state.status.metric.toPrecision(4)} ` +
        `≤ threshold ${state.status.threshold.toPrecision(4)}`;
    } else {
      banner.className = "banner quiet";
      banner.textContent = `extrapolation control ${state.mode}`;
    }
    if (notice) {
      const div = document.createElement("div");
      div.className = "notice";
      div.textContent = notice;
      banner.appendChild(div);
    }
    return banner;
  }

  private reportPanel(reports: Partial<Record<Mode, OptimumReport>>): HTMLElement {
    const panel = document.createElement("div");
    panel.id = "report";
    const entries = Object.entries(reports) as [Mode, OptimumReport][];
    if (entries.length === 0) return panel;
    const title = document.createElement("h3");
    title.textContent = "optimization results";
    panel.appendChild(title);
    const table = document.createElement("table");
    table.className = "report-table";
    const head = document.createElement("tr");
    head.innerHTML =
      "<th>mode</th><th>desirability</th><th>metric</th><th>threshold</th>" +
      "<th>feasible</th><th>generations</th>";
    table.appendChild(head);
    for (const [mode, report] of entries) {
      const tr = document.createElement("tr");
      tr.dataset.mode = mode;
      const cells = [
        mode,
        report.objective.toFixed(4),
        report.metric === null ? "–" : report.metric.toPrecision(4),
        report.threshold === null ? "–" : report.threshold.toPrecision(4),
        String(report.feasible),
        String(report.generations),
      ];
      for (const c of cells) {
        const td = document.createElement("td");
        td.textContent = c;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    panel.appendChild(table);
    return panel;
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export function sessionFromHash(hash: string): string | null {
  const match = /s=([A-Za-z0-9]+)/.exec(hash);
  return match ? match[1] : null;
}

export async function boot(root: HTMLElement, options?: Partial<AppOptions>): Promise<ProfilerApp> {
  const api = options?.api ?? new ProfilerApi("");
  const app = new ProfilerApp({ api, root, ...options });
  await app.boot(sessionFromHash(window.location.hash));
  return app;
}
