// In-memory stand-in for the profiler service: same JSON shapes, canned
// numerics.  The UI under test never computes model math, so the fake owns
// all numbers exactly like the real service does.

import type {
  Factor,
  FactorResponse,
  GoalDoc,
  Mode,
  OptimumReport,
  ServerState,
  Trace,
} from "../src/api";

export interface FakeOptions {
  gridPoints?: number;
  conflictOnOptimize?: boolean;
  freezeFactor?: string | null;
  requestDelayMs?: number;
}

interface Call {
  method: string;
  url: string;
  body: unknown;
}

const INTERVALS: Record<string, [number, number]> = {
  a: [2, 8],
  b: [-0.5, 0.5],
};

const BOX: Record<string, [number, number]> = {
  a: [0, 10],
  b: [-1, 1],
};

function linspace(lo: number, hi: number, n: number): number[] {
  return Array.from({ length: n }, (_, i) => lo + ((hi - lo) * i) / (n - 1));
}

export class FakeServer {
  calls: Call[] = [];
  inFlight = 0;
  maxInFlight = 0;
  sessions = new Map<string, { mode: Mode; goals: Record<string, GoalDoc>; settings: Record<string, number> }>();
  private counter = 0;
  private options: FakeOptions;

  constructor(options: FakeOptions = {}) {
    this.options = { gridPoints: 101, requestDelayMs: 1, ...options };
  }

  predict(settings: Record<string, number>): number {
    return 10 + settings.a - 2 * settings.b;
  }

  metric(settings: Record<string, number>): number {
    return Math.abs(settings.a - 5) / 3 + Math.abs(settings.b);
  }

  desirability(y: number): number {
    return Math.min(1, Math.max(0, y / 25));
  }

  state(id: string): ServerState {
    const session = this.sessions.get(id)!;
    const { mode, settings, goals } = session;
    const metric = this.metric(settings);
    const extrapolated = metric > 1;
    const y = this.predict(settings);
    const hasGoals = Object.keys(goals).length > 0;
    const factors: Factor[] = (["a", "b"] as const).map((name) => ({
      name,
      kind: "continuous",
      low: BOX[name][0],
      high: BOX[name][1],
      value: settings[name],
    }));
    const traces: Trace[] = (["a", "b"] as const).map((name) => {
      const grid = linspace(BOX[name][0], BOX[name][1], this.options.gridPoints!);
      const preds = grid.map((g) => this.predict({ ...settings, [name]: g }));
      const metrics = grid.map((g) => this.metric({ ...settings, [name]: g }));
      return {
        factor: name,
        grid,
        predicted: { y: preds },
        desirability: hasGoals ? preds.map((p) => this.desirability(p)) : null,
        feasible: metrics.map((m) => m <= 1),
        interval: { low: INTERVALS[name][0], high: INTERVALS[name][1] },
      };
    });
    return {
      v: 1,
      mode,
      factors,
      responses: ["y"],
      response_ranges: { y: [0, 25] },
      goals,
      predicted: { y },
      desirability: hasGoals ? this.desirability(y) : null,
      status: { metric, threshold: 1.0, extrapolated, kind: "regt2" },
      warning: mode === "warn" && extrapolated,
      traces,
    };
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    this.inFlight += 1;
    this.maxInFlight = Math.max(this.maxInFlight, this.inFlight);
    try {
      await new Promise((r) => setTimeout(r, this.options.requestDelayMs));
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : null;
      this.calls.push({ method, url, body });
      return this.route(method, url, body);
    } finally {
      this.inFlight -= 1;
    }
  };

  private json(doc: unknown, status = 200): Response {
    return new Response(JSON.stringify(doc), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  private route(method: string, url: string, body: any): Response {
    if (url === "/api/models") {
      return this.json({ v: 1, models: ["fake-model"] });
    }
    if (url === "/api/sessions" && method === "POST") {
      const id = `sess${++this.counter}`;
      this.sessions.set(id, {
        mode: body.mode ?? "off",
        goals: body.goals ?? {},
        settings: { a: 5, b: 0 },
      });
      return this.json({ v: 1, session: id, state: this.state(id) }, 201);
    }
    const sessionMatch = /^\/api\/sessions\/([^/]+)(\/.*)?$/.exec(url);
    if (!sessionMatch) return this.json({ detail: "not found" }, 404);
    const [, id, rest] = sessionMatch;
    const session = this.sessions.get(id);
    if (!session) return this.json({ detail: `unknown session ${id}` }, 404);

    if (!rest && method === "GET") {
      return this.json({ v: 1, session: id, state: this.state(id) });
    }
    if (rest === "/factor" && method === "POST") {
      const name = body.name as string;
      let value = Number(body.value);
      if (value < BOX[name][0] || value > BOX[name][1]) {
        return this.json({ detail: "out of box" }, 422);
      }
      if (this.options.freezeFactor === name) {
        const response: FactorResponse = {
          v: 1,
          stored_value: session.settings[name],
          status: this.state(id).status,
          warning: false,
          clamped: false,
          frozen: true,
          state: this.state(id),
        };
        return this.json(response);
      }
      let clamped = false;
      if (session.mode === "constrain") {
        const [lo, hi] = INTERVALS[name];
        const snapped = Math.min(Math.max(value, lo), hi);
        clamped = snapped !== value;
        value = snapped;
      }
      session.settings[name] = value;
      const state = this.state(id);
      const response: FactorResponse = {
        v: 1,
        stored_value: value,
        status: state.status,
        warning: state.warning,
        clamped,
        frozen: false,
        state,
      };
      return this.json(response);
    }
    if (rest === "/optimize" && method === "POST") {
      if (this.options.conflictOnOptimize) {
        return this.json({ detail: "an optimize call is already in flight" }, 409);
      }
      const constrained = session.mode === "constrain";
      session.settings = constrained ? { a: 7.0, b: -0.25 } : { a: 9.5, b: -1 };
      const y = this.predict(session.settings);
      const report: OptimumReport = {
        settings: { ...session.settings },
        objective: this.desirability(y),
        metric: this.metric(session.settings),
        threshold: 1.0,
        feasible: !constrained || this.metric(session.settings) <= 1,
        generations: 42,
        history: [this.desirability(y)],
      };
      return this.json({ v: 1, report, state: this.state(id) });
    }
    return this.json({ detail: "not found" }, 404);
  }
}

export function flush(ms = 30): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}
