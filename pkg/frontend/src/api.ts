// Typed client for the profiler service JSON API (all payloads carry v: 1).

export interface ContinuousFactor {
  name: string;
  kind: "continuous";
  low: number;
  high: number;
  value: number;
}

export interface LevelFactor {
  name: string;
  kind: "categorical" | "ordinal";
  levels: string[];
  scores?: number[];
  value: string;
}

export type Factor = ContinuousFactor | LevelFactor;

export interface Status {
  metric: number;
  threshold: number;
  extrapolated: boolean;
  kind: "leverage" | "regt2";
}

export type Interval =
  | { low: number | null; high: number | null }
  | { levels: string[] }
  | null;

export interface Trace {
  factor: string;
  grid: (number | string)[];
  predicted: Record<string, number[]>;
  desirability: number[] | null;
  feasible: boolean[];
  interval: Interval;
}

export interface GoalDoc {
  goal: "maximize" | "minimize" | "match_target";
  low: number;
  high: number;
  target?: number;
  importance?: number;
}

export type Mode = "off" | "warn" | "constrain";

export interface ServerState {
  v: 1;
  mode: Mode;
  factors: Factor[];
  responses: string[];
  response_ranges: Record<string, [number, number]>;
  goals: Record<string, GoalDoc>;
  predicted: Record<string, number>;
  desirability: number | null;
  status: Status | null;
  warning: boolean;
  traces: Trace[];
}

export interface FactorResponse {
  v: 1;
  stored_value: number | string;
  status: Status | null;
  warning: boolean;
  clamped: boolean;
  frozen: boolean;
  state: ServerState;
}

export interface OptimumReport {
  settings: Record<string, number | string>;
  objective: number;
  metric: number | null;
  threshold: number | null;
  feasible: boolean;
  generations: number;
  history: (number | null)[];
}

export interface OptimizeResponse {
  v: 1;
  report: OptimumReport;
  state: ServerState;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ProfilerApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      /* non-JSON error body */
    }
    if (!resp.ok) {
      const detail =
        body && typeof body === "object" && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  listModels(): Promise<{ v: 1; models: string[] }> {
    return this.request("/api/models");
  }

  createSession(
    model: string,
    mode: Mode,
    goals: Record<string, GoalDoc>,
  ): Promise<{ v: 1; session: string; state: ServerState }> {
    return this.request("/api/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ model, mode, goals }),
    });
  }

  getSession(id: string): Promise<{ v: 1; session: string; state: ServerState }> {
    return this.request(`/api/sessions/${id}`);
  }

  setFactor(id: string, name: string, value: number | string): Promise<FactorResponse> {
    return this.request(`/api/sessions/${id}/factor`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name, value }),
    });
  }

  optimize(id: string, ga: Record<string, unknown> = {}): Promise<OptimizeResponse> {
    return this.request(`/api/sessions/${id}/optimize`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ga }),
    });
  }
}
