// Client-side session store: the last server state plus in-flight edits.
// Every render is a pure projection of this store, so replaying the same
// server payloads reconstructs an identical view.

import type { Mode, OptimumReport, ServerState } from "./api";

export interface UiSession {
  sessionId: string;
  state: ServerState;
  // slider values the user is dragging that the server has not confirmed yet
  pendingEdits: Record<string, number | string>;
  // last optimization report per mode, for the off-vs-constrain comparison
  reports: Partial<Record<Mode, OptimumReport>>;
  optimizing: boolean;
  notice: string | null;
  frozenFactors: Record<string, boolean>;
}

export type Listener = (session: UiSession) => void;

export class SessionStore {
  private session: UiSession;
  private listeners: Listener[] = [];

  constructor(sessionId: string, state: ServerState) {
    this.session = {
      sessionId,
      state,
      pendingEdits: {},
      reports: {},
      optimizing: false,
      notice: null,
      frozenFactors: {},
    };
  }

  get current(): UiSession {
    return this.session;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit() {
    for (const fn of this.listeners) fn(this.session);
  }

  update(patch: Partial<UiSession>) {
    this.session = { ...this.session, ...patch };
    this.emit();
  }

  beginEdit(factor: string, value: number | string) {
    this.update({ pendingEdits: { ...this.session.pendingEdits, [factor]: value } });
  }

  /** Adopt a confirmed server state; confirmed factors lose their pending edit. */
  reconcile(state: ServerState, confirmed?: string, frozen = false) {
    const pendingEdits = { ...this.session.pendingEdits };
    if (confirmed !== undefined) delete pendingEdits[confirmed];
    const frozenFactors = { ...this.session.frozenFactors };
    if (confirmed !== undefined) frozenFactors[confirmed] = frozen;
    this.update({ state, pendingEdits, frozenFactors });
  }

  /** The value each control should show: pending edit if any, else server value. */
  displayValue(factor: string): number | string {
    if (factor in this.session.pendingEdits) return this.session.pendingEdits[factor];
    const f = this.session.state.factors.find((x) => x.name === factor);
    if (!f) throw new Error(`unknown factor ${factor}`);
    return f.value;
  }
}

/** Serialize the projected view inputs; two stores with equal snapshots
 * must render identical DOM. */
export function snapshot(session: UiSession): string {
  return JSON.stringify({
    state: session.state,
    pendingEdits: session.pendingEdits,
    reports: session.reports,
    optimizing: session.optimizing,
    notice: session.notice,
    frozenFactors: session.frozenFactors,
  });
}
