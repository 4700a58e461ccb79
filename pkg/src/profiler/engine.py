"""Interactive profiler state: traces, warn/constrain semantics, optimization.

A Profiler holds one predictor, an optional extrapolation metric, the
current factor settings, and per-response goals.  Every factor gets a
profile trace: predictions along its range with all other factors held at
the current settings, plus a feasibility mask under the metric.  In warn
mode any in-box setting is accepted and flagged when extrapolated; in
constrain mode requested values are clamped into the feasible interval so
the state can never leave the non-extrapolated region.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import extrapolation as ex
from .desirability import Goal, overall_desirability
from .factors import Continuous, FactorSpace, Ordinal, encode_settings, encoded_layout
from .models import Predictor
from .optimizer import GAConfig, OptimumReport, optimize

MODES = ("off", "warn", "constrain")


@dataclass(frozen=True)
class ProfileTrace:
    factor: str
    grid: tuple            # floats for continuous factors, level strings otherwise
    predicted: dict[str, np.ndarray]
    desirability: np.ndarray | None
    feasible: np.ndarray
    interval: ex.FeasibleInterval | ex.FeasibleLevels | None

    def to_json(self) -> dict:
        if self.interval is None:
            interval = None
        elif isinstance(self.interval, ex.FeasibleLevels):
            interval = {"levels": list(self.interval.levels)}
        elif self.interval.empty:
            interval = {"low": None, "high": None}
        else:
            interval = {"low": self.interval.low, "high": self.interval.high}
        return {"factor": self.factor, "grid": list(self.grid),
                "predicted": {k: v.tolist() for k, v in self.predicted.items()},
                "desirability": None if self.desirability is None else self.desirability.tolist(),
                "feasible": self.feasible.astype(bool).tolist(),
                "interval": interval}


@dataclass(frozen=True)
class SetFactorResult:
    stored_value: float | str
    status: ex.ExtrapolationStatus | None
    warning: bool
    clamped: bool
    frozen: bool
    traces: tuple[ProfileTrace, ...]


class Profiler:
    """One interactive profiling session over a fitted predictor."""

    def __init__(self, predictor: Predictor, extrap: ex.ExtrapolationModel | None = None,
                 goals: Mapping[str, Goal] | None = None, mode: str = "off",
                 resolution: int = 101):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if resolution < 2:
            raise ValueError("trace resolution must be at least 2")
        self.predictor = predictor
        self.space: FactorSpace = predictor.space
        self.extrap = extrap
        self.goals = dict(goals) if goals else {}
        unknown = set(self.goals) - set(predictor.responses)
        if unknown:
            raise ValueError(f"goals for unknown responses: {sorted(unknown)}")
        self.mode = mode
        self.resolution = resolution
        self.settings: dict[str, float | str] = dict(predictor.training.initial_settings)
        self._layout = encoded_layout(self.space)
        self.last_status = self._status()

    # -- metric plumbing ----------------------------------------------------

    def _status(self) -> ex.ExtrapolationStatus | None:
        if self.extrap is None:
            return None
        return ex.evaluate(self.extrap, self.space, self.settings)

    def _columns_of(self, factor: str) -> list[int]:
        return [i for i, c in enumerate(self._layout) if c.factor == factor]

    def _metric_many(self, encoded: np.ndarray) -> np.ndarray | None:
        if self.extrap is None:
            return None
        if self.extrap.kind == "leverage":
            pts = np.hstack([np.ones((len(encoded), 1)), encoded])
        else:
            pts = encoded
        return ex.evaluate_many(self.extrap, pts)

    # -- traces ---------------------------------------------------------------

    def traces(self) -> tuple[ProfileTrace, ...]:
        base = encode_settings(self.space, self.settings)
        out = []
        for f in self.space.factors:
            cols = self._columns_of(f.name)
            if isinstance(f.kind, Continuous):
                grid = np.linspace(f.kind.low, f.kind.high, self.resolution)
                pts = np.repeat(base[None, :], len(grid), axis=0)
                pts[:, cols[0]] = grid
                grid_out: tuple = tuple(float(g) for g in grid)
            else:
                levels = f.kind.levels
                pts = np.repeat(base[None, :], len(levels), axis=0)
                if isinstance(f.kind, Ordinal):
                    pts[:, cols[0]] = f.kind.scores
                else:
                    block = np.zeros((len(levels), len(cols)))
                    block[np.arange(1, len(levels)), np.arange(len(cols))] = 1.0
                    pts[:, cols] = block
                grid_out = levels
            predicted = self.predictor.predict_many(pts)
            desir = None
            if self.goals and all(r in self.goals for r in self.predictor.responses):
                ordered = [self.goals[r] for r in self.predictor.responses]
                desir = np.array([
                    overall_desirability(ordered, [predicted[r][i] for r in self.predictor.responses])
                    for i in range(len(pts))])
            metric = self._metric_many(pts)
            feasible = (np.ones(len(pts), dtype=bool) if metric is None
                        else metric <= self.extrap.threshold)
            interval = (None if self.extrap is None
                        else ex.feasible_interval(self.extrap, self.space, self.settings, f.name))
            out.append(ProfileTrace(f.name, grid_out, predicted, desir, feasible, interval))
        return tuple(out)

    # -- interaction ----------------------------------------------------------

    def set_factor(self, name: str, value: float | str) -> SetFactorResult:
        f = self.space.factor(name)
        value = self._validate(f, value)
        clamped = frozen = False
        if self.mode == "constrain" and self.extrap is not None:
            region = ex.feasible_interval(self.extrap, self.space, self.settings, name)
            if isinstance(region, ex.FeasibleInterval):
                if region.empty:
                    frozen = True
                else:
                    new = region.clamp(float(value))
                    clamped = new != value
                    value = new
            else:
                if str(value) not in region.levels:
                    frozen = True
        if frozen:
            value = self.settings[name]
        else:
            self.settings[name] = value
        self.last_status = self._status()
        warning = (self.mode == "warn" and self.last_status is not None
                   and self.last_status.extrapolated)
        return SetFactorResult(value, self.last_status, warning, clamped, frozen,
                               self.traces())

    def _validate(self, f, value):
        if isinstance(f.kind, Continuous):
            v = float(value)
            if not f.kind.low <= v <= f.kind.high:
                raise ValueError(f"{f.name}={v} outside [{f.kind.low}, {f.kind.high}]")
            return v
        if str(value) not in f.kind.levels:
            raise ValueError(f"{f.name}: unknown level {value!r}")
        return str(value)

    # -- optimization -----------------------------------------------------------

    def optimize_desirability(self, config: GAConfig = GAConfig()) -> OptimumReport:
        missing = [r for r in self.predictor.responses if r not in self.goals]
        if missing:
            raise ValueError(f"no goal set for responses: {missing}")
        ordered = [self.goals[r] for r in self.predictor.responses]

        def objective(settings):
            pred = self.predictor.predict(settings)
            return overall_desirability(ordered, [pred[r] for r in self.predictor.responses])

        constraint = None
        if self.mode == "constrain" and self.extrap is not None:
            model, space = self.extrap, self.space

            def constraint(settings):
                st = ex.evaluate(model, space, settings)
                return st.metric_value, st.threshold

        report = optimize(objective, constraint, self.space, config,
                          seeds=self.predictor.training.seed_settings)
        self.settings = dict(report.settings)
        self.last_status = self._status()
        return report

    # -- serialization ------------------------------------------------------------

    def predicted(self) -> dict[str, float]:
        return self.predictor.predict(self.settings)

    def state_json(self, include_traces: bool = True) -> dict:
        factors = []
        for f in self.space.factors:
            doc: dict = {"name": f.name, "value": self.settings[f.name]}
            if isinstance(f.kind, Continuous):
                doc.update(kind="continuous", low=f.kind.low, high=f.kind.high)
            elif isinstance(f.kind, Ordinal):
                doc.update(kind="ordinal", levels=list(f.kind.levels),
                           scores=list(f.kind.scores))
            else:
                doc.update(kind="categorical", levels=list(f.kind.levels))
            factors.append(doc)
        predicted = self.predicted()
        desir = None
        if self.goals and all(r in self.goals for r in self.predictor.responses):
            ordered = [self.goals[r] for r in self.predictor.responses]
            desir = overall_desirability(
                ordered, [predicted[r] for r in self.predictor.responses])
        status = (None if self.last_status is None
                  else self.last_status.to_json(self.extrap.kind))
        doc = {"v": 1, "mode": self.mode, "factors": factors,
               "responses": list(self.predictor.responses),
               "response_ranges": {k: list(v) for k, v in
                                   self.predictor.training.response_range.items()},
               "goals": {k: g.to_json() for k, g in self.goals.items()},
               "predicted": {k: float(v) for k, v in predicted.items()},
               "desirability": desir, "status": status,
               "warning": bool(self.mode == "warn" and self.last_status is not None
                               and self.last_status.extrapolated)}
        if include_traces:
            doc["traces"] = [t.to_json() for t in self.traces()]
        return doc
