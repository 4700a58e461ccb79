"""Per-response desirability functions and their weighted geometric mean.

Each response gets a goal: maximize, minimize, or match a target, mapped
to [0, 1] by linear ramps.  The overall objective is the importance-weighted
geometric mean of the per-response desirabilities, which is zero as soon as
any single desirability is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence


@dataclass(frozen=True)
class Maximize:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"need low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class Minimize:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"need low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class MatchTarget:
    low: float
    target: float
    high: float

    def __post_init__(self):
        if not self.low < self.target < self.high:
            raise ValueError(
                f"need low < target < high, got {self.low}, {self.target}, {self.high}")


GoalKind = Maximize | Minimize | MatchTarget


@dataclass(frozen=True)
class Goal:
    kind: GoalKind
    importance: float = 1.0

    def __post_init__(self):
        if self.importance <= 0:
            raise ValueError(f"importance must be positive, got {self.importance}")

    def to_json(self) -> dict:
        k = self.kind
        if isinstance(k, Maximize):
            doc = {"goal": "maximize", "low": k.low, "high": k.high}
        elif isinstance(k, Minimize):
            doc = {"goal": "minimize", "low": k.low, "high": k.high}
        else:
            doc = {"goal": "match_target", "low": k.low, "target": k.target, "high": k.high}
        doc["importance"] = self.importance
        return doc

    @staticmethod
    def from_json(doc: Mapping) -> "Goal":
        name = doc["goal"]
        if name == "maximize":
            kind: GoalKind = Maximize(float(doc["low"]), float(doc["high"]))
        elif name == "minimize":
            kind = Minimize(float(doc["low"]), float(doc["high"]))
        elif name == "match_target":
            kind = MatchTarget(float(doc["low"]), float(doc["target"]), float(doc["high"]))
        else:
            raise ValueError(f"unknown goal {name!r}")
        return Goal(kind, float(doc.get("importance", 1.0)))


def desirability(goal: Goal, y: float) -> float:
    """Desirability of one response value, clamped into [0, 1]."""
    k = goal.kind
    if isinstance(k, Maximize):
        d = (y - k.low) / (k.high - k.low)
    elif isinstance(k, Minimize):
        d = (k.high - y) / (k.high - k.low)
    else:
        if y <= k.target:
            d = (y - k.low) / (k.target - k.low)
        else:
            d = (k.high - y) / (k.high - k.target)
    return float(min(1.0, max(0.0, d)))


def overall_desirability(goals: Sequence[Goal], values: Sequence[float]) -> float:
    """Importance-weighted geometric mean (prod d_i^w_i)^(1/sum w_i)."""
    if len(goals) != len(values):
        raise ValueError(f"{len(goals)} goals for {len(values)} responses")
    if not goals:
        raise ValueError("at least one goal required")
    total_w = sum(g.importance for g in goals)
    log_sum = 0.0
    for g, y in zip(goals, values):
        d = desirability(g, y)
        if d == 0.0:
            return 0.0
        log_sum += g.importance * math.log(d)
    return float(math.exp(log_sum / total_w))
