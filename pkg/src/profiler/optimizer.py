"""Genetic algorithm over mixed factor spaces with a feasibility-rule tournament.

Maximizes a settings -> value objective inside the factor box, optionally
subject to a nonlinear constraint callable returning (metric, threshold).
Selection uses the feasibility rule: feasible beats infeasible, lower
violation beats higher among the infeasible, higher objective beats lower
among the feasible.  There is no penalty weight to tune, and as long as any
feasible genome is ever seen the reported best is feasible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .factors import Continuous, FactorSpace

Objective = Callable[[Mapping[str, float | str]], float]
Constraint = Callable[[Mapping[str, float | str]], tuple[float, float]]


@dataclass(frozen=True)
class GAConfig:
    population: int = 200
    generations: int = 300
    crossover_rate: float = 0.9
    mutation_rate: float | None = None    # None = 1/(number of factors)
    tournament: int = 3
    elitism: int = 2
    seed: int = 0
    stall_limit: int = 50
    blx_alpha: float = 0.5
    mutation_sd: float = 0.05             # fraction of each factor's range

    def __post_init__(self):
        if self.population < 4:
            raise ValueError(f"population must be at least 4, got {self.population}")
        for name in ("crossover_rate", "blx_alpha"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")

    @staticmethod
    def from_json(doc: Mapping) -> "GAConfig":
        allowed = set(GAConfig.__dataclass_fields__)
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown GA options: {sorted(unknown)}")
        return GAConfig(**doc)


@dataclass(frozen=True)
class OptimumReport:
    settings: dict[str, float | str]
    objective: float
    metric_value: float | None
    threshold: float | None
    feasible: bool
    generations: int
    history: tuple[float, ...]     # best feasible objective per generation (NaN before one exists)

    def to_json(self) -> dict:
        return {"settings": self.settings, "objective": self.objective,
                "metric": self.metric_value, "threshold": self.threshold,
                "feasible": self.feasible, "generations": self.generations,
                "history": [None if np.isnan(h) else h for h in self.history]}


@dataclass(frozen=True)
class _Eval:
    objective: float
    violation: float    # max(0, metric - threshold); 0 when unconstrained
    metric: float | None
    threshold: float | None

    @property
    def feasible(self) -> bool:
        return self.violation <= 0.0

    def beats(self, other: "_Eval") -> bool:
        if self.feasible != other.feasible:
            return self.feasible
        if not self.feasible:
            return self.violation < other.violation
        if self.objective != other.objective:
            return self.objective > other.objective
        # Exact objective ties happen on clamped desirability plateaus;
        # prefer the less extrapolated point there.
        if self.metric is not None and other.metric is not None:
            return self.metric < other.metric
        return False


class _Genome:
    """Per-factor gene coding: continuous value, or level index for
    categorical and ordinal factors.  Kept inside the box by construction."""

    def __init__(self, space: FactorSpace):
        self.space = space
        self.kinds = [f.kind for f in space.factors]
        self.names = list(space.names)
        self.lo = np.array([k.low if isinstance(k, Continuous) else 0.0 for k in self.kinds])
        self.hi = np.array([k.high if isinstance(k, Continuous) else len(k.levels) - 1.0
                            for k in self.kinds])
        self.is_cont = np.array([isinstance(k, Continuous) for k in self.kinds])
        self.span = self.hi - self.lo

    def random(self, rng: np.random.Generator) -> np.ndarray:
        g = self.lo + rng.random(len(self.kinds)) * self.span
        g[~self.is_cont] = np.floor(g[~self.is_cont] + 0.5)
        return np.clip(g, self.lo, self.hi)

    def from_settings(self, settings: Mapping[str, float | str | None]) -> np.ndarray | None:
        gene = np.empty(len(self.kinds))
        for i, (name, kind) in enumerate(zip(self.names, self.kinds)):
            v = settings.get(name)
            if v is None:
                return None
            if isinstance(kind, Continuous):
                gene[i] = min(max(float(v), kind.low), kind.high)
            else:
                if str(v) not in kind.levels:
                    return None
                gene[i] = kind.levels.index(str(v))
        return gene

    def to_settings(self, gene: np.ndarray) -> dict[str, float | str]:
        out: dict[str, float | str] = {}
        for i, (name, kind) in enumerate(zip(self.names, self.kinds)):
            if isinstance(kind, Continuous):
                out[name] = float(gene[i])
            else:
                out[name] = kind.levels[int(gene[i])]
        return out

    def crossover(self, a: np.ndarray, b: np.ndarray, cfg: GAConfig,
                  rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """BLX-alpha blend on continuous genes, uniform swap on discrete ones."""
        c1, c2 = a.copy(), b.copy()
        for i in np.nonzero(self.is_cont)[0]:
            lo, hi = min(a[i], b[i]), max(a[i], b[i])
            pad = cfg.blx_alpha * (hi - lo)
            c1[i] = rng.uniform(lo - pad, hi + pad)
            c2[i] = rng.uniform(lo - pad, hi + pad)
        swap = (~self.is_cont) & (rng.random(len(a)) < 0.5)
        c1[swap], c2[swap] = b[swap], a[swap]
        return self.repair(c1), self.repair(c2)

    def mutate(self, g: np.ndarray, cfg: GAConfig, rng: np.random.Generator) -> np.ndarray:
        rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / len(g)
        out = g.copy()
        for i in range(len(g)):
            if rng.random() >= rate:
                continue
            if self.is_cont[i]:
                out[i] += rng.normal(0.0, cfg.mutation_sd * self.span[i])
            else:
                out[i] = rng.integers(0, int(self.hi[i]) + 1)
        return self.repair(out)

    def repair(self, g: np.ndarray) -> np.ndarray:
        g = np.clip(g, self.lo, self.hi)
        g[~self.is_cont] = np.round(g[~self.is_cont])
        return g


def optimize(objective: Objective, constraint: Constraint | None, space: FactorSpace,
             config: GAConfig = GAConfig(),
             seeds: Sequence[Mapping[str, float | str | None]] = ()) -> OptimumReport:
    """Run the GA and return the best point found.

    `seeds` (typically the training rows' settings) are injected into the
    initial population, which guarantees a feasible start whenever any
    training point satisfies the constraint.  A fixed config and seed give
    an identical report on every run.
    """
    coder = _Genome(space)
    rng = np.random.default_rng(config.seed)

    def evaluate(gene: np.ndarray) -> _Eval:
        settings = coder.to_settings(gene)
        obj = float(objective(settings))
        if constraint is None:
            return _Eval(obj, 0.0, None, None)
        metric, threshold = constraint(settings)
        return _Eval(obj, max(0.0, float(metric) - float(threshold)),
                     float(metric), float(threshold))

    pop: list[np.ndarray] = []
    seed_genes = [g for g in (coder.from_settings(s) for s in seeds) if g is not None]
    if seed_genes:
        take = min(len(seed_genes), config.population // 2)
        idx = rng.permutation(len(seed_genes))[:take]
        pop.extend(seed_genes[i] for i in idx)
    while len(pop) < config.population:
        pop.append(coder.random(rng))
    evals = [evaluate(g) for g in pop]

    def best_index(items: list[_Eval]) -> int:
        bi = 0
        for i in range(1, len(items)):
            if items[i].beats(items[bi]):
                bi = i
        return bi

    bi = best_index(evals)
    best_gene, best_eval = pop[bi].copy(), evals[bi]
    history: list[float] = []
    stall = 0
    generations_used = 0

    for gen in range(config.generations):
        generations_used = gen + 1
        order = sorted(range(len(pop)), key=lambda i: _sort_key(evals[i]))
        elites = [pop[i].copy() for i in order[:config.elitism]]

        children: list[np.ndarray] = list(elites)
        while len(children) < config.population:
            pa = _tournament(pop, evals, config, rng)
            pb = _tournament(pop, evals, config, rng)
            if rng.random() < config.crossover_rate:
                ca, cb = coder.crossover(pa, pb, config, rng)
            else:
                ca, cb = pa.copy(), pb.copy()
            children.append(coder.mutate(ca, config, rng))
            if len(children) < config.population:
                children.append(coder.mutate(cb, config, rng))
        pop = children
        evals = [evaluate(g) for g in pop]

        bi = best_index(evals)
        if evals[bi].beats(best_eval):
            best_gene, best_eval = pop[bi].copy(), evals[bi]
            stall = 0
        else:
            stall += 1
        history.append(best_eval.objective if best_eval.feasible else float("nan"))
        if stall >= config.stall_limit:
            break

    return OptimumReport(coder.to_settings(best_gene), best_eval.objective,
                         best_eval.metric, best_eval.threshold, best_eval.feasible,
                         generations_used, tuple(history))


def _sort_key(e: _Eval) -> tuple:
    if e.feasible:
        return (0, -e.objective, e.metric if e.metric is not None else 0.0)
    return (1, e.violation, 0.0)


def _tournament(pop: list[np.ndarray], evals: list[_Eval], cfg: GAConfig,
                rng: np.random.Generator) -> np.ndarray:
    picks = rng.integers(0, len(pop), size=cfg.tournament)
    winner = picks[0]
    for i in picks[1:]:
        if evals[i].beats(evals[winner]):
            winner = i
    return pop[winner]
