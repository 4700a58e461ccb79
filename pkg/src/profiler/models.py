"""Predictors the profiler explores, and their JSON artifacts.

Two built-in model families: least squares over the encoded design
(intercept + main effects) with an attached leverage metric, and boosted
single-hidden-layer tanh networks (3 neurons per stage by default) fit
stagewise to residuals.  Anything with a factor space, response names, and
a predict method can stand in for them, so externally fitted models plug
into the same profiler machinery.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from . import extrapolation as ex
from .covariance import ShrunkCovariance
from .factors import (Categorical, Continuous, Dataset, DataError, FactorDef,
                      FactorSpace, encode, encode_settings, level_column,
                      numeric_column)


@dataclass(frozen=True)
class TrainingSummary:
    """What the profiler needs to remember about the fit data."""
    n_rows: int
    r2: float | None
    response_range: dict[str, tuple[float, float]]
    initial_settings: dict[str, float | str]
    seed_settings: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {"n": self.n_rows, "r2": self.r2,
                "response_range": {k: list(v) for k, v in self.response_range.items()},
                "initial_settings": self.initial_settings,
                "seeds": [dict(s) for s in self.seed_settings]}

    @staticmethod
    def from_json(doc: Mapping) -> "TrainingSummary":
        return TrainingSummary(
            int(doc["n"]), doc.get("r2"),
            {k: (float(v[0]), float(v[1])) for k, v in doc["response_range"].items()},
            dict(doc["initial_settings"]),
            tuple(dict(s) for s in doc.get("seeds", ())))


@runtime_checkable
class Predictor(Protocol):
    space: FactorSpace
    responses: tuple[str, ...]
    training: TrainingSummary

    def predict(self, settings: Mapping[str, float | str]) -> dict[str, float]: ...

    def predict_many(self, points: np.ndarray) -> dict[str, np.ndarray]: ...


def _complete_rows(data: Dataset, names: Sequence[str]) -> np.ndarray:
    keep = np.ones(data.n, dtype=bool)
    for name in names:
        keep &= ~data.column(name).missing
    return np.nonzero(keep)[0]


def _summary(data: Dataset, space: FactorSpace, responses: Sequence[str],
             r2: float | None, seed_cap: int = 500) -> TrainingSummary:
    init: dict[str, float | str] = {}
    for f in space.factors:
        col = data.column(f.name)
        if isinstance(f.kind, Continuous):
            init[f.name] = float(col.present().mean())
        else:
            vals, counts = np.unique(col.present().astype(str), return_counts=True)
            order = {lv: i for i, lv in enumerate(f.kind.levels)}
            best = max(zip(vals, counts), key=lambda vc: (vc[1], -order.get(vc[0], 0)))
            init[f.name] = str(best[0])
    rng_range = {}
    for r in responses:
        y = data.column(r).present().astype(float)
        rng_range[r] = (float(y.min()), float(y.max()))
    complete = _complete_rows(data, space.names)
    seeds = tuple(data.row_settings(i) for i in complete[:seed_cap])
    seeds = tuple({k: v for k, v in s.items() if k in space.names} for s in seeds)
    return TrainingSummary(data.n, r2, rng_range, init, seeds)


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeastSquaresModel:
    space: FactorSpace
    response: str
    coef: np.ndarray                      # intercept first, then encoded columns
    r2: float
    leverage_model: ex.LeverageModel
    training: TrainingSummary

    @property
    def responses(self) -> tuple[str, ...]:
        return (self.response,)

    def design_row(self, settings: Mapping[str, float | str]) -> np.ndarray:
        return np.concatenate([[1.0], encode_settings(self.space, settings)])

    def predict(self, settings: Mapping[str, float | str]) -> dict[str, float]:
        return {self.response: float(self.design_row(settings) @ self.coef)}

    def predict_many(self, points: np.ndarray) -> dict[str, np.ndarray]:
        xs = np.atleast_2d(points)
        design = np.hstack([np.ones((len(xs), 1)), xs])
        return {self.response: design @ self.coef}


def fit_least_squares(train: Dataset, space: FactorSpace, response: str,
                      rule: ex.LeverageRule = ex.MaxLeverage()) -> LeastSquaresModel:
    """Normal-equation least squares on complete rows, leverage attached."""
    rows = _complete_rows(train, list(space.names) + [response])
    used = train.take(rows)
    enc = encode(used, space)
    design = np.hstack([np.ones((enc.n, 1)), enc.values])
    if design.shape[0] < design.shape[1] + 1:
        raise DataError(f"need at least {design.shape[1] + 1} complete rows, "
                        f"got {design.shape[0]}")
    y = used.column(response).values.astype(float)
    xtx = design.T @ design
    try:
        coef = np.linalg.solve(xtx, design.T @ y)
    except np.linalg.LinAlgError:
        raise ex.SingularDesignError("singular design; drop collinear factors")
    resid = y - design @ coef
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / sst if sst > 0 else 1.0
    lev = ex.fit_leverage_model(design, rule)
    return LeastSquaresModel(space, response, coef, r2, lev,
                             _summary(used, space, [response], r2))


# ---------------------------------------------------------------------------
# boosted tanh networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TanhStage:
    w1: np.ndarray   # (neurons, d)
    b1: np.ndarray   # (neurons,)
    w2: np.ndarray   # (neurons,)
    b2: float

    def output(self, xs: np.ndarray) -> np.ndarray:
        return np.tanh(xs @ self.w1.T + self.b1) @ self.w2 + self.b2


@dataclass(frozen=True)
class BoostConfig:
    neurons: int = 3
    stages: int = 20
    rate: float = 0.1
    seed: int = 0
    gd_steps: int = 600
    gd_step_size: float = 0.2
    gd_momentum: float = 0.9
    weight_decay: float = 1e-6

    @staticmethod
    def from_json(doc: Mapping) -> "BoostConfig":
        allowed = {f for f in BoostConfig.__dataclass_fields__}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown boost options: {sorted(unknown)}")
        return BoostConfig(**doc)


@dataclass(frozen=True)
class BoostedTanhNet:
    space: FactorSpace
    response: str
    stages: tuple[TanhStage, ...]
    rate: float
    base: float                     # training response mean
    x_mean: np.ndarray
    x_scale: np.ndarray
    r2: float
    loss_history: tuple[float, ...]  # residual MSE after each stage
    training: TrainingSummary

    @property
    def responses(self) -> tuple[str, ...]:
        return (self.response,)

    def predict(self, settings: Mapping[str, float | str]) -> dict[str, float]:
        x = encode_settings(self.space, settings)[None, :]
        return {self.response: float(self.predict_many(x)[self.response][0])}

    def predict_many(self, points: np.ndarray) -> dict[str, np.ndarray]:
        xs = (np.atleast_2d(points) - self.x_mean) / self.x_scale
        out = np.full(len(xs), self.base)
        for stage in self.stages:
            out = out + self.rate * stage.output(xs)
        return {self.response: out}


def stage_loss_and_grads(stage: TanhStage, xs: np.ndarray, target: np.ndarray,
                         decay: float) -> tuple[float, TanhStage]:
    """Half-MSE loss with weight decay, and its analytic gradients.

    Returns the gradients packed in a TanhStage of matching shapes so the
    finite-difference check can walk the same structure.
    """
    n = len(xs)
    act = np.tanh(xs @ stage.w1.T + stage.b1)
    err = act @ stage.w2 + stage.b2 - target
    loss = 0.5 * float(np.mean(err ** 2)) \
        + 0.5 * decay * (float(np.sum(stage.w1 ** 2)) + float(np.sum(stage.w2 ** 2)))
    g_w2 = act.T @ err / n + decay * stage.w2
    g_b2 = float(err.mean())
    d_act = np.outer(err, stage.w2) * (1.0 - act ** 2)
    g_w1 = d_act.T @ xs / n + decay * stage.w1
    g_b1 = d_act.mean(axis=0)
    return loss, TanhStage(g_w1, g_b1, g_w2, g_b2)


def _fit_stage(xs: np.ndarray, target: np.ndarray, cfg: BoostConfig,
               rng: np.random.Generator, stage_index: int) -> TanhStage:
    d = xs.shape[1]
    stage = TanhStage(
        rng.normal(0.0, 1.0 / np.sqrt(max(d, 1)), (cfg.neurons, d)),
        rng.normal(0.0, 0.5, cfg.neurons),
        rng.normal(0.0, 1.0 / np.sqrt(cfg.neurons), cfg.neurons),
        0.0)
    vel = TanhStage(np.zeros_like(stage.w1), np.zeros_like(stage.b1),
                    np.zeros_like(stage.w2), 0.0)
    for _ in range(cfg.gd_steps):
        loss, g = stage_loss_and_grads(stage, xs, target, cfg.weight_decay)
        if not np.isfinite(loss):
            raise ArithmeticError(f"non-finite loss in boosting stage {stage_index}")
        vel = TanhStage(cfg.gd_momentum * vel.w1 - cfg.gd_step_size * g.w1,
                        cfg.gd_momentum * vel.b1 - cfg.gd_step_size * g.b1,
                        cfg.gd_momentum * vel.w2 - cfg.gd_step_size * g.w2,
                        cfg.gd_momentum * vel.b2 - cfg.gd_step_size * g.b2)
        stage = TanhStage(stage.w1 + vel.w1, stage.b1 + vel.b1,
                          stage.w2 + vel.w2, stage.b2 + vel.b2)
    return stage


def fit_boosted_tanh(train: Dataset, space: FactorSpace, response: str,
                     config: BoostConfig = BoostConfig()) -> BoostedTanhNet:
    """Stagewise boosting of small tanh networks on a continuous response.

    Each stage is fit to the current residuals by full-batch gradient
    descent, then refit affinely against the residuals so that applying it
    at learning rate in (0, 2) can never increase the training loss.  Rows
    with missing cells are dropped; run apply_missing_policy first to keep
    them.  A fixed seed reproduces the model bit for bit.
    """
    rows = _complete_rows(train, list(space.names) + [response])
    used = train.take(rows)
    if used.n < 20:
        raise DataError(f"need at least 20 complete rows to boost, got {used.n}")
    ycol = used.column(response)
    if not ycol.is_numeric:
        raise DataError(f"response {response} must be continuous")

    enc = encode(used, space)
    x_mean = enc.values.mean(axis=0)
    x_scale = enc.values.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    xs = (enc.values - x_mean) / x_scale
    y = ycol.values.astype(float)

    rng = np.random.default_rng(config.seed)
    base = float(y.mean())
    resid = y - base
    sst = float((resid ** 2).sum())
    stages: list[TanhStage] = []
    history: list[float] = []
    for s in range(config.stages):
        scale = float(resid.std())
        if scale < 1e-12:
            scale = 1.0
        stage = _fit_stage(xs, resid / scale, config, rng, s)
        raw = stage.output(xs)
        # Affine refit of the stage against the residuals: the applied stage
        # is then the projection of the residuals onto span{raw, 1}, and the
        # boosting loss is non-increasing for any rate in (0, 2).
        design = np.column_stack([raw, np.ones(len(raw))])
        (alpha, gamma), *_ = np.linalg.lstsq(design, resid / scale, rcond=None)
        folded = TanhStage(stage.w1, stage.b1, scale * alpha * stage.w2,
                           scale * (alpha * stage.b2 + gamma))
        resid = resid - config.rate * folded.output(xs)
        stages.append(folded)
        history.append(float(np.mean(resid ** 2)))
    r2 = 1.0 - float((resid ** 2).sum()) / sst if sst > 0 else 1.0
    return BoostedTanhNet(space, response, tuple(stages), config.rate, base,
                          x_mean, x_scale, r2, tuple(history),
                          _summary(used, space, [response], r2))


# ---------------------------------------------------------------------------
# informative missing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MissingPolicy:
    informative_missing: bool = True
    indicator_suffix: str = " missing"


@dataclass(frozen=True)
class MissingImputer:
    """Imputation fills learned from training data, plus the indicator factors.

    `fills` covers every factor (mean for continuous, modal level otherwise);
    `indicators` names the factors that had missing cells in the training
    data and therefore carry a two-level presence factor ("0" observed,
    "1" was missing).
    """
    space: FactorSpace
    fills: dict[str, float | str]
    indicators: tuple[str, ...]
    suffix: str = " missing"

    def augmented_space(self) -> FactorSpace:
        extra = tuple(FactorDef(n + self.suffix, Categorical(("0", "1")))
                      for n in self.indicators)
        return FactorSpace(self.space.factors + extra)

    def apply(self, data: Dataset) -> Dataset:
        """Impute factor cells with the training fills and add indicator
        columns; non-factor columns pass through unchanged."""
        new_cols = {c.name: c for c in data.columns}
        extra: list = []
        for f in self.space.factors:
            col = data.column(f.name)
            if col.missing.any():
                if isinstance(f.kind, Continuous):
                    vals = col.values.copy()
                    vals[col.missing] = float(self.fills[f.name])
                    new_cols[f.name] = numeric_column(f.name, vals,
                                                      np.zeros(len(vals), dtype=bool))
                else:
                    vals = col.values.astype(object).copy()
                    vals[col.missing] = self.fills[f.name]
                    new_cols[f.name] = level_column(f.name, vals)
            if f.name in self.indicators:
                ind_vals = np.where(col.missing, "1", "0").astype(object)
                extra.append(level_column(f.name + self.suffix, ind_vals))
        ordered = [new_cols[c.name] for c in data.columns] + extra
        return Dataset(tuple(ordered))

    def augment_settings(self, settings: Mapping[str, float | str | None]
                         ) -> dict[str, float | str]:
        """Lift raw settings (None = missing) into the augmented space."""
        out: dict[str, float | str] = {}
        for f in self.space.factors:
            v = settings.get(f.name)
            out[f.name] = self.fills[f.name] if v is None else v
            if f.name in self.indicators:
                out[f.name + self.suffix] = "1" if v is None else "0"
        return out


def missing_imputer(train: Dataset, space: FactorSpace,
                    policy: MissingPolicy = MissingPolicy()) -> MissingImputer:
    fills: dict[str, float | str] = {}
    indicators: list[str] = []
    for f in space.factors:
        col = train.column(f.name)
        if isinstance(f.kind, Continuous):
            fills[f.name] = float(col.present().mean())
        else:
            levels, counts = np.unique(col.present().astype(str), return_counts=True)
            fills[f.name] = str(levels[counts.argmax()])
        if col.missing.any():
            ind_name = f.name + policy.indicator_suffix
            if ind_name in train.names or ind_name in space:
                raise DataError(f"indicator name {ind_name!r} collides with an existing column")
            indicators.append(f.name)
    return MissingImputer(space, fills, tuple(indicators), policy.indicator_suffix)


def apply_missing_policy(data: Dataset, space: FactorSpace,
                         policy: MissingPolicy = MissingPolicy()
                         ) -> tuple[Dataset, FactorSpace]:
    """Mean-impute missing factor cells and add presence indicators.

    Every factor with at least one missing cell gets its cells imputed
    (mean for continuous, modal level otherwise) plus a two-level indicator
    factor.  With the policy off, or with no missing cells, data and space
    pass through unchanged.
    """
    if not policy.informative_missing:
        return data, space
    imputer = missing_imputer(data, space, policy)
    return imputer.apply(data), imputer.augmented_space()


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def model_to_json(model: Predictor) -> dict:
    if isinstance(model, LeastSquaresModel):
        return {"type": "least_squares", "space": model.space.to_json(),
                "response": model.response, "coef": model.coef.tolist(),
                "r2": model.r2,
                "leverage": _leverage_to_json(model.leverage_model),
                "training": model.training.to_json()}
    if isinstance(model, BoostedTanhNet):
        return {"type": "boosted_tanh", "space": model.space.to_json(),
                "response": model.response, "rate": model.rate, "base": model.base,
                "x_mean": model.x_mean.tolist(), "x_scale": model.x_scale.tolist(),
                "stages": [{"w1": s.w1.tolist(), "b1": s.b1.tolist(),
                            "w2": s.w2.tolist(), "b2": s.b2} for s in model.stages],
                "r2": model.r2, "loss_history": list(model.loss_history),
                "training": model.training.to_json()}
    raise TypeError(f"cannot serialize predictor of type {type(model).__name__}")


def model_from_json(doc: Mapping) -> Predictor:
    space = FactorSpace.from_json(doc["space"])
    training = TrainingSummary.from_json(doc["training"])
    if doc["type"] == "least_squares":
        return LeastSquaresModel(space, doc["response"],
                                 np.asarray(doc["coef"], dtype=float), float(doc["r2"]),
                                 _leverage_from_json(doc["leverage"]), training)
    if doc["type"] == "boosted_tanh":
        stages = tuple(TanhStage(np.asarray(s["w1"], dtype=float),
                                 np.asarray(s["b1"], dtype=float),
                                 np.asarray(s["w2"], dtype=float), float(s["b2"]))
                       for s in doc["stages"])
        return BoostedTanhNet(space, doc["response"], stages, float(doc["rate"]),
                              float(doc["base"]), np.asarray(doc["x_mean"], dtype=float),
                              np.asarray(doc["x_scale"], dtype=float), float(doc["r2"]),
                              tuple(doc["loss_history"]), training)
    raise ValueError(f"unknown model type {doc['type']!r}")


def _leverage_to_json(m: ex.LeverageModel) -> dict:
    rule = ({"type": "max_leverage", "k": m.rule.k}
            if isinstance(m.rule, ex.MaxLeverage)
            else {"type": "average_leverage", "l": m.rule.l})
    return {"kind": "leverage", "xtx_inv": m.xtx_inv.tolist(), "max_h": m.max_h,
            "avg_h": m.avg_h, "p": m.p, "n": m.n, "rule": rule}


def _leverage_from_json(doc: Mapping) -> ex.LeverageModel:
    rule_doc = doc["rule"]
    rule: ex.LeverageRule = (ex.MaxLeverage(float(rule_doc["k"]))
                             if rule_doc["type"] == "max_leverage"
                             else ex.AverageLeverage(float(rule_doc["l"])))
    return ex.LeverageModel(np.asarray(doc["xtx_inv"], dtype=float), float(doc["max_h"]),
                            float(doc["avg_h"]), int(doc["p"]), int(doc["n"]), rule)


def _regt2_to_json(m: ex.RegT2Model) -> dict:
    c = m.cov
    return {"kind": "regt2", "mean": c.mean.tolist(), "sample_cov": c.sample_cov.tolist(),
            "target": c.target.tolist(), "lambda": c.lam, "sigma": c.sigma.tolist(),
            "pair_counts": c.pair_counts.tolist(), "t2_train": m.t2_train.tolist(),
            "t2_mean": m.t2_mean, "t2_sd": m.t2_sd, "sigma_mult": m.sigma_mult,
            "ucl": m.ucl}


def _regt2_from_json(doc: Mapping) -> ex.RegT2Model:
    sigma = np.asarray(doc["sigma"], dtype=float)
    cov = ShrunkCovariance(np.asarray(doc["mean"], dtype=float),
                           np.asarray(doc["sample_cov"], dtype=float),
                           np.asarray(doc["target"], dtype=float), float(doc["lambda"]),
                           sigma, np.asarray(doc["pair_counts"], dtype=int),
                           np.linalg.cholesky(sigma))
    return ex.RegT2Model(cov, np.asarray(doc["t2_train"], dtype=float),
                         float(doc["t2_mean"]), float(doc["t2_sd"]),
                         float(doc["sigma_mult"]), float(doc["ucl"]))


def extrap_to_json(model: ex.ExtrapolationModel) -> dict:
    return _leverage_to_json(model) if model.kind == "leverage" else _regt2_to_json(model)


def extrap_from_json(doc: Mapping) -> ex.ExtrapolationModel:
    return _leverage_from_json(doc) if doc["kind"] == "leverage" else _regt2_from_json(doc)


def save_artifact(path, predictor: Predictor,
                  extrap: ex.ExtrapolationModel | None = None) -> None:
    """Write a profiler artifact: predictor plus extrapolation metric."""
    if extrap is None and isinstance(predictor, LeastSquaresModel):
        extrap = predictor.leverage_model
    doc = {"v": 1, "predictor": model_to_json(predictor),
           "extrapolation": None if extrap is None else extrap_to_json(extrap)}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_artifact(path) -> tuple[Predictor, ex.ExtrapolationModel | None]:
    with open(path) as fh:
        doc = json.load(fh)
    return artifact_from_json(doc)


def artifact_from_json(doc: Mapping) -> tuple[Predictor, ex.ExtrapolationModel | None]:
    if doc.get("v") != 1:
        raise ValueError(f"unsupported artifact version {doc.get('v')!r}")
    predictor = model_from_json(doc["predictor"])
    extrap = None if doc.get("extrapolation") is None else extrap_from_json(doc["extrapolation"])
    return predictor, extrap
