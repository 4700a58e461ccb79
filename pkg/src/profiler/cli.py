"""Batch entry points: fit models, optimize desirability, run studies, serve.

Every command reads and writes JSON documents so artifacts flow between the
CLI, the HTTP service, and the browser UI unchanged.  `--json` switches the
human summary lines to machine-readable JSON lines on stdout.  Exit code is
0 exactly when the requested artifact was fully produced.
"""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .desirability import Goal
from .engine import Profiler
from .extrapolation import MaxLeverage, AverageLeverage, fit_regt2_model
from .factors import Dataset, FactorSpace, encode, holdout_split, infer_factor_space, load_csv
from .models import (BoostConfig, MissingPolicy, fit_boosted_tanh,
                     fit_least_squares, load_artifact, missing_imputer, save_artifact)
from .optimizer import GAConfig
from .simulation import SimulationScenario, StudyResult, run_study, write_records_csv


def _emit(as_json: bool, message: str, payload: dict) -> None:
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(message)


@click.group()
def main():
    """Extrapolation-controlled prediction profiler."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--response", required=True, help="Response column name.")
@click.option("--model", "model_kind", type=click.Choice(["ls", "boosted"]), default="ls")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--schema", type=click.Path(exists=True),
              help="Factor-space JSON overriding column parsing.")
@click.option("--ordinal", multiple=True, help="Columns to treat as ordinal (repeatable).")
@click.option("--holdout", type=int, default=None, help="Rows to hold out for validation.")
@click.option("--seed", type=int, default=0, help="Holdout split seed.")
@click.option("--informative-missing", is_flag=True,
              help="Mean-impute missing cells and add presence indicator factors.")
@click.option("--metric", type=click.Choice(["auto", "leverage", "regt2"]), default="auto",
              help="Extrapolation metric stored in the artifact.")
@click.option("--leverage-k", type=float, default=None,
              help="Use threshold k * max leverage (default rule, k=1).")
@click.option("--leverage-l", type=float, default=None,
              help="Use threshold l * p/n instead of the max-leverage rule.")
@click.option("--stages", type=int, default=20, help="Boosting stages.")
@click.option("--neurons", type=int, default=3, help="Hidden neurons per stage.")
@click.option("--rate", type=float, default=0.1, help="Boosting learning rate.")
@click.option("--fit-seed", type=int, default=0, help="Network init seed.")
@click.option("--json", "as_json", is_flag=True, help="JSON-lines summaries.")
def fit(data_path, response, model_kind, out_path, schema, ordinal, holdout, seed,
        informative_missing, metric, leverage_k, leverage_l, stages, neurons, rate,
        fit_seed, as_json):
    """Fit a model and write a profiler artifact."""
    schema_space = None
    if schema:
        schema_space = FactorSpace.loads(Path(schema).read_text())
    data = load_csv(data_path, schema_space)
    if response not in data.names:
        raise click.ClickException(f"response column {response!r} not in {data_path}")

    train, hold = (data, None)
    if holdout is not None:
        train, hold = holdout_split(data, holdout, seed)

    space = infer_factor_space(train.drop([response]), ordinal=ordinal)
    imputer = None
    if informative_missing:
        imputer = missing_imputer(train, space, MissingPolicy())
        train = imputer.apply(train)
        space = imputer.augmented_space()

    if model_kind == "ls":
        rule = MaxLeverage(1.0 if leverage_k is None else leverage_k)
        if leverage_l is not None:
            rule = AverageLeverage(leverage_l)
        predictor = fit_least_squares(train, space, response, rule)
        extrap = predictor.leverage_model if metric != "regt2" else None
    else:
        config = BoostConfig(neurons=neurons, stages=stages, rate=rate, seed=fit_seed)
        predictor = fit_boosted_tanh(train, space, response, config)
        extrap = None
    if extrap is None:
        extrap = fit_regt2_model(encode(train, space))

    validation_r2 = None
    if hold is not None:
        validation_r2 = _validation_r2(predictor, hold, response, imputer)

    save_artifact(out_path, predictor, extrap)
    _emit(as_json,
          f"wrote {out_path}: training R2 = {predictor.r2:.3f}"
          + (f", validation R2 = {validation_r2:.3f}" if validation_r2 is not None else ""),
          {"event": "fit", "out": str(out_path), "model": model_kind,
           "train_r2": predictor.r2, "validation_r2": validation_r2,
           "n_train": predictor.training.n_rows})


def _validation_r2(predictor, hold: Dataset, response: str, imputer) -> float | None:
    ycol = hold.column(response)
    base = [r for r in predictor.training.response_range][0]
    preds, actual = [], []
    for i in range(hold.n):
        if ycol.missing[i]:
            continue
        settings = hold.row_settings(i)
        settings.pop(response, None)
        if imputer is not None:
            settings = imputer.augment_settings(settings)
        elif any(v is None for v in settings.values()):
            continue
        preds.append(predictor.predict(settings)[response])
        actual.append(float(ycol.values[i]))
    if len(actual) < 2:
        return None
    actual_arr, pred_arr = np.asarray(actual), np.asarray(preds)
    sse = float(((actual_arr - pred_arr) ** 2).sum())
    sst = float(((actual_arr - actual_arr.mean()) ** 2).sum())
    return 1.0 - sse / sst if sst > 0 else None


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["off", "warn", "constrain"]), default="constrain")
@click.option("--goals", "goals_path", required=True, type=click.Path(exists=True),
              help="JSON mapping response name to a goal document.")
@click.option("--ga", "ga_path", type=click.Path(exists=True), help="GA config overrides JSON.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def optimize(model_path, mode, goals_path, ga_path, out_path, as_json):
    """Maximize overall desirability, honoring the extrapolation constraint."""
    predictor, extrap = load_artifact(model_path)
    goals_doc = json.loads(Path(goals_path).read_text())
    goals = {name: Goal.from_json(doc) for name, doc in goals_doc.items()}
    config = GAConfig.from_json(json.loads(Path(ga_path).read_text())) if ga_path else GAConfig()

    profiler = Profiler(predictor, extrap, goals, mode)
    report = profiler.optimize_desirability(config)
    doc = {"v": 1, "mode": mode, "report": report.to_json(),
           "state": profiler.state_json(include_traces=False)}
    Path(out_path).write_text(json.dumps(doc, indent=2))
    _emit(as_json,
          f"wrote {out_path}: desirability = {report.objective:.4f}, "
          f"feasible = {report.feasible}",
          {"event": "optimize", "out": str(out_path), "objective": report.objective,
           "feasible": report.feasible, "metric": report.metric_value,
           "threshold": report.threshold})


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def simulate(scenario_path, out_dir, as_json):
    """Run a simulation study scenario into OUT_DIR.

    The scenario JSON takes: n, p, r (required), p_cat (0), n_grid (20),
    replicates (100), alpha (0.05), seed (0), variant
    ("regularized" | "pseudo_inverse"), noise ("matrix" | "broadcast").

    Outputs: replicates.csv with one row per replicate x grid rank and
    columns (replicate, rank, t2_true, label, metric, flagged);
    summary.json with the scenario, per-rank TPR with 95% confidence
    intervals, the grid-point FPR, the fresh-draw flag rate, and one
    summary row per replicate (lambda, UCL, training-T2 stats, rates);
    tpr.svg, a plain line chart of TPR against grid rank.
    """
    doc = json.loads(Path(scenario_path).read_text())
    try:
        scenario = SimulationScenario.from_json(doc)
    except (TypeError, ValueError) as err:
        raise click.ClickException(str(err))
    result = run_study(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(result, out / "replicates.csv")
    (out / "summary.json").write_text(json.dumps(result.to_json(), indent=2))
    (out / "tpr.svg").write_text(tpr_svg(result))
    _emit(as_json,
          f"wrote {out}/replicates.csv, summary.json, tpr.svg "
          f"(grid FPR = {_fmt(result.fpr)}, fresh FPR = {result.fresh_fpr:.4f})",
          {"event": "simulate", "out": str(out), "fpr": result.fpr,
           "fresh_fpr": result.fresh_fpr,
           "tpr_by_rank": [t.tpr for t in result.tpr_by_rank]})


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


@main.command()
@click.option("--data-dir", required=True, type=click.Path(),
              envvar="PROFILER_DATA_DIR", help="Directory of model artifact JSON files.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8080, type=int)
@click.option("--static-dir", type=click.Path(), default=None,
              help="Optional directory with the built web UI.")
def serve(data_dir, host, port, static_dir):
    """Run the HTTP/JSON profiler service."""
    import uvicorn

    from .service import create_app
    app = create_app(data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def tpr_svg(result: StudyResult, width: int = 480, height: int = 300) -> str:
    """Minimal SVG line chart of TPR (and grid FPR) against grid rank."""
    pad = 40
    n = result.scenario.n_grid
    xs = lambda rank: pad + (rank - 1) / max(n - 1, 1) * (width - 2 * pad)
    ys = lambda rate: height - pad - rate * (height - 2 * pad)
    pts = [(xs(t.rank), ys(t.tpr)) for t in result.tpr_by_rank if t.tpr is not None]
    poly = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
    fpr_y = ys(result.fpr) if result.fpr is not None else None
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">grid rank (extent of extrapolation)</text>',
        f'<text x="12" y="{height / 2:.0f}" font-size="12" transform="rotate(-90 12 {height / 2:.0f})" text-anchor="middle">rate</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{ys(frac) + 4:.1f}" text-anchor="end" '
                     f'font-size="10">{frac:.1f}</text>')
    if poly:
        parts.append(f'<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
        parts.extend(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2.5" fill="#1f77b4"/>' for x, y in pts)
    if fpr_y is not None:
        parts.append(f'<line x1="{pad}" y1="{fpr_y:.1f}" x2="{width - pad}" y2="{fpr_y:.1f}" '
                     f'stroke="#d62728" stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{width - pad}" y="{fpr_y - 5:.1f}" text-anchor="end" '
                     f'font-size="10" fill="#d62728">grid FPR</text>')
    parts.append(f'<text x="{width - pad}" y="{pad - 8}" text-anchor="end" font-size="10" '
                 f'fill="#1f77b4">TPR per rank</text>')
    parts.append("</svg>")
    return "\n".join(parts)


if __name__ == "__main__":
    main()
