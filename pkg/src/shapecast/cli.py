"""Command-line driver: simulation runs, registration, prediction,
rolling evaluation, cross-validation, and raw-data ingestion.

Every subcommand reads an optional key = value config file, applies flag
overrides on top, writes CSV outputs plus a run manifest, and exits with a
category-specific code: 0 success, 2 usage, 3 unreadable file, 4 invalid
config, 1 anything else.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import io as sio
from .curves import Grid
from .exceptions import ConfigError, IngestError, ShapecastError
from .pipeline import SpModelConfig, mc_cross_validate, rolling_evaluate, sp_fit_predict
from .registration import register_sample
from .simulate import Setup1Config, Setup2Config, run_experiment

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNREADABLE = 3
EXIT_BAD_CONFIG = 4

_SP_SCHEMA = {
    "g": int, "l": int, "p": "int_or_none", "d": "int_or_none",
    "predictor_mode": str, "warp_mode": str, "dp_grid": int, "seed": int,
    "p_max": int, "d_max": int, "restarts": int,
    "register_max_iter": int, "register_tol": float,
}


def _fail(category: str, message: str, code: int):
    click.echo(f"error category={category} message={message}", err=True)
    sys.exit(code)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        raw = sio.read_config(path)
        return sio.coerce_config(raw, _SP_SCHEMA)
    except ConfigError as exc:
        _fail("invalid-config", str(exc), EXIT_BAD_CONFIG)


def _sp_config(config_path, **overrides) -> SpModelConfig:
    merged = _load_config(config_path)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SpModelConfig(**merged)
    except (TypeError, ValueError) as exc:
        _fail("invalid-config", str(exc), EXIT_BAD_CONFIG)


def _read_curves(path):
    try:
        return sio.read_curve_matrix(path)
    except (OSError, IngestError) as exc:
        _fail("unreadable-file", f"{path}: {exc}", EXIT_UNREADABLE)
    except ValueError as exc:
        _fail("invalid-data", f"{path}: {exc}", EXIT_UNREADABLE)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def main():
    """Shape-preserving forecasting for functional time series."""


@main.command()
@click.option("--setup", type=click.Choice(["1", "2"]), required=True)
@click.option("--tau", type=float, default=0.2, show_default=True)
@click.option("--p", "p_diag", type=float, default=0.9, show_default=True,
              help="Self-transition probability (setup 1).")
@click.option("--beta", type=float, default=0.5, show_default=True)
@click.option("--lambda1", type=float, default=0.8, show_default=True)
@click.option("--n", "n_curves", type=int, default=200, show_default=True)
@click.option("--replicates", type=int, default=10, show_default=True)
@click.option("--methods", default="sp,ao", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid-points", type=int, default=101, show_default=True)
@click.option("--dp-grid", type=int, default=101, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default="simulate-out", show_default=True)
def simulate(setup, tau, p_diag, beta, lambda1, n_curves, replicates, methods,
             seed, grid_points, dp_grid, config_path, out):
    """Run the benchmark generators and emit a comparison table."""
    try:
        if setup == "1":
            cfg = Setup1Config(N=n_curves, p_diag=p_diag, tau=tau, lambda1=lambda1,
                               seed=seed, n_replicates=replicates,
                               grid_points=grid_points)
        else:
            cfg = Setup2Config(N=n_curves, beta=beta, lambda1=lambda1, seed=seed,
                               n_replicates=replicates, grid_points=grid_points)
    except ValueError as exc:
        _fail("invalid-config", str(exc), EXIT_BAD_CONFIG)
    sp_cfg = _sp_config(config_path, seed=seed, dp_grid=dp_grid, g=4, l=2,
                        p=None, d=None)
    method_list = tuple(m.strip() for m in methods.split(",") if m.strip())
    try:
        result = run_experiment(cfg, methods=method_list, sp_config=sp_cfg)
    except ShapecastError as exc:
        _fail("run-failed", str(exc), EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_experiment_rows(outdir / "table.csv", result.rows)
    sio.write_manifest(outdir / "manifest.json", "simulate", seed, vars(cfg) | {
        "methods": methods, "dp_grid": dp_grid})
    for row in result.rows:
        click.echo(
            f"setup {row.setup} {row.method}: "
            f"l2 {row.l2_mean:.3f}({row.l2_sd:.3f}) "
            f"fr {row.fr_mean:.3f}({row.fr_sd:.3f})"
        )


@main.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--max-iter", type=int, default=10, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--dp-grid", type=int, default=101, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="register-out", show_default=True)
def register(data, max_iter, tol, dp_grid, seed, out):
    """Split curves into amplitude and warping components."""
    curves = _read_curves(data)
    try:
        result = register_sample(curves, max_iter=max_iter, tol=tol, dp_grid=dp_grid)
    except ShapecastError as exc:
        _fail("run-failed", str(exc), EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_curve_matrix(outdir / "amplitudes.csv", result.amplitudes)
    sio.write_curve_matrix(outdir / "warpings.csv", [w.curve for w in result.warpings])
    sio.write_manifest(outdir / "manifest.json", "register", seed, {
        "data": str(data), "max_iter": max_iter, "tol": tol, "dp_grid": dp_grid,
        "iterations": result.iterations, "converged": result.converged})
    click.echo(
        f"registered {len(curves)} curves in {result.iterations} sweeps "
        f"(converged={result.converged})"
    )


@main.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--g", type=int, default=None)
@click.option("--l", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--d", type=int, default=None)
@click.option("--predictor-mode", type=click.Choice(["binary", "weighted"]), default=None)
@click.option("--warp-mode", type=click.Choice(["hard", "soft"]), default=None)
@click.option("--dp-grid", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default="predict-out", show_default=True)
def predict(data, g, l, p, d, predictor_mode, warp_mode, dp_grid, seed,
            config_path, out):
    """One-step-ahead prediction of the next curve."""
    curves = _read_curves(data)
    cfg = _sp_config(config_path, g=g, l=l, p=p, d=d,
                     predictor_mode=predictor_mode, warp_mode=warp_mode,
                     dp_grid=dp_grid, seed=seed)
    try:
        report = sp_fit_predict(curves, cfg)
    except ShapecastError as exc:
        _fail("run-failed", str(exc), EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_curve_matrix(
        outdir / "prediction.csv",
        [report.predicted, report.predicted_amplitude, report.predicted_warping.curve],
    )
    sio.write_manifest(outdir / "manifest.json", "predict", cfg.seed, {
        "data": str(data), **{k: getattr(cfg, k) for k in (
            "g", "l", "p", "d", "predictor_mode", "warp_mode", "dp_grid")}})
    click.echo(f"prediction written to {outdir / 'prediction.csv'}")
    if report.flags:
        click.echo(f"flags: {','.join(report.flags)}", err=True)


@main.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--window", type=int, default=50, show_default=True)
@click.option("--methods", default="sp,ao", show_default=True)
@click.option("--g", type=int, default=None)
@click.option("--l", type=int, default=None)
@click.option("--p", type=int, default=None)
@click.option("--d", type=int, default=None)
@click.option("--dp-grid", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default="evaluate-out", show_default=True)
def evaluate(data, window, methods, g, l, p, d, dp_grid, seed, config_path, out):
    """Rolling-origin comparison of the two predictors."""
    curves = _read_curves(data)
    cfg = _sp_config(config_path, g=g, l=l, p=p, d=d, dp_grid=dp_grid, seed=seed)
    method_list = tuple(m.strip() for m in methods.split(",") if m.strip())
    try:
        summaries = rolling_evaluate(curves, window, methods=method_list, config=cfg)
    except (ShapecastError, ValueError) as exc:
        _fail("run-failed", str(exc), EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_method_summaries(outdir / "evaluation.csv", summaries)
    sio.write_manifest(outdir / "manifest.json", "evaluate", cfg.seed, {
        "data": str(data), "window": window, "methods": methods})
    for method, s in summaries.items():
        click.echo(
            f"{method}: l2 {s.mean_l2:.3f}({s.sd_l2:.3f}) "
            f"fr {s.mean_fr:.3f}({s.sd_fr:.3f}) n={s.n_predictions}"
        )


@main.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--g-candidates", default="3,4,5", show_default=True)
@click.option("--l-candidates", default="1,2", show_default=True)
@click.option("--splits", type=int, default=5, show_default=True)
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default="cv-out", show_default=True)
def cv(data, g_candidates, l_candidates, splits, train_fraction, seed,
       config_path, out):
    """Monte-Carlo cross-validation over hidden-state counts."""
    curves = _read_curves(data)
    cfg = _sp_config(config_path, seed=seed)
    try:
        gs = [int(x) for x in g_candidates.split(",")]
        ls = [int(x) for x in l_candidates.split(",")]
    except ValueError as exc:
        _fail("invalid-config", f"bad candidate list: {exc}", EXIT_BAD_CONFIG)
    try:
        results = mc_cross_validate(curves, gs, ls, cfg, n_splits=splits,
                                    train_fraction=train_fraction)
    except (ShapecastError, ValueError) as exc:
        _fail("run-failed", str(exc), EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_cv_table(outdir / "cv.csv", results)
    sio.write_manifest(outdir / "manifest.json", "cv", cfg.seed, {
        "data": str(data), "g_candidates": g_candidates,
        "l_candidates": l_candidates, "splits": splits,
        "train_fraction": train_fraction})
    for (g_, l_), cell in sorted(results.items()):
        status = "skipped" if cell.skipped else (
            f"l2 {cell.mean_l2:.3f} fr {cell.mean_fr:.3f}")
        click.echo(f"g={g_} l={l_}: {status}")


@main.command()
@click.option("--data", required=True, type=click.Path())
@click.option("--region", default="NINO1+2", show_default=True,
              help="Region column name in the header.")
@click.option("--year-start", type=int, default=None)
@click.option("--year-end", type=int, default=None)
@click.option("--exclude-years", default="", help="Comma-separated years to drop.")
@click.option("--n-basis", type=int, default=11, show_default=True)
@click.option("--grid-points", type=int, default=101, show_default=True)
@click.option("--out", type=click.Path(), default="ingest-out", show_default=True)
def ingest(data, region, year_start, year_end, exclude_years, n_basis,
           grid_points, out):
    """Smooth monthly temperature records into annual curves."""
    year_range = None
    if year_start is not None or year_end is not None:
        year_range = (year_start or -10**9, year_end or 10**9)
    try:
        excluded = [int(y) for y in exclude_years.split(",") if y.strip()]
    except ValueError as exc:
        _fail("invalid-config", f"bad year list: {exc}", EXIT_BAD_CONFIG)
    try:
        curves, years, warnings = sio.ingest_sst(
            data, region, year_range=year_range, excluded_years=excluded,
            n_basis=n_basis, grid=Grid.uniform(grid_points))
    except IngestError as exc:
        _fail("unreadable-file", str(exc), EXIT_UNREADABLE)
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    if not curves:
        _fail("run-failed", "no complete years retained", EXIT_ERROR)
    outdir = _outdir(out)
    sio.write_curve_matrix(outdir / "curves.csv", curves)
    (outdir / "years.txt").write_text("\n".join(str(y) for y in years) + "\n",
                                      encoding="utf-8")
    sio.write_manifest(outdir / "manifest.json", "ingest", 0, {
        "data": str(data), "region": region, "year_range": year_range,
        "excluded_years": excluded, "n_basis": n_basis})
    click.echo(f"wrote {len(curves)} annual curves to {outdir / 'curves.csv'}")


if __name__ == "__main__":
    main()
