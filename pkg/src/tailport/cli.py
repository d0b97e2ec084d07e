"""Command-line pipeline driver.

Subcommands cover the full workflow: simulate a panel, fit tail forecasts,
build and validate the tail-risk matrix, score centrality, optimize weights,
prune the asset universe, run the rolling backtest, and compare Sharpe
ratios.  Numeric output is written as CSV files with 12-significant-digit
values into the ``--out`` directory, plus a ``summary.txt`` per command.

Exit codes: 0 on success, 1 on any data or numeric error (reported as a
single ``ERROR:<category>:<message>`` line on stderr), 2 on usage errors.
A flat ``key=value`` config file can preset the shared options; explicit
flags win over the file, the file wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import backtest as bt
from . import netgraph, portfolio, riskmatrix, simulate
from .dataio import (
    ReturnPanel,
    format_value,
    read_matrix_csv,
    read_panel_csv,
    read_series_csv,
    write_matrix_csv,
    write_panel_csv,
    write_series_csv,
)
from .errors import ConfigError, DomainError, TailportError

__all__ = ["build_parser", "main"]

_CONFIG_KEYS = {
    "tau": ("tau", float),
    "window": ("window", int),
    "mode": ("mode", str),
    "seed": ("seed", int),
    "threads": ("threads", int),
    "long_only": ("long_only", None),  # parsed as a boolean below
    "out": ("out", str),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailport",
        description="Tail-risk network portfolio pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tau", type=float, default=0.05,
                        help="tail probability (default 0.05)")
    common.add_argument("--window", type=int, default=250,
                        help="estimation window length (default 250)")
    common.add_argument("--mode", choices=("strict", "permissive"),
                        default="strict", help="failure handling (default strict)")
    common.add_argument("--long-only", action="store_true", dest="long_only",
                        help="disallow short positions")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for pairwise fits")
    common.add_argument("--config", default=None,
                        help="key=value file presetting the shared options")

    p = sub.add_parser("simulate", parents=[common],
                       help="draw a synthetic panel and state variables")
    p.add_argument("--n-assets", "--n", type=int, default=40, dest="n_assets")
    p.add_argument("--n-predictors", "--k", type=int, default=7,
                   dest="n_predictors")
    p.add_argument("--horizon", "--t", type=int, default=500, dest="horizon")
    p.add_argument("--tail-strength", type=float, default=1.0)
    p.add_argument("--tail-prob", type=float, default=0.05)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit-tails", parents=[common],
                       help="quantile-regression tail forecasts")
    p.add_argument("--panel", required=True)
    p.add_argument("--macros", required=True)
    p.set_defaults(func=_cmd_fit_tails)

    p = sub.add_parser("build-matrix", parents=[common],
                       help="assemble and validate the tail-risk matrix")
    p.add_argument("--panel", required=True)
    p.add_argument("--macros", required=True)
    p.set_defaults(func=_cmd_build_matrix)

    p = sub.add_parser("centrality", parents=[common],
                       help="eigenvector centrality of the spillover network")
    _matrix_or_panel(p)
    p.set_defaults(func=_cmd_centrality)

    p = sub.add_parser("optimize", parents=[common],
                       help="minimum-risk portfolio weights")
    _matrix_or_panel(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("prune", parents=[common],
                       help="remove central assets while removal lowers risk")
    _matrix_or_panel(p)
    p.add_argument("--min-assets", type=int, default=2)
    p.add_argument("--max-removals", type=int, default=None)
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("backtest", parents=[common],
                       help="rolling out-of-sample evaluation")
    p.add_argument("--panel", required=True)
    p.add_argument("--macros", required=True)
    p.add_argument("--strategy", default="full",
                   choices=("full", "remove-most-central",
                            "remove-least-central", "prune"))
    p.add_argument("--count", type=int, default=0,
                   help="assets to remove for the fixed-count strategies")
    p.add_argument("--min-assets", type=int, default=2)
    p.add_argument("--max-removals", type=int, default=None)
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("sharpe-test", parents=[common],
                       help="test two return series for equal Sharpe ratios")
    p.add_argument("--x", required=True, help="CSV with the first return series")
    p.add_argument("--y", required=True, help="CSV with the second return series")
    p.add_argument("--method", default="asymptotic",
                   choices=("asymptotic", "hac", "iid-bootstrap",
                            "circular-bootstrap"))
    p.add_argument("--reps", type=int, default=1000,
                   help="bootstrap replications")
    p.add_argument("--block", type=int, default=None,
                   help="circular bootstrap block length")
    p.set_defaults(func=_cmd_sharpe_test)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        _apply_config(args, parser)
        return args.func(args)
    except FileNotFoundError as exc:
        _report_error("missing-file", str(exc))
        return 1
    except TailportError as exc:
        _report_error(exc.category, str(exc))
        return 1


def _matrix_or_panel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--panel", default=None)
    p.add_argument("--macros", default=None)
    p.add_argument("--matrix", default=None,
                   help="CSV with a ready-made symmetric tail-risk matrix")


def _report_error(category: str, message: str) -> None:
    line = message.replace("\n", " ")
    print(f"ERROR:{category}:{line}", file=sys.stderr)


def _apply_config(args, parser) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    unknown = set(values) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    defaults = {
        "tau": 0.05, "window": 250, "mode": "strict", "seed": 0,
        "threads": 1, "long_only": False, "out": "out",
    }
    for key, (attr, cast) in _CONFIG_KEYS.items():
        if key not in values or not hasattr(args, attr):
            continue
        if getattr(args, attr) != defaults[attr]:
            continue  # explicitly set on the command line
        raw = values[key]
        try:
            if cast is None:
                parsed = raw.lower() in ("1", "true", "yes", "on")
            else:
                parsed = cast(raw)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
        setattr(args, attr, parsed)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _load_inputs(args) -> tuple[ReturnPanel, np.ndarray]:
    panel = read_panel_csv(args.panel)
    macro_panel = read_panel_csv(args.macros)
    return panel, macro_panel.values


def _windowed(panel: ReturnPanel, macros: np.ndarray, window: int):
    """Use the trailing ``window`` rows for one-shot estimation commands."""
    t = panel.n_periods
    lo = max(0, t - int(window))
    trimmed = ReturnPanel(panel.values[lo:], panel.timestamps[lo:], panel.asset_ids)
    return trimmed, macros[lo:]


def _estimate_matrix(args) -> tuple[riskmatrix.RiskMatrix, ReturnPanel | None]:
    """Risk matrix from --matrix, or estimated from --panel/--macros."""
    pd_mode = "strict" if args.mode == "strict" else "floor"
    if getattr(args, "matrix", None):
        matrix, ids = read_matrix_csv(args.matrix)
        return riskmatrix.from_matrix(matrix, ids, mode=pd_mode), None
    if not getattr(args, "panel", None) or not getattr(args, "macros", None):
        raise DomainError("provide either --matrix or both --panel and --macros")
    panel, macros = _load_inputs(args)
    panel_w, macros_w = _windowed(panel, macros, args.window)
    forecasts = riskmatrix.forecast_tails(
        panel_w, macros_w, args.tau, mode=args.mode, n_jobs=args.threads
    )
    rm = riskmatrix.validate_pd(
        riskmatrix.symmetrize(riskmatrix.build_gamma(forecasts)), mode=pd_mode
    )
    return rm, panel_w


def _write_summary(out: str, lines: list[str]) -> None:
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def _cmd_simulate(args) -> int:
    spec = simulate.SimulationSpec(
        n_assets=args.n_assets,
        n_predictors=args.n_predictors,
        horizon=args.horizon,
        seed=args.seed,
        tail_strength=args.tail_strength,
        tail_prob=args.tail_prob,
    )
    panel, macros = simulate.generate(spec)
    out = _outdir(args)
    write_panel_csv(panel, os.path.join(out, "panel.csv"))
    macro_ids = tuple(f"m{i + 1}" for i in range(macros.shape[1]))
    macro_panel = ReturnPanel(macros, panel.timestamps, macro_ids)
    write_panel_csv(macro_panel, os.path.join(out, "macros.csv"))
    _write_summary(out, [
        f"simulated panel: {spec.horizon} periods x {spec.n_assets} assets",
        f"state variables: {spec.n_predictors}",
        f"seed: {spec.seed}",
        f"tail dependence strength: {format_value(spec.tail_strength)}",
    ])
    return 0


def _cmd_fit_tails(args) -> int:
    panel, macros = _load_inputs(args)
    panel_w, macros_w = _windowed(panel, macros, args.window)
    forecasts = riskmatrix.forecast_tails(
        panel_w, macros_w, args.tau, mode=args.mode, n_jobs=args.threads
    )
    out = _outdir(args)
    write_series_csv(forecasts.asset_ids, forecasts.var_plus,
                     os.path.join(out, "var_plus.csv"), header=("id", "var_plus"))
    write_matrix_csv(forecasts.delta_covar, forecasts.asset_ids,
                     os.path.join(out, "delta_covar.csv"))
    _write_summary(out, [
        f"tail forecasts at tau={format_value(args.tau)} "
        f"from {panel_w.n_periods} observations",
        f"assets: {panel_w.n_assets}",
        f"clamped forecasts: {forecasts.clamped}",
        f"max var_plus: {format_value(float(np.max(forecasts.var_plus)))}",
    ])
    return 0


def _cmd_build_matrix(args) -> int:
    rm, _ = _estimate_matrix(args)
    out = _outdir(args)
    write_matrix_csv(rm.gamma, rm.asset_ids, os.path.join(out, "gamma.csv"))
    write_matrix_csv(rm.gamma_sym, rm.asset_ids, os.path.join(out, "gamma_sym.csv"))
    write_series_csv(
        [str(i + 1) for i in range(rm.n_assets)], rm.eigenvalues,
        os.path.join(out, "eigenvalues.csv"), header=("rank", "eigenvalue"),
    )
    _write_summary(out, [
        f"tail-risk matrix for {rm.n_assets} assets",
        f"smallest eigenvalue: {format_value(float(rm.eigenvalues[-1]))}",
        f"condition number: {format_value(rm.condition_number)}",
        f"floored: {'yes' if rm.floored else 'no'} ({rm.n_floored} eigenvalues)",
    ])
    return 0


def _cmd_centrality(args) -> int:
    rm, _ = _estimate_matrix(args)
    cent = netgraph.eigen_centrality(netgraph.adjacency(rm))
    out = _outdir(args)
    write_series_csv(rm.asset_ids, cent.values,
                     os.path.join(out, "centrality.csv"),
                     header=("id", "centrality"))
    ranked = max(range(rm.n_assets), key=lambda i: cent.values[i])
    _write_summary(out, [
        f"centrality for {rm.n_assets} assets",
        f"leading eigenvalue: {format_value(cent.leading_eigenvalue)}",
        f"most central: {rm.asset_ids[ranked]} "
        f"({format_value(float(cent.values[ranked]))})",
        f"non-perron warning: {'yes' if cent.non_perron else 'no'}",
    ])
    return 0


def _cmd_optimize(args) -> int:
    rm, _ = _estimate_matrix(args)
    weights = portfolio.gmvp_long_only(rm) if args.long_only else portfolio.gmvp(rm)
    risk = portfolio.portfolio_risk(rm, weights)
    out = _outdir(args)
    write_series_csv(rm.asset_ids, weights.weights,
                     os.path.join(out, "weights.csv"), header=("id", "weight"))
    _write_summary(out, [
        f"minimum-risk weights for {rm.n_assets} assets"
        + (" (long only)" if args.long_only else ""),
        f"total risk: {format_value(risk.total)}",
        f"network component: {format_value(risk.network)}",
        f"idiosyncratic component: {format_value(risk.idiosyncratic)}",
    ])
    return 0


def _cmd_prune(args) -> int:
    rm, panel = _estimate_matrix(args)
    trace = portfolio.prune(
        rm,
        min_assets=args.min_assets,
        max_removals=args.max_removals,
        long_only=args.long_only,
        mode="strict" if args.mode == "strict" else "floor",
    )
    out = _outdir(args)
    mean_returns = None
    if panel is not None:
        id_to_col = {aid: i for i, aid in enumerate(panel.asset_ids)}
        mean_returns = panel.values.mean(axis=0)

    rows = []
    exclusions = 0
    for step in trace.steps:
        # a removal advances the portfolio; a rejected candidate leaves it as is
        if step.removed_id is not None:
            exclusions += 1
            kept = [aid for aid in step.remaining_ids if aid != step.candidate_id]
            weights, q = step.weights_after, step.risk_after
        else:
            kept = list(step.remaining_ids)
            weights, q = step.weights_before, step.risk_before
        if mean_returns is None:
            r_p = float("nan")
        else:
            cols = [id_to_col[aid] for aid in kept]
            r_p = float(weights @ mean_returns[cols])
        rows.append((exclusions, r_p, q, step.delta_value))

    with open(os.path.join(out, "trace.csv"), "w") as fh:
        fh.write("Exclusions,r_p,Q,Delta\n")
        for exclusions, r_p, q, delta in rows:
            fh.write(f"{exclusions},{format_value(r_p)},"
                     f"{format_value(q)},{format_value(delta)}\n")

    write_series_csv(trace.final_assets, trace.final_weights,
                     os.path.join(out, "weights.csv"), header=("id", "weight"))

    lines = [
        f"pruning from {rm.n_assets} assets: "
        f"{rm.n_assets - len(trace.final_assets)} removed",
        f"final risk: {format_value(trace.final_risk)}",
        "",
        f"{'Exclusions':>10} {'r_p':>14} {'Q':>14} {'Delta':>14}",
    ]
    for exclusions, r_p, q, delta in rows:
        lines.append(
            f"{exclusions:>10d} {format_value(r_p):>14} "
            f"{format_value(q):>14} {format_value(delta):>14}"
        )
    removed = [s.removed_id for s in trace.steps if s.removed_id is not None]
    lines.append("")
    lines.append("removed: " + (", ".join(removed) if removed else "none"))
    _write_summary(out, lines)
    return 0


def _cmd_backtest(args) -> int:
    panel, macros = _load_inputs(args)
    strategy = args.strategy.replace("-", "_")
    config = bt.BacktestConfig(
        window_length=args.window,
        tau=args.tau,
        strategy=strategy,
        removal_count=args.count,
        long_only=args.long_only,
        mode=args.mode,
        min_assets=args.min_assets,
        max_removals=args.max_removals,
        n_jobs=args.threads,
    )
    report = bt.rolling_backtest(panel, macros, config)
    out = _outdir(args)
    write_series_csv(report.timestamps, report.oos_returns,
                     os.path.join(out, "returns.csv"), header=("date", "return"))
    weight_panel = ReturnPanel(report.weights, report.timestamps, report.asset_ids)
    write_panel_csv(weight_panel, os.path.join(out, "weights.csv"))
    stats = bt.summarize_returns(report.oos_returns)
    _write_summary(out, [
        f"backtest: {report.n_periods} out-of-sample periods, "
        f"strategy {args.strategy}",
        f"mean: {format_value(stats['mean'])}",
        f"stdev: {format_value(stats['stdev'])}",
        f"sharpe: {format_value(stats['sharpe'])}",
        f"min/q1/median/q3/max: "
        f"{format_value(stats['min'])} {format_value(stats['q1'])} "
        f"{format_value(stats['median'])} {format_value(stats['q3'])} "
        f"{format_value(stats['max'])}",
        f"clamped forecasts: {report.n_clamped}, floored matrices: {report.n_floored}",
    ])
    return 0


def _cmd_sharpe_test(args) -> int:
    _, x = read_series_csv(args.x)
    _, y = read_series_csv(args.y)
    method = args.method.replace("-", "_")
    result = bt.sharpe_test(
        x, y, method=method, n_boot=args.reps,
        block_length=args.block, seed=args.seed,
    )
    out = _outdir(args)
    lines = [
        f"sharpe comparison ({args.method}), n={result.n_obs}",
        f"sharpe x: {format_value(result.sr_x)}",
        f"sharpe y: {format_value(result.sr_y)}",
        f"difference: {format_value(result.difference)}",
        f"t statistic: {format_value(result.t_stat)}",
        f"p value: {format_value(result.p_value)}",
    ]
    if result.n_boot is not None:
        lines.append(f"bootstrap replications: {result.n_boot}")
    if result.block_length is not None:
        lines.append(f"block length: {result.block_length}")
    _write_summary(out, lines)
    return 0


if __name__ == "__main__":
    sys.exit(main())
