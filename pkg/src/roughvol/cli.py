"""Batch command-line front end.

Subcommands wire the library end to end: ``proxy`` (OHLC CSV -> volatility
series), ``scaling`` (volatility series -> moment-scaling report + plot
data), ``simulate`` (model experiments -> market files + reports),
``forecast`` (volatility series -> ratio-P table) and ``report`` (pretty-
print any saved report).  Every command writes a run manifest capturing the
full configuration, seeds and input digests; re-running with the same
manifest configuration reproduces outputs byte for byte.

Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .market_data import (
    DataError,
    VolProxy,
    _atomic_write_text,
    load_ohlc,
    load_report,
    load_vol_csv,
    register_report,
    save_ohlc,
    save_report,
    save_vol_csv,
)
from .forecast import ForecastError, ForecastTable, backtest
from .proxies import compare_to_benchmark, proxy_series
from .scaling import ScalingError, fit_scaling, split_period_hurst, write_plot_csvs
from .simulate import (
    FSV_PARAMS,
    FouParams,
    SimConfig,
    SimSummary,
    proxy_recovery_experiment,
    two_slope_diagnostics,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_ESTIMATORS = {
    "close-to-close": VolProxy.CLOSE_TO_CLOSE,
    "parkinson": VolProxy.PARKINSON,
    "gk-practical": VolProxy.GARMAN_KLASS_PRACTICAL,
    "gk-full": VolProxy.GARMAN_KLASS_FULL,
    "rogers-satchell": VolProxy.ROGERS_SATCHELL,
}


@register_report("roughvol.run_manifest/v1")
@dataclass
class RunManifest:
    """Reproducibility record: command, configuration, inputs and outputs."""

    command: str
    version: str
    kernel_backend: str
    config: dict
    input_digests: dict
    outputs: list

    @classmethod
    def from_payload(cls, payload: dict) -> "RunManifest":
        return cls(**payload)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(command: str, args: argparse.Namespace, inputs: list[Path], outputs: list[Path], path: Path) -> None:
    config = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "config") and not k.startswith("_")
    }
    manifest = RunManifest(
        command=command,
        version=__version__,
        kernel_backend=BACKEND,
        config={k: str(v) if isinstance(v, Path) else v for k, v in config.items()},
        input_digests={str(p): _sha256(Path(p)) for p in inputs if Path(p).exists()},
        outputs=[str(p) for p in outputs],
    )
    save_report(manifest, path)


def _positive_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_proxy(args) -> int:
    series = load_ohlc(args.input, ticker=args.ticker)
    vol = proxy_series(series, _ESTIMATORS[args.estimator])
    save_vol_csv(vol, args.output)
    outputs = [Path(args.output)]
    inputs = [Path(args.input)]
    if args.benchmark:
        bench = load_vol_csv(args.benchmark)
        cc = proxy_series(series, VolProxy.CLOSE_TO_CLOSE)
        comparison = compare_to_benchmark(vol, bench, close_to_close=cc)
        report_path = Path(args.report or Path(args.output).with_suffix(".comparison.json"))
        save_report(comparison, report_path)
        outputs.append(report_path)
        inputs.append(Path(args.benchmark))
    manifest = Path(args.output).with_suffix(".manifest.json")
    _write_manifest("proxy", args, inputs, outputs, manifest)
    print(f"wrote {', '.join(str(o) for o in outputs)}")
    return EXIT_OK


def _cmd_scaling(args) -> int:
    vol = load_vol_csv(args.input, ticker=args.ticker)
    lag_grid = np.arange(args.lag_min, args.lag_max + 1)
    report = fit_scaling(vol, q_grid=args.q_grid, lag_grid=lag_grid, min_pairs=args.min_pairs)
    out = Path(args.output)
    save_report(report, out)
    outputs = [out] + write_plot_csvs(report, out.parent, out.stem)
    print(f"{vol.ticker} ({vol.proxy.value}): H = {report.hurst:.4f}, per-q R^2 = "
          + ", ".join(f"{q:g}:{r:.3f}" for q, r in zip(report.q_grid, report.r_squared)))
    if args.split_halves:
        full, first, second = split_period_hurst(vol, q_grid=args.q_grid, lag_grid=lag_grid, min_pairs=args.min_pairs)
        print(f"H full/first/second half: {full:.4f} / {first:.4f} / {second:.4f}")
    _write_manifest("scaling", args, [Path(args.input)], outputs, out.with_suffix(".manifest.json"))
    return EXIT_OK


_MODEL_DEFAULTS = {
    # headline rough parameters; the stationary high-H alternative
    "rfsv": FouParams(hurst=0.08, nu=0.3, alpha=5e-4, mean_level=-5.0),
    "fsv": FSV_PARAMS,
}


def _cmd_simulate(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    base = _MODEL_DEFAULTS[args.model]
    params = FouParams(
        hurst=base.hurst if args.hurst is None else args.hurst,
        nu=base.nu if args.nu is None else args.nu,
        alpha=base.alpha if args.alpha is None else args.alpha,
        mean_level=base.mean_level if args.mean_level is None else args.mean_level,
        x0=args.x0,
    )
    config = SimConfig(
        n_days=args.days, steps_per_day=args.steps_per_day, p0=args.p0,
        seed=args.seed, window_hours=args.window_hours, scheme=args.scheme,
    )
    result = proxy_recovery_experiment(params, config, ticker=args.model.upper())
    market = result.market
    outputs = []
    for name, series in (("truth", market.true_vol), ("rv", market.realized_vol), ("gk", market.gk_vol)):
        path = outdir / f"{name}_vol.csv"
        save_vol_csv(series, path)
        outputs.append(path)
    if market.ohlc is not None:
        path = outdir / "ohlc.csv"
        save_ohlc(market.ohlc, path)
        outputs.append(path)
    for name, rep in (("truth", result.truth_report), ("rv", result.rv_report), ("gk", result.gk_report)):
        path = outdir / f"scaling_{name}.json"
        save_report(rep, path)
        outputs.extend([path] + write_plot_csvs(rep, outdir, f"scaling_{name}"))
    summary = SimSummary.from_market(args.model, params, config, result)
    summary_path = outdir / "summary.json"
    save_report(summary, summary_path)
    outputs.append(summary_path)
    hursts = result.hursts()
    print(f"{args.model}: H-hat truth {hursts['truth']:.4f}, RV {hursts['realized']:.4f}, GK {hursts['garman_klass']:.4f}"
          + (f", redraws {market.redraw_count}" if market.redraw_count else ""))
    if args.two_slope:
        diag = two_slope_diagnostics(result.truth_report)
        print(f"q=1 slope small lags {diag.small_lag_slope:.3f}, large lags {diag.large_lag_slope:.3f}, "
              f"break at {diag.break_lag} days")
    _write_manifest("simulate", args, [], outputs, outdir / "manifest.json")
    return EXIT_OK


def _cmd_forecast(args) -> int:
    vol = load_vol_csv(args.input, ticker=args.ticker)
    returns = None
    inputs = [Path(args.input)]
    if args.ohlc_csv:
        ohlc = load_ohlc(args.ohlc_csv)
        ret_by_date = dict(zip(ohlc.dates[1:].astype(str), np.diff(np.log(ohlc.close))))
        returns = np.array([ret_by_date.get(str(d), np.nan) for d in vol.dates])
        inputs.append(Path(args.ohlc_csv))
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if any(m.startswith("garch") for m in models) and returns is None:
        raise ForecastError("the garch model needs --ohlc-csv to build daily returns")
    tracks = ("log_variance", "variance") if args.track == "both" else (args.track.replace("-", "_"),)
    rows = backtest(
        vol, models, horizons=tuple(args.horizons), tracks=tracks,
        returns=returns, window=args.window, epsilon=args.epsilon,
        hurst=args.hurst, nu_squared=args.nu_squared, threads=args.threads,
    )
    table = ForecastTable(ticker=vol.ticker, window=args.window, rows=rows)
    out = Path(args.output)
    save_report(table, out)
    csv_path = out.with_suffix(".csv")
    lines = ["ticker,model,horizon,track,ratio_p,n_forecasts"]
    lines += [f"{r.ticker},{r.model},{r.horizon},{r.track},{r.ratio_p!r},{r.n_forecasts}" for r in rows]
    _atomic_write_text(csv_path, "\n".join(lines) + "\n")
    for r in rows:
        print(f"{r.ticker} {r.model:>6} h={r.horizon:<3} {r.track:<12} P={r.ratio_p:.3f} (n={r.n_forecasts})")
    _write_manifest("forecast", args, inputs, [out, csv_path], out.with_suffix(".manifest.json"))
    return EXIT_OK


def _cmd_report(args) -> int:
    report = load_report(args.input)
    payload = json.loads(Path(args.input).read_text())
    schema = payload.pop("schema")
    print(f"schema: {schema}")

    def show(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                show(f"{prefix}{k}.", v) if isinstance(v, (dict, list)) and v and not _is_scalar_list(v) else print(f"{prefix}{k} = {_fmt(v)}")
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                show(f"{prefix}{i}.", v) if isinstance(v, (dict, list)) else print(f"{prefix}{i} = {_fmt(v)}")

    show("", payload)
    return EXIT_OK


def _is_scalar_list(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def _fmt(v):
    if isinstance(v, list) and len(v) > 12:
        head = ", ".join(str(x) for x in v[:6])
        return f"[{head}, ... {len(v)} values]"
    return v


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughvol",
        description="Range-based volatility estimation, roughness measurement, "
                    "model simulation and forecasting.",
    )
    parser.add_argument("--config", type=Path, help="JSON file of per-command flag defaults")
    parser.add_argument("--threads", type=int, default=int(os.environ.get("ROUGHVOL_THREADS", "1")),
                        help="bound on internal parallelism (default from ROUGHVOL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("proxy", help="compute a daily volatility series from OHLC bars")
    p.add_argument("input", type=Path, help="OHLC CSV (date,open,high,low,close)")
    p.add_argument("output", type=Path, help="volatility CSV to write")
    p.add_argument("--estimator", choices=sorted(_ESTIMATORS), default="gk-practical")
    p.add_argument("--ticker", default=None)
    p.add_argument("--benchmark", type=Path, default=None, help="benchmark volatility CSV (e.g. realized vol)")
    p.add_argument("--report", type=Path, default=None, help="comparison report path")
    p.set_defaults(func=_cmd_proxy)

    p = sub.add_parser("scaling", help="fit the moment-scaling surface and the Hurst exponent")
    p.add_argument("input", type=Path, help="volatility CSV")
    p.add_argument("output", type=Path, help="scaling report JSON to write")
    p.add_argument("--q-grid", type=_float_list, default=[0.5, 1.0, 1.5, 2.0, 3.0])
    p.add_argument("--lag-min", type=int, default=1)
    p.add_argument("--lag-max", type=int, default=410)
    p.add_argument("--min-pairs", type=int, default=30)
    p.add_argument("--split-halves", action="store_true")
    p.add_argument("--ticker", default=None)
    p.set_defaults(func=_cmd_scaling)

    p = sub.add_parser("simulate", help="run a model-validation simulation")
    p.add_argument("--model", choices=("rfsv", "fsv"), required=True)
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--hurst", type=float, default=None, help="default: 0.08 (rfsv) / 0.7 (fsv)")
    p.add_argument("--nu", type=float, default=None, help="default: 0.3 (rfsv) / 0.25 (fsv)")
    p.add_argument("--alpha", type=float, default=None, help="default: 5e-4 (rfsv) / 0.25 (fsv)")
    p.add_argument("--mean-level", type=float, default=None, help="default: -5 (rfsv) / -4.5 (fsv)")
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--days", type=int, default=2521)
    p.add_argument("--steps-per-day", type=int, default=23400)
    p.add_argument("--window-hours", type=float, default=24.0)
    p.add_argument("--p0", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=("multiplicative", "gaussian-log"), default="multiplicative")
    p.add_argument("--two-slope", action="store_true", help="print slope-break diagnostics")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("forecast", help="rolling backtest of volatility predictors")
    p.add_argument("input", type=Path, help="volatility CSV")
    p.add_argument("output", type=Path, help="ratio-P table JSON to write (CSV written alongside)")
    p.add_argument("--models", default="rfsv,ar5,ar10,har", help="comma list: rfsv, ar<p>, har, garch")
    p.add_argument("--horizons", type=_positive_int_list, default=[1, 5, 21])
    p.add_argument("--track", choices=("log-variance", "variance", "both"), default="both")
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=0.15)
    p.add_argument("--hurst", type=float, default=None, help="override the fitted Hurst exponent")
    p.add_argument("--nu-squared", type=float, default=None)
    p.add_argument("--ohlc-csv", type=Path, default=None, help="OHLC CSV for close-to-close returns (garch)")
    p.add_argument("--ticker", default=None)
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("report", help="pretty-print a saved report")
    p.add_argument("input", type=Path)
    p.set_defaults(func=_cmd_report)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold --config file values in as per-subcommand defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    config_path = Path(argv[idx + 1])
    overrides = json.loads(config_path.read_text())
    for action in parser._subparsers._group_actions[0].choices.items():  # type: ignore[union-attr]
        name, sub = action
        if name in overrides:
            sub.set_defaults(**{k.replace("-", "_"): v for k, v in overrides[name].items()})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ScalingError, ForecastError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
