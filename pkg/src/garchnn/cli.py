"""
Command line: ``garchnn <command> [options]``.

Commands
--------
simulate           draw return series from a GARCH-family model
fit                maximum-likelihood fit of a classical model
train              gradient training of an NN counterpart or GARCH-LSTM
forecast           realized-variance forecasts on the test partition
evaluate           MAE/MSE table from forecast files
var-backtest       1.65-sigma VaR violation counts and a per-day trace
equivalence-check  classical MLE versus trained counterpart on simulations
pipeline           fit, train, forecast, evaluate and backtest in one run

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from garchnn import __version__, garch, nn
from garchnn import io as gio
from garchnn import pipeline as pl
from garchnn.evaluation import (
    VAR_MULTIPLIER,
    ForecastSeries,
    MetricReport,
    evaluate,
    var_limits,
    var_trace,
    var_violations,
)
from garchnn.exceptions import (
    DataError,
    DomainError,
    InvalidParameterError,
    LeakageError,
    NumericalError,
)
from garchnn.timeseries import ReturnSeries, realized_volatility
from garchnn.training import TrainConfig, TrainedModel
from garchnn.validation import check_horizons

__all__ = ["main", "build_parser", "FIXTURE"]

logger = logging.getLogger("garchnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
FIXTURE = "fixture_prices.csv"
LOSS_NAMES = {"mse": "mse", "mae": "mae", "n": "n_loss", "t": "t_loss"}
MODEL_CHOICES = ("garch11", "gjr", "figarch", "garch-lstm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fixture_path() -> Path:
    return Path(str(resources.files("garchnn") / "data" / FIXTURE))


def _horizons(text: str) -> tuple[int, ...]:
    try:
        return check_horizons(int(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    if data:
        p.add_argument("--data", help="price (date,close) or return (date,return) table")
        p.add_argument("--scale", type=float, default=100.0, help="log-return multiplier")
        p.add_argument("--k", type=int, default=5, help="realized-volatility window")


def _model_opts(p: argparse.ArgumentParser, default: str = "gjr") -> None:
    p.add_argument("--model", choices=MODEL_CHOICES, default=default)
    p.add_argument("--counterpart", action="store_true", help="use the NN counterpart of --model")
    p.add_argument("--kernel", choices=garch.MODEL_KINDS, default="gjr", help="GARCH-LSTM kernel")
    p.add_argument("--truncation", type=int, default=garch.DEFAULT_TRUNCATION, help="FIGARCH kernel size")


def _train_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", choices=tuple(LOSS_NAMES), default="t")
    p.add_argument("--dof", type=float, default=5.0)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--grid", action="store_true", help="choose lr from 5 log-spaced values in [3e-4, 3e-2]")
    p.add_argument("--batch", choices=("auto", "full", "minibatch"), default="auto")
    p.add_argument("--fix-w", type=float, default=None, help="hold GARCH-LSTM w at this value")
    p.add_argument("--config", help="key = value file overriding training settings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="garchnn", description="GARCH-family volatility models and neural counterparts")
    parser.add_argument("--version", action="version", version=f"garchnn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate return series")
    _common(p, data=False)
    p.add_argument("--model", choices=garch.MODEL_KINDS, default="garch11")
    p.add_argument("--params", help="comma list name=value; drawn from (0.1, 0.9) when omitted")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--dist", choices=("normal", "t"), default="normal")
    p.add_argument("--dof", type=float, default=None)
    p.add_argument("--truncation", type=int, default=garch.DEFAULT_TRUNCATION)

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    _common(p)
    p.add_argument("--model", choices=garch.MODEL_KINDS, default="gjr")
    p.add_argument("--loss", choices=("n", "t"), default="n")
    p.add_argument("--dof", type=float, default=None)
    p.add_argument("--horizon", type=int, default=1, help="horizon whose split defines the fit sample")
    p.add_argument("--truncation", type=int, default=garch.DEFAULT_TRUNCATION)

    p = sub.add_parser("train", help="gradient training")
    _common(p)
    _model_opts(p, default="garch-lstm")
    _train_opts(p)
    p.add_argument("--horizon", type=_horizons, default=(1,))

    p = sub.add_parser("forecast", help="forecast the test partition")
    _common(p)
    p.add_argument("--checkpoint", action="append", required=True)
    p.add_argument("--horizon", type=_horizons, default=pl.HORIZONS, help="horizons for classical checkpoints")

    p = sub.add_parser("evaluate", help="MAE/MSE of forecast files")
    _common(p)
    p.add_argument("--forecasts", nargs="+", required=True)
    p.add_argument("--metric-scale", choices=("sigma", "variance"), default="sigma")

    p = sub.add_parser("var-backtest", help="VaR violation counts")
    _common(p)
    p.add_argument("--checkpoint", action="append", required=True)
    p.add_argument("--multiplier", type=float, default=VAR_MULTIPLIER)
    p.add_argument("--var-sigma", choices=("daily", "realized"), default="daily")

    p = sub.add_parser("equivalence-check", help="classical versus counterpart on simulations")
    _common(p, data=False)
    p.add_argument("--model", choices=garch.MODEL_KINDS, default="garch11")
    p.add_argument("--seeds", type=int, default=8)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--loss", choices=("n", "t"), default="n")
    p.add_argument("--dof", type=float, default=None)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--max-epochs", type=int, default=100)

    p = sub.add_parser("pipeline", help="run every stage on one data set")
    _common(p)
    _model_opts(p, default="gjr")
    _train_opts(p)
    p.add_argument("--horizon", type=_horizons, default=pl.HORIZONS)
    p.add_argument("--multiplier", type=float, default=VAR_MULTIPLIER)
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


class Run:
    """Output directory with a manifest of every file written."""

    def __init__(self, args):
        self.out = Path(args.out)
        self.args = args
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def add(self, path: Path) -> Path:
        self.files.append(Path(path))
        return path

    def manifest(self) -> Path:
        echo = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("verbose", "out")}
        pairs = [("version", __version__)] + [(f"config.{k}", v) for k, v in echo.items() if v is not None]
        for f in sorted(set(self.files)):
            digest = hashlib.sha256(f.read_bytes()).hexdigest()
            pairs.append((f"file.{f.relative_to(self.out)}", digest))
        text = "".join(f"{k} = {gio.format_value(v)}\n" for k, v in pairs)
        return gio.atomic_write(self.path("manifest.txt"), text)


def _series(args) -> ReturnSeries:
    path = args.data or _fixture_path()
    if not Path(path).exists():
        raise DataError(f"data file not found: {path}")
    return pl.load_series(path, args.scale)


def _train_config(args, horizon: int, lstm: bool) -> TrainConfig:
    batch = args.batch if args.batch != "auto" else ("minibatch" if lstm else "full")
    cfg = TrainConfig(lr=args.lr, max_epochs=args.max_epochs, seed=args.seed, loss=LOSS_NAMES[args.loss],
                      dof=args.dof, horizon=horizon, batch=batch)
    if getattr(args, "config", None):
        doc = gio.read_config(args.config)
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown training settings in {args.config}: {sorted(unknown)}")
        doc = {k: tuple(v) if isinstance(v, tuple) else v for k, v in doc.items()}
        cfg = replace(cfg, **doc)
    return cfg


def _neural_model(args):
    opts = {"truncation": args.truncation}
    if args.model == "garch-lstm":
        fixed = {"w": args.fix_w} if args.fix_w is not None else None
        return nn.GarchLSTM(args.kernel, fixed=fixed, **opts)
    if not args.counterpart:
        raise UsageError(f"--model {args.model} trains only with --counterpart (use 'fit' for MLE)")
    return nn.CounterpartModel(args.model, **opts)


def _history_rows(hist):
    return [(e, tr, va, lr) for e, tr, va, lr in hist.rows()]


def _write_forecast(run: Run, fc: ForecastSeries) -> Path:
    name = f"forecast_{_slug(fc.model)}_h{fc.horizon}.csv"
    rows = zip(fc.anchors.tolist(), (str(d) for d in fc.timestamps), [fc.horizon] * len(fc),
               [fc.model] * len(fc), fc.sigma_hat_sq.tolist())
    return run.add(gio.write_table(run.path(name), ["anchor", "date", "horizon", "model", "sigma_hat_sq"], rows))


def _read_forecast(path) -> ForecastSeries:
    header, rows = gio.read_table(path)
    if header != ["anchor", "date", "horizon", "model", "sigma_hat_sq"] or not rows:
        raise DataError(f"{path}: not a forecast file")
    cols = list(zip(*rows))
    return ForecastSeries(np.array(cols[0], dtype=int), np.array([str(d) for d in cols[1]]),
                          np.array(cols[4], dtype=float), int(cols[2][0]), str(cols[3][0]))


def _slug(name: str) -> str:
    return name.replace("[", "-").replace("]", "").replace("/", "-")


def _fitted_name(fitted) -> str:
    return fitted.name if isinstance(fitted, pl.ClassicalFit) else fitted.model.name


def _metrics_rows(report: MetricReport):
    return [(m, h, mae, mse, n) for m, h, mae, mse, n in report.rows]


def _var_sigma(fitted, data, mode: str) -> np.ndarray:
    anchors = data.test.anchors
    eps = data.returns.returns
    if mode == "daily":
        return np.sqrt(fitted.one_step(eps, anchors))
    fc = pl.forecast_series(fitted, data)
    return np.sqrt(fc.sigma_hat_sq)


def _backtest(run: Run, fitted, data, multiplier: float, mode: str = "daily"):
    anchors = data.test.anchors
    eps = data.returns.returns
    # the limit set at t applies to the return of day t+1
    ok = anchors + 1 < eps.size
    sigma = _var_sigma(fitted, data, mode)[ok]
    realized = eps[anchors[ok] + 1]
    limits = var_limits(sigma, multiplier)
    report = var_violations(realized, limits, multiplier)
    name = _slug(_fitted_name(fitted))
    run.add(gio.write_params(run.path(f"var_{name}.txt"), name, {}, report.as_dict()))
    trace = var_trace(data.returns.timestamps[anchors[ok] + 1].astype(str), realized, limits)
    run.add(gio.write_table(run.path(f"var_trace_{name}.csv"), list(trace.columns), trace.itertuples(index=False)))
    return report


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    run = Run(args)
    opts = {"truncation": args.truncation} if args.model == "figarch" else {}
    fixed = None
    if args.params:
        try:
            values = {k.strip(): float(v) for k, v in (item.split("=") for item in args.params.split(","))}
        except ValueError as exc:
            raise UsageError(f"--params expects name=value pairs: {exc}") from exc
        fixed = garch.params_from_dict(args.model, values, **opts)
    for s in range(args.seed, args.seed + args.seeds):
        params = fixed or pl.draw_params(args.model, np.random.default_rng([2024, s]), **opts)
        eps = garch.simulate(params, args.n, seed=s, dist=args.dist, dof=args.dof)
        stem = f"sim_{args.model}_seed{s}"
        run.add(pl.write_returns(run.path(stem + ".csv"), ReturnSeries.from_array(eps)))
        meta = {"seed": s, "n": args.n, "dist": args.dist}
        if args.dof is not None:
            meta["dof"] = args.dof
        run.add(gio.write_params(run.path(stem + ".params"), args.model, params.as_dict(), meta))
    run.manifest()
    return EXIT_OK


def cmd_fit(args) -> int:
    run = Run(args)
    data = pl.prepare(_series(args), args.k, args.horizon)
    opts = {"truncation": args.truncation} if args.model == "figarch" else {}
    fit = pl.fit_classical(args.model, data, LOSS_NAMES[args.loss], args.dof, **opts)
    rep = fit.report
    extra = {"fit.loss": rep.loss, "fit.method": rep.method, "fit.final_loss": rep.final_loss,
             "fit.converged": rep.converged, "fit.iterations": rep.iterations}
    run.add(pl.save_checkpoint(run.path(f"fit_{args.model}.params"), fit, extra))
    run.manifest()
    logger.info("%s: %s", args.model, fit.params)
    return EXIT_OK


def _train_one(run: Run, args, series, h: int):
    model = _neural_model(args)
    data = pl.prepare(series, args.k, h)
    cfg = _train_config(args, h, isinstance(model, nn.GarchLSTM))
    fitted, hist, lr = pl.train_neural(model, data, cfg, grid=args.grid)
    stem = f"{_slug(model.name)}_h{h}"
    run.add(pl.save_checkpoint(run.path(stem + ".ckpt"), fitted,
                               {"train.lr": lr, "train.loss": cfg.loss, "train.best_epoch": hist.best_epoch,
                                "train.best_val": hist.best_val, "train.stop": hist.stop_reason}))
    run.add(gio.write_table(run.path(stem + "_history.csv"), ["epoch", "train_loss", "val_loss", "lr"],
                            _history_rows(hist)))
    return fitted, data


def cmd_train(args) -> int:
    run = Run(args)
    series = _series(args)
    for h in args.horizon:
        _train_one(run, args, series, h)
    run.manifest()
    return EXIT_OK


def cmd_forecast(args) -> int:
    run = Run(args)
    series = _series(args)
    for ck in args.checkpoint:
        fitted = pl.load_checkpoint(ck)
        horizons = args.horizon if isinstance(fitted, pl.ClassicalFit) else (fitted.h,)
        k = args.k if isinstance(fitted, pl.ClassicalFit) else fitted.k
        for h in horizons:
            _write_forecast(run, pl.forecast_series(fitted, pl.prepare(series, k, h)))
    run.manifest()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = Run(args)
    truth = realized_volatility(_series(args), args.k)
    report = MetricReport(scale=args.metric_scale)
    for path in args.forecasts:
        report.extend(evaluate(_read_forecast(path), truth, args.metric_scale))
    report.rows.sort(key=lambda r: (r[0], r[1]))
    run.add(gio.write_table(run.path("metrics.csv"), ["model", "horizon", "mae", "mse", "n"], _metrics_rows(report)))
    run.manifest()
    return EXIT_OK


def cmd_var_backtest(args) -> int:
    run = Run(args)
    series = _series(args)
    for ck in args.checkpoint:
        fitted = pl.load_checkpoint(ck)
        h = 1 if isinstance(fitted, pl.ClassicalFit) else fitted.h
        k = args.k if isinstance(fitted, pl.ClassicalFit) else fitted.k
        _backtest(run, fitted, pl.prepare(series, k, h), args.multiplier, args.var_sigma)
    run.manifest()
    return EXIT_OK


def cmd_equivalence_check(args) -> int:
    run = Run(args)
    seeds = range(args.seed, args.seed + args.seeds)
    cfg = TrainConfig(lr=args.lr, max_epochs=args.max_epochs, loss=LOSS_NAMES[args.loss], monitor="train", tol=1e-7)
    rows = pl.recovery_study(args.model, seeds, n=args.n, cfg=cfg, loss=LOSS_NAMES[args.loss], dof=args.dof)
    param_rows = [(r.seed, p, r.truth[p], r.mle[p], r.counterpart[p]) for r in rows for p in r.truth]
    run.add(gio.write_table(run.path(f"equivalence_{args.model}_params.csv"),
                            ["seed", "param", "truth", "mle", "counterpart"], param_rows))
    mse = pl.study_mse(rows)
    run.add(gio.write_table(run.path(f"equivalence_{args.model}_mse.csv"), ["param", "mle_mse", "counterpart_mse"],
                            [(p, mse["mle"][p], mse["counterpart"][p]) for p in rows[0].truth]))
    closeness = []
    for r in rows:
        truth = garch.params_from_dict(args.model, r.truth)
        eps = garch.simulate(truth, args.n, seed=r.seed)
        a = garch.filter_series(garch.params_from_dict(args.model, r.mle), eps)
        b = garch.filter_series(garch.params_from_dict(args.model, r.counterpart), eps)
        ref = garch.filter_series(truth, eps)
        sa, sb, sr = np.sqrt(a), np.sqrt(b), np.sqrt(ref)
        closeness.append((r.seed, np.mean(np.abs(sa - sr)), np.mean((sa - sr) ** 2),
                          np.mean(np.abs(sb - sr)), np.mean((sb - sr) ** 2), np.mean(np.abs(sa - sb))))
    run.add(gio.write_table(run.path(f"equivalence_{args.model}_forecast.csv"),
                            ["seed", "mle_mae", "mle_mse", "counterpart_mae", "counterpart_mse", "mle_vs_counterpart_mae"],
                            closeness))
    run.manifest()
    return EXIT_OK


def cmd_pipeline(args) -> int:
    run = Run(args)
    series = _series(args)
    kind = args.model if args.model != "garch-lstm" else args.kernel
    run.add(pl.write_returns(run.path("returns.csv"), series))
    opts = {"truncation": args.truncation} if kind == "figarch" else {}
    report = MetricReport()
    truth = realized_volatility(series, args.k)
    classical = None
    for h in args.horizon:
        data = pl.prepare(series, args.k, h)
        if classical is None:
            # one classical fit serves every horizon; its sample is cut at the h=1 test start
            classical = pl.fit_classical(kind, pl.prepare(series, args.k, 1), "n_loss", **opts)
            run.add(pl.save_checkpoint(run.path(f"fit_{kind}.params"), classical))
        fc = pl.forecast_series(classical, data)
        _write_forecast(run, fc)
        report.extend(evaluate(fc, truth))
        for model_kind in (kind, "garch-lstm"):
            sub = argparse.Namespace(**{**vars(args), "model": model_kind, "counterpart": True, "kernel": kind})
            fitted, data_h = _train_one(run, sub, series, h)
            fc = pl.forecast_series(fitted, data_h)
            _write_forecast(run, fc)
            report.extend(evaluate(fc, truth))
            if h == 1:
                _backtest(run, fitted, data_h, args.multiplier)
        if h == 1:
            _backtest(run, classical, data, args.multiplier)
    run.add(gio.write_table(run.path("metrics.csv"), ["model", "horizon", "mae", "mse", "n"], _metrics_rows(report)))
    run.manifest()
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "var-backtest": cmd_var_backtest,
    "equivalence-check": cmd_equivalence_check,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"garchnn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, LeakageError, FileNotFoundError) as exc:
        print(f"garchnn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DomainError, FloatingPointError) as exc:
        print(f"garchnn {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"garchnn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
