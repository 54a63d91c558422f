"""Command-line interface: ``volcast <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from volcast import garchbench, infometrics, lstmnet
from volcast.errors import ConfigError, DataError, NumericalError, VolcastError
from volcast.evalcli.experiment import (DEFAULT_SCHEME, ExperimentConfig, render_report,
                                        run_experiment, stage)
from volcast.evalcli.synth import SynthConfig, synth_generate
from volcast.garchbench import GarchParams
from volcast.marketdata import align, gk_raw_series, log_return, parse_ohlc_csv, parse_trends_csv
from volcast.preprocess import Scheme, adf_test, aggregate_returns, build_scheme_dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("volcast")


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None


def _int_range(text) -> tuple:
    """``"1:10"`` → 1..10 inclusive; lists from TOML pass through."""
    if isinstance(text, (list, tuple)):
        if len(text) == 2:
            return tuple(range(int(text[0]), int(text[1]) + 1))
        raise ConfigError(f"range must be [lo, hi], got {text}")
    try:
        lo, hi = (int(p) for p in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"range must look like LO:HI, got {text!r}") from None
    if hi < lo:
        raise ConfigError(f"empty range {text!r}")
    return tuple(range(lo, hi + 1))


def _pick(args, cfg: dict, section: str, key: str, attr: str = None, default=None):
    """CLI flag wins over the TOML ``[section] key``, which wins over ``default``."""
    value = getattr(args, attr or key, None)
    if value is not None:
        return value
    return cfg.get(section, {}).get(key, default)


def _seed(args, cfg):
    seed = args.seed if getattr(args, "seed", None) is not None else cfg.get("seed")
    if seed is not None and not 0 <= int(seed) < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    return seed


def _out_dir(args, cfg) -> Path:
    out = Path(getattr(args, "out", None) or cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _synth_config(args, cfg, seed) -> SynthConfig:
    sec = cfg.get("synth", {})
    base = SynthConfig()
    garch = GarchParams(float(sec.get("omega", base.garch.omega)),
                        float(sec.get("alpha", base.garch.alpha)),
                        float(sec.get("beta", base.garch.beta)))
    try:
        return SynthConfig(
            n_days=int(_pick(args, cfg, "synth", "n_days", default=base.n_days)),
            n_trends=int(_pick(args, cfg, "synth", "n_trends", default=base.n_trends)),
            trend_coupling=float(_pick(args, cfg, "synth", "coupling", default=base.trend_coupling)),
            garch=garch,
            seed=int(seed if seed is not None else base.seed),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _train_config(args, cfg, seed) -> lstmnet.TrainConfig:
    base = lstmnet.TrainConfig()
    kw = {}
    for key in ("lag", "batch_size", "epochs", "hidden_dim"):
        kw[key] = int(_pick(args, cfg, "train", key, default=getattr(base, key)))
    kw["learning_rate"] = float(_pick(args, cfg, "train", "learning_rate", default=base.learning_rate))
    kw["seed"] = int(seed if seed is not None else cfg.get("train", {}).get("seed", base.seed))
    return lstmnet.TrainConfig(**kw)


def _scheme(args, cfg):
    mode = _pick(args, cfg, "scheme", "mode", attr="scheme_mode", default="fixed")
    if mode == "auto":
        return None
    if mode != "fixed":
        raise ConfigError(f"scheme mode must be 'fixed' or 'auto', got {mode!r}")
    dt = _pick(args, cfg, "scheme", "delta_t", default=DEFAULT_SCHEME.delta_t)
    k = _pick(args, cfg, "scheme", "k", default=DEFAULT_SCHEME.k)
    return Scheme(int(dt), int(k))


def _inputs(args, cfg, need_trends=True):
    ohlc = _pick(args, cfg, "data", "ohlc")
    trends = _pick(args, cfg, "data", "trends")
    if ohlc is None or (need_trends and trends is None):
        raise ConfigError("--ohlc and --trends are required" if need_trends else "--ohlc is required")
    try:
        ohlc_bytes = Path(ohlc).read_bytes()
        trends_bytes = Path(trends).read_bytes() if trends is not None else None
    except OSError as exc:
        raise DataError(f"cannot read input: {exc}") from None
    return ohlc_bytes, trends_bytes


def _load_panel(args, cfg):
    ohlc, trends = _inputs(args, cfg)
    with stage("ingest"):
        bars, series = parse_ohlc_csv(ohlc), parse_trends_csv(trends)
    with stage("align"):
        return align(bars, series)


def _write(path: Path, data: bytes) -> None:
    path.write_bytes(data)
    print(f"wrote {path}")


# --- commands ------------------------------------------------------------

def cmd_synth(args, cfg):
    config = _synth_config(args, cfg, _seed(args, cfg))
    out = _out_dir(args, cfg)
    ohlc, trends = synth_generate(config)
    _write(out / "ohlc.csv", ohlc)
    _write(out / "trends.csv", trends)


def cmd_ingest_check(args, cfg):
    panel = _load_panel(args, cfg)
    lags = int(_pick(args, cfg, "adf", "lags", attr="adf_lags", default=5))
    series = [("r", panel.r), ("h", panel.h)] + [(t.keyword, t.values) for t in panel.trends]
    rows = []
    for name, values in series:
        try:
            rep = adf_test(values, lags, name)
            rows.append({"series": name, "adf_statistic": rep.adf_statistic,
                         "reject_unit_root_5pct": rep.reject_unit_root_5pct})
        except NumericalError as exc:
            rows.append({"series": name, "error": str(exc)})
    summary = {
        "panel_days": len(panel),
        "first_date": panel.dates[0].isoformat(),
        "last_date": panel.dates[-1].isoformat(),
        "n_trends": len(panel.trends),
        "gk_clamped": panel.gk_clamped,
        "adf_lags": lags,
        "stationarity": rows,
    }
    print(f"{len(panel)} aligned days, {len(panel.trends)} trends, "
          f"{panel.gk_clamped} clamped GK values")
    for row in rows:
        status = row.get("error") or ("stationary" if row["reject_unit_root_5pct"] else "unit root not rejected")
        print(f"  {row['series']:<10} {status}")
    _write(_out_dir(args, cfg) / "ingest-check.json",
           (json.dumps(summary, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def cmd_gk(args, cfg):
    ohlc, _ = _inputs(args, cfg, need_trends=False)
    with stage("ingest"):
        bars = parse_ohlc_csv(ohlc)
    raw = gk_raw_series(bars)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "h", "clamped"])
    for b, v in zip(bars, raw):
        writer.writerow([b.date.isoformat(), repr(max(float(v), 0.0)), int(v < 0)])
    print(f"{len(bars)} bars, {int((raw < 0).sum())} clamped")
    _write(_out_dir(args, cfg) / "gk.csv", buf.getvalue().encode("utf-8"))


def cmd_mi_grid(args, cfg):
    panel = _load_panel(args, cfg)
    dt_range = _int_range(_pick(args, cfg, "grid", "delta_t", attr="dt_range", default="1:10"))
    k_range = _int_range(_pick(args, cfg, "grid", "k", attr="k_range", default="2:20"))
    n_bins = int(_pick(args, cfg, "grid", "n_bins", attr="bins", default=infometrics.DEFAULT_BINS))
    with stage("mi-grid"):
        surface = infometrics.grid_search(panel, dt_range, k_range, n_bins)
    print(f"best scheme: delta_t={surface.best.delta_t} k={surface.best.k} "
          f"({len(surface.skipped)} skipped)")
    _write(_out_dir(args, cfg) / "mi-surface.csv", surface.to_csv())


def cmd_train(args, cfg):
    panel = _load_panel(args, cfg)
    scheme = _scheme(args, cfg) or DEFAULT_SCHEME
    config = _train_config(args, cfg, _seed(args, cfg))
    with stage("dataset"):
        ds = build_scheme_dataset(panel, scheme)
    with stage("lstm"):
        model = lstmnet.train(ds, config, log=_progress if args.verbose else None)
    out = _out_dir(args, cfg)
    if model.history:
        _, tr, te = model.history[-1]
        print(f"final train MAPE {tr:.4f}, test MAPE {te:.4f}")
    _write(out / "model.json", lstmnet.serialize_model(model))
    _write(out / "history.csv", lstmnet.history_csv(model))


def cmd_fit_garch(args, cfg):
    ohlc, _ = _inputs(args, cfg, need_trends=False)
    with stage("ingest"):
        bars = parse_ohlc_csv(ohlc)
    dt = int(_pick(args, cfg, "scheme", "delta_t", default=DEFAULT_SCHEME.delta_t))
    with stage("garch"):
        returns = aggregate_returns(log_return(bars), dt)
        fit = garchbench.fit_garch(returns)
    p = fit.params
    print(f"omega={p.omega:.6g} alpha={p.alpha:.4f} beta={p.beta:.4f} "
          f"loglik={fit.log_likelihood:.4f} converged={fit.converged}")
    _write(_out_dir(args, cfg) / "garch-fit.json", fit.to_json())


def _progress(epoch, train_loss, test_loss):
    log.info("epoch %d: train MAPE %.4f, test MAPE %.4f", epoch, train_loss, test_loss)


def cmd_run(args, cfg):
    seed = _seed(args, cfg)
    ohlc = _pick(args, cfg, "data", "ohlc")
    trends = _pick(args, cfg, "data", "trends")
    kw = {}
    dt_range = _pick(args, cfg, "grid", "delta_t", attr="dt_range")
    k_range = _pick(args, cfg, "grid", "k", attr="k_range")
    if dt_range is not None:
        kw["dt_range"] = _int_range(dt_range)
    if k_range is not None:
        kw["k_range"] = _int_range(k_range)
    config = ExperimentConfig(
        ohlc_path=ohlc, trends_path=trends,
        synth=_synth_config(args, cfg, seed),
        scheme=_scheme(args, cfg),
        n_bins=int(_pick(args, cfg, "grid", "n_bins", attr="bins", default=infometrics.DEFAULT_BINS)),
        train=_train_config(args, cfg, seed),
        out_dir=str(_out_dir(args, cfg)),
        **kw,
    )
    report = run_experiment(config, progress=_progress if args.verbose else None)
    print(render_report(report), end="")


def cmd_report(args, cfg):
    run_dir = Path(args.run_dir or getattr(args, "out", None) or cfg.get("out") or ".")
    try:
        report = json.loads((run_dir / "report.json").read_bytes())
    except OSError as exc:
        raise DataError(f"cannot read report: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"report.json is not valid JSON: {exc}") from None
    text = render_report(report)
    print(text, end="")
    _write(_out_dir(args, cfg) / "report.txt", text.encode("utf-8"))


# --- parser --------------------------------------------------------------

def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML configuration file")
    parser.add_argument("--seed", type=int, default=default, help="random seed (u64)")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def _data_flags(p, trends=True):
    p.add_argument("--ohlc", help="OHLC CSV (date,open,high,low,close)")
    if trends:
        p.add_argument("--trends", help="search-volume CSV (date,<keyword>...)")


def _scheme_flags(p):
    p.add_argument("--delta-t", dest="delta_t", type=int)
    p.add_argument("-k", "--k", dest="k", type=int)


def _train_flags(p):
    p.add_argument("--lag", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)


def _grid_flags(p):
    p.add_argument("--dt-range", dest="dt_range", help="LO:HI inclusive, default 1:10")
    p.add_argument("--k-range", dest="k_range", help="LO:HI inclusive, default 2:20")
    p.add_argument("--bins", type=int, help="histogram bins per axis, default 100")


def _synth_flags(p):
    p.add_argument("--n-days", dest="n_days", type=int)
    p.add_argument("--n-trends", dest="n_trends", type=int)
    p.add_argument("--coupling", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volcast", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic ohlc.csv/trends.csv pair")
    _synth_flags(p)
    p = add("ingest-check", cmd_ingest_check, "parse, align and ADF-check the inputs")
    _data_flags(p)
    p.add_argument("--adf-lags", dest="adf_lags", type=int)
    p = add("gk", cmd_gk, "daily Garman-Klass values to gk.csv")
    _data_flags(p, trends=False)
    p = add("mi-grid", cmd_mi_grid, "MI surface over (delta_t, k) to mi-surface.csv")
    _data_flags(p)
    _grid_flags(p)
    p = add("train", cmd_train, "train the LSTM; writes model.json and history.csv")
    _data_flags(p)
    _scheme_flags(p)
    _train_flags(p)
    p = add("fit-garch", cmd_fit_garch, "fit GARCH(1,1) to aggregated returns")
    _data_flags(p, trends=False)
    p.add_argument("--delta-t", dest="delta_t", type=int)
    p = add("run", cmd_run, "full LSTM vs GARCH experiment")
    _data_flags(p)
    _synth_flags(p)
    _scheme_flags(p)
    p.add_argument("--scheme", dest="scheme_mode", choices=("fixed", "auto"))
    _grid_flags(p)
    _train_flags(p)
    p = add("report", cmd_report, "render report.json as a table")
    p.add_argument("--run-dir", dest="run_dir", help="directory holding report.json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except VolcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
