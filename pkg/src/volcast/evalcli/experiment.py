"""End-to-end LSTM vs GARCH comparison on real or synthetic panels."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from volcast import garchbench, infometrics, lstmnet
from volcast.errors import ConfigError, DataError, NumericalError, VolcastError
from volcast.evalcli.metrics import metrics_report
from volcast.evalcli.synth import SynthConfig, synth_generate
from volcast.marketdata import align, parse_ohlc_csv, parse_trends_csv
from volcast.preprocess import DEFAULT_ADF_LAGS, Scheme, adf_test, build_scheme_dataset

log = logging.getLogger(__name__)

DEFAULT_SCHEME = Scheme(5, 5)
REPORT_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs come from ``ohlc_path``/``trends_path`` when both are set, else from ``synth``.

    ``scheme=None`` selects the scheme by MI grid search over ``dt_range``
    and ``k_range``.
    """

    ohlc_path: Optional[str] = None
    trends_path: Optional[str] = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    scheme: Optional[Scheme] = DEFAULT_SCHEME
    dt_range: tuple = infometrics.DEFAULT_DT_RANGE
    k_range: tuple = infometrics.DEFAULT_K_RANGE
    n_bins: int = infometrics.DEFAULT_BINS
    train: lstmnet.TrainConfig = field(default_factory=lstmnet.TrainConfig)
    adf_lags: int = DEFAULT_ADF_LAGS
    max_lag: int = 20
    out_dir: Optional[str] = None

    def __post_init__(self):
        if (self.ohlc_path is None) != (self.trends_path is None):
            raise ConfigError("ohlc_path and trends_path must be given together")
        if self.scheme is None and (not self.dt_range or not self.k_range):
            raise ConfigError("scheme 'auto' requires non-empty grid ranges")


@contextlib.contextmanager
def stage(name: str):
    """Prefix package errors raised inside the block with the stage name."""
    try:
        yield
    except VolcastError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc
    except FloatingPointError as exc:
        raise NumericalError(f"[{name}] {exc}") from exc


def _fmt(v: float) -> str:
    return repr(float(v))


def _predictions_csv(dates, actual, lstm_pred, garch_pred) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "actual", "lstm", "garch"])
    for d, a, l, g in zip(dates, actual, lstm_pred, garch_pred):
        writer.writerow([d.isoformat(), _fmt(a), _fmt(l), _fmt(g)])
    return buf.getvalue().encode("utf-8")


def _load_inputs(config: ExperimentConfig) -> tuple:
    if config.ohlc_path is not None:
        try:
            ohlc = Path(config.ohlc_path).read_bytes()
            trends = Path(config.trends_path).read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read input: {exc}") from None
        return ohlc, trends, "files"
    ohlc, trends = synth_generate(config.synth)
    return ohlc, trends, "synthetic"


def run_experiment(config: ExperimentConfig, progress=None) -> dict:
    """Run ingest → align → ADF → scheme → dataset → LSTM → GARCH → metrics.

    Writes ``report.json``, ``predictions.csv``, ``history.csv``,
    ``model.json``, ``garch-fit.json`` and, for grid selection,
    ``mi-surface.csv`` into ``config.out_dir`` when it is set. Returns the
    report dictionary.
    """
    outputs = {}
    with stage("ingest"):
        ohlc_bytes, trends_bytes, source = _load_inputs(config)
        bars = parse_ohlc_csv(ohlc_bytes)
        trends = parse_trends_csv(trends_bytes)
    with stage("align"):
        panel = align(bars, trends)
    log.info("panel: %d days, %d trends, %d clamped GK values",
             len(panel), len(panel.trends), panel.gk_clamped)

    with stage("stationarity"):
        series = [("r", panel.r), ("h", panel.h)] + [(t.keyword, t.values) for t in panel.trends]
        stationarity = []
        for name, values in series:
            try:
                rep = adf_test(values, config.adf_lags, name)
                stationarity.append({"series": name, "adf_statistic": rep.adf_statistic,
                                     "lags": rep.lags, "reject_unit_root_5pct": rep.reject_unit_root_5pct})
            except NumericalError as exc:
                stationarity.append({"series": name, "error": str(exc)})

    with stage("scheme"):
        if config.scheme is None:
            surface = infometrics.grid_search(panel, config.dt_range, config.k_range, config.n_bins)
            scheme = surface.best
            outputs["mi-surface.csv"] = surface.to_csv()
            selection = "auto"
        else:
            scheme = config.scheme
            selection = "fixed"
    log.info("scheme: delta_t=%d k=%d (%s)", scheme.delta_t, scheme.k, selection)

    with stage("dataset"):
        ds = build_scheme_dataset(panel, scheme)
        scheme_score = infometrics.scheme_mi(ds, config.n_bins)

    with stage("lstm"):
        model = lstmnet.train(ds, config.train, log=progress)
        rows = lstmnet.holdout_rows(model, ds)
        _, lstm_vol = lstmnet.predict(model, ds, rows)
        outputs["history.csv"] = lstmnet.history_csv(model)
        outputs["model.json"] = lstmnet.serialize_model(model)

    with stage("garch"):
        # training-segment periods end at the last training target
        fit_end = int(ds.periods[model.split_index - 1]) + 2
        fit = garchbench.fit_garch(ds.returns[:fit_end])
        variances = garchbench.one_step_variances(fit, ds.returns)
        garch_vol = np.sqrt(variances[ds.periods[rows]])
        if not np.all(np.isfinite(garch_vol)):
            raise NumericalError("non-finite GARCH forecasts")
        outputs["garch-fit.json"] = fit.to_json()

    with stage("metrics"):
        actual = ds.raw_target[rows]
        reports = [metrics_report("lstm", lstm_vol, actual, config.max_lag),
                   metrics_report("garch", garch_vol, actual, config.max_lag)]
        dates = [ds.target_dates[j] for j in rows]
        outputs["predictions.csv"] = _predictions_csv(dates, actual, lstm_vol, garch_vol)

    final = model.history[-1] if model.history else (0, math.nan, math.nan)
    report = {
        "version": REPORT_VERSION,
        "source": source,
        "data": {
            "n_bars": len(bars),
            "panel_days": len(panel),
            "first_date": panel.dates[0].isoformat(),
            "last_date": panel.dates[-1].isoformat(),
            "n_trends": len(panel.trends),
            "gk_clamped": panel.gk_clamped,
        },
        "stationarity": stationarity,
        "scheme": {"delta_t": scheme.delta_t, "k": scheme.k, "selection": selection,
                   "mi_score": scheme_score, "n_bins": config.n_bins},
        "dataset": {"rows": len(ds), "train_rows": model.split_index,
                    "test_rows": int(rows.shape[0]), "degenerate_rows": ds.degenerate_rows},
        "lstm": {"final_train_mape": final[1], "final_test_mape": final[2],
                 "epochs": config.train.epochs, "hidden_dim": config.train.hidden_dim,
                 "lag": config.train.lag, "batch_size": config.train.batch_size,
                 "seed": config.train.seed},
        "garch": {"omega": fit.params.omega, "alpha": fit.params.alpha, "beta": fit.params.beta,
                  "log_likelihood": fit.log_likelihood, "converged": fit.converged,
                  "n_obs": fit.n_obs},
        "models": [r.to_dict() for r in reports],
    }
    outputs["report.json"] = report_json(report)

    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, data in outputs.items():
            (out / name).write_bytes(data)
    return report


def report_json(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n").encode("utf-8")


def render_report(report: dict) -> str:
    """Plain-text comparison table for a ``report.json`` document."""
    s = report["scheme"]
    lines = [
        f"scheme: delta_t={s['delta_t']} k={s['k']} ({s['selection']})",
        f"test rows: {report['dataset']['test_rows']}",
        "",
        f"{'model':<8}{'MSE':>16}{'MAPE':>12}",
    ]
    for m in report["models"]:
        lines.append(f"{m['model_name']:<8}{m['mse']:>16.6g}{m['mape']:>12.4f}")
    lstm = next(m for m in report["models"] if m["model_name"] == "lstm")
    if lstm["residual_acf"]:
        top = max(abs(v) for v in lstm["residual_acf"][1:]) if len(lstm["residual_acf"]) > 1 else 0.0
        lines += ["", f"lstm residual max |acf| (lags 1..{len(lstm['residual_acf']) - 1}): {top:.4f}"]
    return "\n".join(lines) + "\n"


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(config, synth=replace(config.synth, seed=seed),
                   train=replace(config.train, seed=seed))
