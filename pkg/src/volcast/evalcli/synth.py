"""Synthetic OHLC + search-volume panels with a known volatility link."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from volcast.errors import ConfigError
from volcast.garchbench import GarchParams, simulate_garch_path
from volcast.marketdata import OhlcBar, TrendSeries, write_ohlc_csv, write_trends_csv

# keyword abbreviations of the 28 finance-related search terms
KEYWORDS = (
    "insur", "fisrev", "loan", "anti-cor", "reaest", "debt", "lever", "equity",
    "adver", "airtic", "educa", "marri", "fininv", "finder", "econo", "profi",
    "trave", "autbuy", "autfin", "luxgoo", "infla", "crisi", "defau", "offbui",
    "crecar", "bank", "incre", "bond",
)


def _default_garch() -> GarchParams:
    # daily unconditional variance 1e-4 (1% daily volatility)
    return GarchParams(omega=2e-6, alpha=0.08, beta=0.90)


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 2500
    n_trends: int = 28
    garch: GarchParams = field(default_factory=_default_garch)
    trend_coupling: float = 0.8
    seed: int = 7
    substeps: int = 20
    start_date: date = date(2006, 6, 1)
    start_price: float = 1000.0

    def __post_init__(self):
        if self.n_days < 200:
            raise ConfigError("n_days must be >= 200")
        if self.n_trends < 1:
            raise ConfigError("n_trends must be >= 1")
        if not 0.0 <= self.trend_coupling <= 1.0:
            raise ConfigError("trend_coupling must lie in [0, 1]")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        if not self.start_price > 0:
            raise ConfigError("start_price must be positive")
        self.garch.validate()


def trading_days(start: date, n: int) -> list:
    """``n`` consecutive weekdays starting on or after ``start``."""
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def keyword_names(n: int) -> list:
    return [KEYWORDS[j] if j < len(KEYWORDS) else f"kw{j + 1}" for j in range(n)]


def synth_panel(config: SynthConfig) -> tuple:
    """Bars, trend series and the latent daily variance path.

    Each day's prices follow ``substeps`` Gaussian log-increments with total
    variance equal to that day's latent GARCH variance; high/low are the path
    extremes including the open. Trend j on day t mixes the standardized latent
    volatility of day t-1 with seeded noise.
    """
    _, h2 = simulate_garch_path(config.garch, config.n_days, config.seed)
    rng = np.random.default_rng([config.seed, 1])
    steps = rng.standard_normal((config.n_days, config.substeps))
    steps *= np.sqrt(h2 / config.substeps)[:, None]

    dates = trading_days(config.start_date, config.n_days)
    bars, op = [], float(config.start_price)
    for t in range(config.n_days):
        path = np.log(op) + np.cumsum(steps[t])
        cl = float(np.exp(path[-1]))
        hi = max(op, cl, float(np.exp(path.max())))
        lo = min(op, cl, float(np.exp(path.min())))
        bars.append(OhlcBar(dates[t], op, hi, lo, cl))
        op = cl

    vol = np.sqrt(h2)
    spread = vol.std()
    # constant latent variance (alpha = beta = 0) carries no signal to standardize
    z = (vol - vol.mean()) / spread if spread > 0 else np.zeros_like(vol)
    lagged = np.concatenate([z[:1], z[:-1]])
    noise_rng = np.random.default_rng([config.seed, 2])
    c = config.trend_coupling
    trends = []
    for name in keyword_names(config.n_trends):
        base = noise_rng.uniform(200.0, 5000.0)
        mix = c * lagged + (1.0 - c) * noise_rng.standard_normal(config.n_days)
        values = np.maximum(np.round(base * (1.0 + 0.15 * mix), 2), 0.0)
        trends.append(TrendSeries(name, tuple(dates), values))
    return bars, trends, h2


def synth_generate(config: SynthConfig) -> tuple:
    """``(ohlc.csv, trends.csv)`` bytes for ``config``."""
    bars, trends, _ = synth_panel(config)
    return write_ohlc_csv(bars), write_trends_csv(trends)
