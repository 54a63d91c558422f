"""Scheme datasets: Δt aggregation, rolling normalization, next-period target, ADF check."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from volcast.errors import ConfigError, DataError, NumericalError
from volcast.marketdata import AlignedPanel

DEGENERATE_STD = 1e-12
ADF_CRITICAL_5PCT = -2.86
DEFAULT_ADF_LAGS = 5


@dataclass(frozen=True, order=True)
class Scheme:
    """Observation interval ``delta_t`` (days per period) and look-back window ``k``."""

    delta_t: int
    k: int

    def __post_init__(self):
        if int(self.delta_t) != self.delta_t or self.delta_t < 1:
            raise ConfigError(f"delta_t must be a positive integer, got {self.delta_t}")
        if int(self.k) != self.k or self.k < 2:
            raise ConfigError(f"k must be an integer >= 2, got {self.k}")


@dataclass(frozen=True)
class NormalizedSeries:
    values: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class SchemeDataset:
    """Normalized features X^{Δt,k} and target Y^{Δt,k}, one row per period i.

    Row j corresponds to aggregated period ``periods[j]`` (0-based); its target
    is h^{Δt} of the following period. ``norm_mean``/``norm_std`` are the
    statistics of the h column over periods i-k..i used to normalize the target.
    """

    scheme: Scheme
    columns: tuple
    features: np.ndarray
    target: np.ndarray
    raw_target: np.ndarray
    norm_mean: np.ndarray
    norm_std: np.ndarray
    periods: np.ndarray
    target_dates: tuple
    returns: np.ndarray
    degenerate_rows: int = 0

    def __len__(self):
        return self.target.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def denormalize(self, normalized, rows=None) -> np.ndarray:
        rows = slice(None) if rows is None else rows
        return np.asarray(normalized) * self.norm_std[rows] + self.norm_mean[rows]

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.columns) + ["target", "raw_target", "norm_mean", "norm_std"])
        for j in range(len(self)):
            row = [repr(float(v)) for v in self.features[j]]
            row += [repr(float(self.target[j])), repr(float(self.raw_target[j])),
                    repr(float(self.norm_mean[j])), repr(float(self.norm_std[j]))]
            writer.writerow(row)
        return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class StationarityReport:
    series_name: str
    adf_statistic: float
    lags: int
    n_obs: int
    reject_unit_root_5pct: bool


def _blocks(z, delta_t: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if int(delta_t) != delta_t or delta_t < 1:
        raise ConfigError(f"delta_t must be a positive integer, got {delta_t}")
    if z.shape[0] < delta_t:
        raise DataError(f"delta_t={delta_t} exceeds series length {z.shape[0]}")
    n = z.shape[0] // delta_t
    return z[: n * delta_t].reshape(n, delta_t)


def aggregate_returns(r, delta_t: int) -> np.ndarray:
    """Sum of daily returns per block of ``delta_t`` days; partial tail dropped."""
    return _blocks(r, delta_t).sum(axis=1)


def aggregate_trend(d, delta_t: int) -> np.ndarray:
    return _blocks(d, delta_t).mean(axis=1)


def aggregate_vol(h, delta_t: int) -> np.ndarray:
    """Root of the sum of squared daily values per block."""
    b = _blocks(h, delta_t)
    # left-to-right accumulation keeps the result monotone in each added day
    return np.sqrt(np.cumsum(b * b, axis=1)[:, -1])


def rolling_stats(z, k: int) -> tuple:
    """Mean and sample std (divisor k) over windows i-k..i, for i = k..len-1."""
    z = np.asarray(z, dtype=np.float64)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if z.shape[0] < k + 1:
        raise DataError(f"series of length {z.shape[0]} is shorter than k+1={k + 1}")
    win = sliding_window_view(z, k + 1)
    mean = win.mean(axis=1)
    std = np.sqrt(((win - mean[:, None]) ** 2).sum(axis=1) / k)
    return mean, std


def rolling_normalize(z, k: int) -> NormalizedSeries:
    """(z_i - mean(z_{i-k..i})) / std(z_{i-k..i}); the first k values are trimmed.

    Windows with std below 1e-12 emit 0 and are flagged in ``degenerate``.
    """
    z = np.asarray(z, dtype=np.float64)
    mean, std = rolling_stats(z, k)
    degenerate = std < DEGENERATE_STD
    safe = np.where(degenerate, 1.0, std)
    values = np.where(degenerate, 0.0, (z[k:] - mean) / safe)
    return NormalizedSeries(values, mean, std, degenerate)


def build_scheme_dataset(panel: AlignedPanel, scheme: Scheme) -> SchemeDataset:
    dt, k = scheme.delta_t, scheme.k
    n_periods = len(panel) // dt
    n_rows = n_periods - k - 1
    if n_rows < 1:
        raise DataError(
            f"panel of {len(panel)} days is too short for scheme (Δt={dt}, k={k})")

    raw_cols = [aggregate_returns(panel.r, dt), aggregate_vol(panel.h, dt)]
    raw_cols += [aggregate_trend(t.values, dt) for t in panel.trends]
    names = ("r", "h") + tuple(panel.keywords)

    feats, degenerate = [], np.zeros(n_periods - k, dtype=bool)
    for col in raw_cols:
        norm = rolling_normalize(col, k)
        feats.append(norm.values[:n_rows])
        degenerate |= norm.degenerate
    features = np.column_stack(feats)

    h_agg = raw_cols[1]
    mean, std = rolling_stats(h_agg, k)
    mean, std = mean[:n_rows], std[:n_rows]
    # target windows stop at period i, so the target std falls back to 1 instead of flagging
    std = np.where(std < DEGENERATE_STD, 1.0, std)
    raw_target = h_agg[k + 1: k + 1 + n_rows].copy()
    target = (raw_target - mean) / std

    periods = np.arange(k, k + n_rows)
    target_dates = tuple(panel.dates[(p + 2) * dt - 1] for p in periods)
    return SchemeDataset(
        scheme=scheme,
        columns=names,
        features=features,
        target=target,
        raw_target=raw_target,
        norm_mean=mean,
        norm_std=std,
        periods=periods,
        target_dates=target_dates,
        returns=raw_cols[0],
        degenerate_rows=int(np.count_nonzero(degenerate[:n_rows])),
    )


def adf_test(z, lags: int = DEFAULT_ADF_LAGS, name: str = "series") -> StationarityReport:
    """Constant-only augmented Dickey-Fuller regression.

    Regresses Δz_t on (1, z_{t-1}, Δz_{t-1}, ..., Δz_{t-lags}) and reports the
    t-ratio of the z_{t-1} coefficient against the 5% critical value -2.86.
    """
    z = np.asarray(z, dtype=np.float64)
    if lags < 0:
        raise ConfigError("lags must be non-negative")
    if z.shape[0] < lags + 10:
        raise DataError(f"series of length {z.shape[0]} too short for {lags} ADF lags")
    dz = np.diff(z)
    y = dz[lags:]
    cols = [np.ones_like(y), z[lags:-1]]
    cols += [dz[lags - j: dz.shape[0] - j] for j in range(1, lags + 1)]
    X = np.column_stack(cols)
    n, p = X.shape
    if n <= p:
        raise DataError("too few observations for the ADF regression")
    xtx = X.T @ X
    if np.linalg.matrix_rank(X) < p:
        raise NumericalError(f"singular ADF regression matrix for {name}")
    coef = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ coef
    sigma2 = resid @ resid / (n - p)
    se = np.sqrt(sigma2 * np.linalg.inv(xtx)[1, 1])
    if not se > 0:
        raise NumericalError(f"zero residual variance in ADF regression for {name}")
    stat = float(coef[1] / se)
    return StationarityReport(name, stat, lags, n, stat < ADF_CRITICAL_5PCT)
