"""Forecast error metrics and residual autocorrelation diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from volcast.errors import DataError
from volcast.lstmnet import mape_loss


def mse(pred, actual) -> float:
    pred = np.atleast_1d(np.asarray(pred, dtype=np.float64))
    actual = np.atleast_1d(np.asarray(actual, dtype=np.float64))
    if pred.shape != actual.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {actual.shape}")
    if pred.size == 0:
        raise DataError("empty input to mse")
    d = pred - actual
    return float(np.mean(d * d))


def mape(pred, actual, epsilon: float = 1e-8) -> float:
    return mape_loss(pred, actual, epsilon)


def acf(z, max_lag: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (autocovariances use divisor n)."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if max_lag < 0 or n <= max_lag + 1:
        raise DataError(f"series of length {n} too short for max_lag={max_lag}")
    d = z - z.mean()
    c0 = d @ d / n
    if not c0 > 0:
        raise DataError("zero-variance series has no autocorrelation")
    return np.array([d[: n - k] @ d[k:] / n / c0 for k in range(max_lag + 1)])


def pacf(z, max_lag: int) -> np.ndarray:
    """Partial autocorrelations from the sample ACF by the Durbin-Levinson recursion."""
    rho = acf(z, max_lag)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    phi = np.zeros(max_lag + 1)
    for k in range(1, max_lag + 1):
        num = rho[k] - phi[1:k] @ rho[k - 1:0:-1]
        den = 1.0 - phi[1:k] @ rho[1:k]
        phi_kk = num / den
        phi[1:k] = phi[1:k] - phi_kk * phi[k - 1:0:-1]
        phi[k] = phi_kk
        out[k] = phi_kk
    return out


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    mse: float
    mape: float
    n_test: int
    residual_acf: list
    residual_pacf: list

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(name: str, pred, actual, max_lag: int = 20) -> MetricsReport:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    resid = actual - pred
    lag = max(0, min(max_lag, resid.shape[0] - 2))
    try:
        racf, rpacf = acf(resid, lag).tolist(), pacf(resid, lag).tolist()
    except DataError:
        racf, rpacf = [], []
    return MetricsReport(name, mse(pred, actual), mape(pred, actual), int(actual.shape[0]),
                         racf, rpacf)
