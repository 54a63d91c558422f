"""Pure-numpy implementations of the compiled kernels (import fallback)."""

import math

import numpy as np
from scipy.signal import lfilter

LOG_2PI = math.log(2.0 * math.pi)


def garch_variance(r, omega, alpha, beta, h2_init, contemporaneous=False):
    r = np.ascontiguousarray(r, dtype=np.float64)
    n = r.shape[0]
    h2 = np.empty(n)
    if n == 0:
        return h2
    h2[0] = h2_init
    if contemporaneous:
        prev = h2_init
        for t in range(1, n):
            a = omega + beta * prev
            b = alpha * prev * r[t] * r[t]
            prev = 0.5 * (a + math.sqrt(a * a + 4.0 * b))
            h2[t] = prev
        return h2
    # h2_t - beta*h2_{t-1} = omega + alpha*r_{t-1}^2 is a first-order IIR filter
    drive = omega + alpha * r[:-1] * r[:-1]
    h2[1:], _ = lfilter([1.0], [1.0, -beta], drive, zi=[beta * h2_init])
    return h2


def garch_loglik(r, omega, alpha, beta, h2_init, contemporaneous=False):
    r = np.ascontiguousarray(r, dtype=np.float64)
    if r.shape[0] == 0:
        return 0.0
    h2 = garch_variance(r, omega, alpha, beta, h2_init, contemporaneous)
    if not np.all(h2 > 0.0):
        return -math.inf
    return float(np.sum(-0.5 * (LOG_2PI + np.log(h2) + r * r / h2)))


def garch_simulate(z, omega, alpha, beta, h2_0):
    z = np.ascontiguousarray(z, dtype=np.float64)
    n = z.shape[0]
    r = np.empty(n)
    h2 = np.empty(n)
    cur = h2_0
    for t in range(n):
        h2[t] = cur
        r[t] = math.sqrt(cur) * z[t]
        cur = (omega + alpha * r[t] * r[t]) + beta * cur
    return r, h2


def _bins(v, n_bins):
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros(v.shape[0], dtype=np.int64)
    idx = np.floor(n_bins * (v - lo) / (hi - lo)).astype(np.int64)
    return np.minimum(idx, n_bins - 1)


def binned_mi(x, y, n_bins):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    i = _bins(x, n_bins)
    j = _bins(y, n_bins)
    joint = np.bincount(i * n_bins + j, minlength=n_bins * n_bins).reshape(n_bins, n_bins)
    mx = np.bincount(i, minlength=n_bins).astype(np.float64)
    my = np.bincount(j, minlength=n_bins).astype(np.float64)
    ii, jj = np.nonzero(joint)
    c = joint[ii, jj].astype(np.float64)
    return float(np.sum(c / n * np.log(c * n / (mx[ii] * my[jj]))))
