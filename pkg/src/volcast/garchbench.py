"""GARCH(1,1) benchmark: filtering, Gaussian MLE by Nelder-Mead, simulation, forecasts.

Recursion: h2_t = omega + h2_{t-1} * (beta + alpha * eps2), i.e. ``alpha``
weights the squared shock and ``beta`` the lagged variance (textbook labels).
The default causal timing uses eps_{t-1}, giving
h2_t = omega + alpha * r_{t-1}^2 + beta * h2_{t-1}. ``contemporaneous=True``
uses eps_t instead and solves the implied quadratic for h2_t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from volcast import kernels
from volcast.errors import ConfigError, DataError, NumericalError

MAX_PERSISTENCE = 0.999
MAX_ITER = 2000
SIMPLEX_TOL = 1e-8
BURN_IN = 500
MIN_FIT_LENGTH = 50
# multi-start points as (alpha, beta); omega is set from the sample variance
START_POINTS = ((0.10, 0.80), (0.05, 0.90), (0.30, 0.60))


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float

    def validate(self, strict: bool = True) -> "GarchParams":
        vals = (self.omega, self.alpha, self.beta)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"non-finite GARCH parameters {vals}")
        if not self.omega > 0 or self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"GARCH constraints violated: {self}")
        if strict and not self.alpha + self.beta < 1:
            raise ConfigError(f"alpha + beta must be < 1, got {self.alpha + self.beta}")
        return self

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


@dataclass
class GarchFit:
    params: GarchParams
    log_likelihood: float
    converged: bool
    iterations: int
    initial_variance: float
    n_obs: int
    starts: list = field(default_factory=list)

    def to_json(self) -> bytes:
        doc = {
            "params": {"omega": self.params.omega, "alpha": self.params.alpha,
                       "beta": self.params.beta},
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "initial_variance": self.initial_variance,
            "n_obs": self.n_obs,
            "starts": self.starts,
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes) -> "GarchFit":
        doc = json.loads(data)
        return cls(GarchParams(**doc["params"]), doc["log_likelihood"], doc["converged"],
                   doc["iterations"], doc["initial_variance"], doc["n_obs"], doc.get("starts", []))


def _returns(returns) -> np.ndarray:
    return np.ascontiguousarray(returns, dtype=np.float64)


def garch_filter(returns, params: GarchParams, initial_variance: Optional[float] = None,
                 contemporaneous: bool = False) -> np.ndarray:
    """Conditional variances h2_t; ``h2_0`` is ``initial_variance`` or the sample variance."""
    r = _returns(returns)
    if r.shape[0] < 2:
        raise DataError("garch_filter needs at least 2 returns")
    params.validate()
    h0 = float(np.var(r)) if initial_variance is None else float(initial_variance)
    h2 = kernels.garch_variance(r, params.omega, params.alpha, params.beta, h0, contemporaneous)
    # NaN inputs propagate forward untouched; anything else non-finite is a failure
    if not np.all(np.isfinite(h2)) and not np.any(np.isnan(r)):
        raise NumericalError("non-finite GARCH recursion")
    return h2


def garch_loglik(returns, params: GarchParams, initial_variance: Optional[float] = None,
                 contemporaneous: bool = False) -> float:
    """Gaussian log-likelihood: sum of -0.5 (ln 2π + ln h2_t + r_t² / h2_t)."""
    r = _returns(returns)
    if r.shape[0] < 1:
        raise DataError("garch_loglik needs at least 1 return")
    params.validate()
    h0 = float(np.var(r)) if initial_variance is None else float(initial_variance)
    return float(kernels.garch_loglik(r, params.omega, params.alpha, params.beta, h0,
                                      contemporaneous))


def _to_unconstrained(p: GarchParams) -> np.ndarray:
    persistence = p.alpha + p.beta
    share = p.alpha / persistence
    return np.array([math.log(p.omega), logit(persistence / MAX_PERSISTENCE), logit(share)],
                    dtype=np.float64)


def _from_unconstrained(theta) -> GarchParams:
    persistence = MAX_PERSISTENCE * float(expit(theta[1]))
    share = float(expit(theta[2]))
    return GarchParams(math.exp(theta[0]), persistence * share, persistence * (1.0 - share))


def fit_garch(returns, contemporaneous: bool = False) -> GarchFit:
    """Maximum-likelihood GARCH(1,1) via multi-start Nelder-Mead.

    The search runs over (log omega, logit(alpha+beta), logit share) so that
    omega > 0, alpha, beta >= 0 and alpha + beta <= 0.999 hold throughout.
    Each start stops once the simplex spread falls below 1e-8 or after 2000
    iterations; the best start wins.
    """
    r = _returns(returns)
    if r.shape[0] < MIN_FIT_LENGTH:
        raise DataError(f"fit_garch needs at least {MIN_FIT_LENGTH} returns, got {r.shape[0]}")
    if not np.all(np.isfinite(r)):
        raise DataError("returns contain non-finite values")
    var = float(np.var(r))
    if not var > 0:
        raise NumericalError("degenerate likelihood: returns have zero variance")
    n = r.shape[0]

    def nll(theta):
        if not np.all(np.abs(theta) < 700):
            return math.inf
        p = _from_unconstrained(theta)
        ll = kernels.garch_loglik(r, p.omega, p.alpha, p.beta, var, contemporaneous)
        return -ll / n if math.isfinite(ll) else math.inf

    best, starts = None, []
    for a0, b0 in START_POINTS:
        p0 = GarchParams(var * (1.0 - a0 - b0), a0, b0)
        theta0 = _to_unconstrained(p0)
        start_ll = -nll(theta0) * n
        res = minimize(nll, theta0, method="Nelder-Mead",
                       options={"xatol": SIMPLEX_TOL, "fatol": math.inf,
                                "maxiter": MAX_ITER, "maxfev": 10 * MAX_ITER})
        ll = -float(res.fun) * n
        starts.append({"alpha0": a0, "beta0": b0, "start_loglik": start_ll,
                       "loglik": ll, "iterations": int(res.nit), "converged": bool(res.success)})
        if math.isfinite(ll) and (best is None or ll > best[1]):
            best = (res, ll)
    if best is None:
        raise NumericalError("all GARCH starts diverged")
    res, ll = best
    params = _from_unconstrained(res.x)
    converged = bool(res.success) and params.alpha + params.beta < 1.0
    return GarchFit(params, ll, converged, int(res.nit), var, n, starts)


def one_step_variances(fit: GarchFit, returns) -> np.ndarray:
    """``out[t]`` is the variance forecast for period t+1 given returns up to t."""
    r = _returns(returns)
    p = fit.params
    h2 = kernels.garch_variance(r, p.omega, p.alpha, p.beta, fit.initial_variance, False)
    return (p.omega + p.alpha * r * r) + p.beta * h2


def garch_forecast(fit: GarchFit, returns) -> float:
    """Next-period volatility sqrt(h2_{T+1}) after filtering ``returns``."""
    r = _returns(returns)
    if r.shape[0] < 1:
        raise DataError("garch_forecast needs at least 1 return")
    out = float(np.sqrt(one_step_variances(fit, r)[-1]))
    if not math.isfinite(out):
        raise NumericalError("non-finite GARCH forecast")
    return out


def simulate_garch_path(params: GarchParams, length: int, seed: int,
                        burn_in: int = BURN_IN) -> tuple:
    """Simulated ``(returns, h2)`` with Gaussian innovations after a discarded burn-in."""
    params.validate()
    if length < 1:
        raise ConfigError("length must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(length + burn_in)
    r, h2 = kernels.garch_simulate(z, params.omega, params.alpha, params.beta,
                                   params.unconditional_variance)
    return r[burn_in:].copy(), h2[burn_in:].copy()


def simulate_garch(params: GarchParams, length: int, seed: int) -> np.ndarray:
    return simulate_garch_path(params, length, seed)[0]
