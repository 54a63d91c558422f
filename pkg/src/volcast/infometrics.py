"""Binned mutual information and the (Δt, k) scheme grid search."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from volcast import kernels
from volcast.errors import ConfigError, DataError
from volcast.marketdata import AlignedPanel
from volcast.preprocess import Scheme, SchemeDataset, build_scheme_dataset

DEFAULT_BINS = 100
MIN_ROWS = 30
DEFAULT_DT_RANGE = tuple(range(1, 11))
DEFAULT_K_RANGE = tuple(range(2, 21))


@dataclass(frozen=True)
class BinGrid:
    n_bins: int
    min: float
    max: float

    def __post_init__(self):
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        if not self.max >= self.min:
            raise ConfigError("grid max must be >= min")

    @classmethod
    def covering(cls, values, n_bins: int) -> "BinGrid":
        values = np.asarray(values, dtype=np.float64)
        return cls(n_bins, float(values.min()), float(values.max()))


def bin_index(value: float, grid: BinGrid) -> int:
    """1-based equal-width bin of ``value``; the right edge belongs to bin N."""
    if not grid.min <= value <= grid.max:
        raise DataError(f"value {value} outside [{grid.min}, {grid.max}]")
    if grid.max == grid.min:
        return 1
    i = 1 + math.floor(grid.n_bins * (value - grid.min) / (grid.max - grid.min))
    return min(i, grid.n_bins)


def _as_series(v, name: str) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if v.shape[0] == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} contains non-finite values")
    return v


def empirical_mi(x, y, n_bins: int = DEFAULT_BINS) -> float:
    """Plug-in mutual information (nats) of the N×N equal-width histogram of (x, y).

    Each axis is binned over its own sample range.
    """
    x = _as_series(x, "x")
    y = _as_series(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DataError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    # clip tiny negative rounding residue; the estimator is a KL divergence
    return max(float(kernels.binned_mi(x, y, int(n_bins))), 0.0)


def scheme_mi(dataset: SchemeDataset, n_bins: int = DEFAULT_BINS) -> float:
    """Sum of per-column MI between each feature and the normalized target."""
    return math.fsum(empirical_mi(dataset.features[:, j], dataset.target, n_bins)
                     for j in range(dataset.n_features))


@dataclass(frozen=True)
class SurfaceEntry:
    scheme: Scheme
    mi_score: float
    rows: int
    skipped: bool = False


@dataclass
class MiSurface:
    entries: list
    best: Scheme
    n_bins: int = DEFAULT_BINS
    skipped: list = field(default_factory=list)

    def score(self, delta_t: int, k: int) -> float:
        for e in self.entries:
            if e.scheme == Scheme(delta_t, k):
                return e.mi_score
        raise KeyError((delta_t, k))

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["delta_t", "k", "mi_score", "skipped"])
        for e in self.entries:
            score = "" if e.skipped else repr(e.mi_score)
            writer.writerow([e.scheme.delta_t, e.scheme.k, score, int(e.skipped)])
        return buf.getvalue().encode("utf-8")


def _evaluate(panel: AlignedPanel, scheme: Scheme, n_bins: int, min_rows: int) -> SurfaceEntry:
    n_rows = len(panel) // scheme.delta_t - scheme.k - 1
    if n_rows < min_rows:
        return SurfaceEntry(scheme, math.nan, max(n_rows, 0), skipped=True)
    ds = build_scheme_dataset(panel, scheme)
    return SurfaceEntry(scheme, scheme_mi(ds, n_bins), len(ds))


def _evaluate_star(args):
    return _evaluate(*args)


def select_best(entries: Iterable[SurfaceEntry]) -> Optional[Scheme]:
    """Argmax of the score; ties go to smaller Δt, then smaller k."""
    best, best_score = None, -math.inf
    for e in sorted(entries, key=lambda e: (e.scheme.delta_t, e.scheme.k)):
        if not e.skipped and e.mi_score > best_score:
            best, best_score = e.scheme, e.mi_score
    return best


def grid_search(panel: AlignedPanel, delta_t_range=DEFAULT_DT_RANGE, k_range=DEFAULT_K_RANGE,
                n_bins: int = DEFAULT_BINS, min_rows: int = MIN_ROWS,
                workers: int = 1) -> MiSurface:
    """Evaluate ``scheme_mi`` over every (Δt, k) pair.

    Schemes leaving fewer than ``min_rows`` rows are recorded as skipped.
    With ``workers > 1`` evaluations run in a process pool; the reduction is
    order-independent, so the surface is identical either way.
    """
    schemes = sorted({Scheme(int(dt), int(k)) for dt in delta_t_range for k in k_range})
    if not schemes:
        raise ConfigError("empty Δt or k range")
    jobs = [(panel, s, n_bins, min_rows) for s in schemes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_evaluate_star, jobs))
    else:
        entries = [_evaluate_star(j) for j in jobs]
    entries.sort(key=lambda e: (e.scheme.delta_t, e.scheme.k))
    best = select_best(entries)
    if best is None:
        raise DataError(f"panel of {len(panel)} days too short for every scheme in the grid")
    return MiSurface(entries, best, n_bins, [e.scheme for e in entries if e.skipped])
