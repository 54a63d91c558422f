"""OHLC and search-volume ingestion, date alignment, returns and Garman-Klass volatility."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from typing import BinaryIO, Sequence, Union

import numpy as np

from volcast.errors import DataError

Source = Union[bytes, str, os.PathLike, BinaryIO]

OHLC_HEADER = ["date", "open", "high", "low", "close"]

# Garman-Klass quadratic-form coefficients
GK_RANGE = 0.511
GK_CROSS = 0.019
GK_CLOSE = 0.383


@dataclass(frozen=True)
class OhlcBar:
    date: date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            raise DataError(f"non-positive or non-finite price on {self.date}")
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise DataError(f"inverted range on {self.date}")

    def scaled(self, factor: float) -> "OhlcBar":
        return OhlcBar(self.date, self.open * factor, self.high * factor,
                       self.low * factor, self.close * factor)


@dataclass(frozen=True)
class TrendSeries:
    """Search volume for one keyword; NaN marks a missing observation."""

    keyword: str
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise DataError(f"trend {self.keyword!r}: dates and values differ in length")
        if np.any(self.values < 0):
            raise DataError(f"trend {self.keyword!r}: negative volume")


@dataclass(frozen=True)
class AlignedPanel:
    """Date-aligned daily matrix X = (r, h, d^1..d^n).

    ``bars`` holds the bars backing the panel, including the bar preceding
    ``dates[0]`` that anchors the first return.
    """

    dates: tuple
    r: np.ndarray
    h: np.ndarray
    trends: list
    bars: tuple = field(repr=False)
    gk_clamped: int = 0

    def __len__(self):
        return len(self.dates)

    @property
    def keywords(self) -> list:
        return [t.keyword for t in self.trends]

    def trend_matrix(self) -> np.ndarray:
        if not self.trends:
            return np.empty((len(self.dates), 0))
        return np.column_stack([t.values for t in self.trends])


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataError(f"input is not UTF-8: {exc}") from None


def _parse_decimal(text: str, line: int, what: str) -> float:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise DataError(f"malformed {what} {text!r} at line {line}") from None
    if not value.is_finite():
        raise DataError(f"non-finite {what} at line {line}")
    return float(value)


def _parse_date(text: str, line: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"malformed date {text!r} at line {line}") from None


def parse_ohlc_csv(source: Source) -> list:
    """Parse ``date,open,high,low,close`` rows into validated bars."""
    reader = csv.reader(io.StringIO(_read_text(source)))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != OHLC_HEADER:
        raise DataError(f"expected header {','.join(OHLC_HEADER)}, got {header}")
    bars = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise DataError(f"malformed row at line {line}: expected 5 fields, got {len(row)}")
        d = _parse_date(row[0], line)
        op, hi, lo, cl = (_parse_decimal(c, line, "price") for c in row[1:])
        if min(op, hi, lo, cl) <= 0:
            raise DataError(f"non-positive price at line {line}")
        if not (lo <= op <= hi and lo <= cl <= hi):
            raise DataError(f"inverted range at line {line}")
        if bars and d <= bars[-1].date:
            kind = "duplicate date" if d == bars[-1].date else "non-monotonic date"
            raise DataError(f"{kind} {d} at line {line}")
        bars.append(OhlcBar(d, op, hi, lo, cl))
    if not bars:
        raise DataError("no data rows")
    return bars


def parse_trends_csv(source: Source) -> list:
    """Parse ``date,<kw1>,<kw2>,...``; blank cells become NaN gaps."""
    reader = csv.reader(io.StringIO(_read_text(source)))
    header = next(reader, None)
    if header is None or not header or header[0].strip().lower() != "date":
        raise DataError("trends header must start with 'date'")
    keywords = [h.strip() for h in header[1:]]
    if not keywords:
        raise DataError("trends file has no keyword columns")
    if any(not k for k in keywords):
        raise DataError("empty keyword header")
    if len(set(keywords)) != len(keywords):
        raise DataError("duplicate keyword header")
    dates, rows = [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"malformed row at line {line}: expected {len(header)} fields")
        d = _parse_date(row[0], line)
        if dates and d <= dates[-1]:
            kind = "duplicate date" if d == dates[-1] else "non-monotonic date"
            raise DataError(f"{kind} {d} at line {line}")
        vals = []
        for cell in row[1:]:
            if not cell.strip():
                vals.append(math.nan)
                continue
            v = _parse_decimal(cell, line, "volume")
            if v < 0:
                raise DataError(f"negative volume at line {line}")
            vals.append(v)
        dates.append(d)
        rows.append(vals)
    if not rows:
        raise DataError("no data rows")
    matrix = np.array(rows, dtype=np.float64)
    dates = tuple(dates)
    return [TrendSeries(kw, dates, matrix[:, j].copy()) for j, kw in enumerate(keywords)]


def log_return(bars: Sequence[OhlcBar]) -> np.ndarray:
    """Daily log returns ln(Cl_t / Cl_{t-1}); one shorter than ``bars``."""
    if len(bars) < 2:
        raise DataError("need at least 2 bars for returns")
    close = np.array([b.close for b in bars], dtype=np.float64)
    return np.log(close[1:] / close[:-1])


def gk_raw(open_, high, low, close):
    """Unclamped Garman-Klass quadratic form; accepts scalars or arrays."""
    u = np.log(np.divide(high, open_))
    d = np.log(np.divide(low, open_))
    c = np.log(np.divide(close, open_))
    return GK_RANGE * (u - d) ** 2 - GK_CROSS * (c * (u + d) - 2.0 * u * d) - GK_CLOSE * c**2


def gk_volatility(bar: OhlcBar) -> float:
    """Garman-Klass daily value h_t, clamped at 0."""
    return max(float(gk_raw(bar.open, bar.high, bar.low, bar.close)), 0.0)


def gk_raw_series(bars: Sequence[OhlcBar]) -> np.ndarray:
    arr = np.array([(b.open, b.high, b.low, b.close) for b in bars], dtype=np.float64)
    return gk_raw(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def gk_series(bars: Sequence[OhlcBar]) -> tuple:
    """Vectorised ``gk_volatility``; returns ``(h, clamped_count)``."""
    raw = gk_raw_series(bars)
    neg = raw < 0
    return np.where(neg, 0.0, raw), int(np.count_nonzero(neg))


def _fill_on(trend: TrendSeries, targets: Sequence[date]) -> np.ndarray:
    """Value of ``trend`` on each target date, forward-filled from the latest prior observation."""
    obs = [(d, v) for d, v in zip(trend.dates, trend.values) if not math.isnan(v)]
    out = np.full(len(targets), np.nan)
    j, last = 0, math.nan
    for i, d in enumerate(targets):
        while j < len(obs) and obs[j][0] <= d:
            last = obs[j][1]
            j += 1
        out[i] = last
    return out


def align(bars: Sequence[OhlcBar], trends: Sequence[TrendSeries]) -> AlignedPanel:
    """Restrict every series to the trading dates of ``bars`` and build the panel."""
    if len(bars) < 2:
        raise DataError("need at least 2 bars to align")
    bars = tuple(bars)
    first, last = bars[0].date, bars[-1].date
    for tr in trends:
        observed = [d for d, v in zip(tr.dates, tr.values) if not math.isnan(v)]
        if not observed:
            raise DataError(f"trend {tr.keyword!r} has no observations")
        if observed[0] > last or observed[-1] < first:
            raise DataError(f"trend {tr.keyword!r}: no overlap with the bar date range")

    r = log_return(bars)
    raw = gk_raw_series(bars)
    h = np.where(raw < 0, 0.0, raw)
    return_dates = [b.date for b in bars[1:]]
    filled = [_fill_on(tr, return_dates) for tr in trends]

    start = 0
    for col, tr in zip(filled, trends):
        defined = np.flatnonzero(~np.isnan(col))
        if defined.size == 0:
            raise DataError(f"trend {tr.keyword!r} has no observations on or before any trading date")
        start = max(start, int(defined[0]))

    kept_bars = bars[start:]
    dates = tuple(return_dates[start:])
    h_kept = h[start + 1:]
    clamped = int(np.count_nonzero(raw[start + 1:] < 0))
    out_trends = [TrendSeries(tr.keyword, dates, col[start:].copy())
                  for tr, col in zip(trends, filled)]
    return AlignedPanel(dates=dates, r=r[start:].copy(), h=h_kept.copy(),
                        trends=out_trends, bars=kept_bars, gk_clamped=clamped)


def write_ohlc_csv(bars: Sequence[OhlcBar]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OHLC_HEADER)
    for b in bars:
        writer.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low), repr(b.close)])
    return buf.getvalue().encode("utf-8")


def write_trends_csv(trends: Sequence[TrendSeries]) -> bytes:
    if not trends:
        raise DataError("no trend series to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date"] + [t.keyword for t in trends])
    for i, d in enumerate(trends[0].dates):
        cells = ["" if math.isnan(t.values[i]) else repr(float(t.values[i])) for t in trends]
        writer.writerow([d.isoformat()] + cells)
    return buf.getvalue().encode("utf-8")


def serialize_panel(panel: AlignedPanel) -> tuple:
    """Write ``panel`` as the ``(ohlc.csv, trends.csv)`` byte pair accepted by the parsers."""
    return write_ohlc_csv(panel.bars), write_trends_csv(panel.trends)
