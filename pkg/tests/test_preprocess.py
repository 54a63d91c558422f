import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from volcast.errors import ConfigError, DataError, NumericalError
from volcast.marketdata import AlignedPanel, OhlcBar, TrendSeries, log_return
from volcast.preprocess import (Scheme, adf_test, aggregate_returns, aggregate_trend,
                                aggregate_vol, build_scheme_dataset, rolling_normalize)


def make_panel(r, h, trends=()):
    n = len(r)
    dates = tuple(date(2010, 1, 1) + timedelta(days=i) for i in range(n))
    ts = [TrendSeries(f"t{j}", dates, np.asarray(v, dtype=float)) for j, v in enumerate(trends)]
    return AlignedPanel(dates, np.asarray(r, dtype=float), np.asarray(h, dtype=float), ts, bars=())


def test_scheme_validation():
    with pytest.raises(ConfigError):
        Scheme(0, 5)
    with pytest.raises(ConfigError):
        Scheme(5, 1)


def test_aggregate_examples():
    a, b, c, d = 0.1, -0.2, 0.3, 0.05
    np.testing.assert_allclose(aggregate_returns([a, b, c, d], 2), [a + b, c + d])
    np.testing.assert_array_equal(aggregate_returns([1, 2, 3], 2), [3])
    np.testing.assert_array_equal(aggregate_trend([2, 4], 2), [3])
    np.testing.assert_array_equal(aggregate_trend([1, 1, 1, 7], 2), [1, 4])
    np.testing.assert_array_equal(aggregate_vol([3, 4], 2), [5])
    np.testing.assert_array_equal(aggregate_vol([0, 0], 2), [0])


# squares of values below ~1e-154 underflow, so the domain stays above that
@given(arrays(np.float64, st.integers(1, 40), elements=st.just(0.0) | st.floats(1e-150, 10)))
def test_aggregate_identity_at_one(z):
    np.testing.assert_array_equal(aggregate_returns(z, 1), z)
    np.testing.assert_array_equal(aggregate_trend(z, 1), z)
    np.testing.assert_array_equal(aggregate_vol(z, 1), z)


def test_aggregate_too_long():
    with pytest.raises(DataError):
        aggregate_returns([1.0, 2.0], 3)


@given(st.lists(st.floats(0.8, 1.25), min_size=10, max_size=80), st.integers(1, 7))
def test_aggregated_returns_telescope(factors, dt):
    closes = np.cumprod([50.0] + factors)
    bars = [OhlcBar(date(2010, 1, 1) + timedelta(days=i), c, c, c, c) for i, c in enumerate(closes)]
    agg = aggregate_returns(log_return(bars), dt)
    for i, v in enumerate(agg):
        assert abs(v - math.log(closes[(i + 1) * dt] / closes[i * dt])) <= 1e-10


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0, 5)), st.floats(0, 5))
def test_aggregate_vol_monotone(h, extra):
    base = aggregate_vol(h, len(h))[0]
    more = aggregate_vol(np.append(h, extra), len(h) + 1)[0]
    assert base >= 0 and more >= base


def test_rolling_normalize_examples():
    out = rolling_normalize([0, 0, 0, 1], 3)
    assert out.values.tolist() == [1.5]
    const = rolling_normalize(np.full(10, 3.0), 4)
    assert np.all(const.values == 0) and np.all(const.degenerate)
    for k in (2, 3, 7):
        ramp = rolling_normalize(np.arange(30.0), k).values
        np.testing.assert_allclose(ramp, ramp[0], rtol=1e-12)
        assert ramp.shape == (30 - k,)


def test_rolling_normalize_too_short():
    with pytest.raises(DataError):
        rolling_normalize([1.0, 2.0, 3.0], 3)


@given(arrays(np.float64, 25, elements=st.floats(-100, 100)), st.floats(0.01, 100), st.floats(-1e3, 1e3),
       st.integers(2, 10))
def test_rolling_normalize_affine_invariance(z, a, b, k):
    base = rolling_normalize(z, k)
    moved = rolling_normalize(a * z + b, k)
    # a*z+b is rounded at ~eps*|a*z+b|; compare only windows whose spread dwarfs that
    scale = np.abs(b) + a * np.abs(z).max() + 1e-300
    ok = ~base.degenerate & ~moved.degenerate & (a * base.std > 1e-5 * scale)
    np.testing.assert_allclose(moved.values[ok], base.values[ok], atol=1e-9, rtol=0)


def test_dataset_shape():
    rng = np.random.default_rng(0)
    panel = make_panel(rng.normal(size=10), rng.uniform(1, 2, 10), [rng.uniform(1, 2, 10)] * 3)
    ds = build_scheme_dataset(panel, Scheme(1, 2))
    assert len(ds) == 7
    assert ds.features.shape == (7, 3 + 2)
    assert ds.columns == ("r", "h", "t0", "t1", "t2")


@pytest.mark.parametrize("dt, k", [(1, 2), (5, 5), (3, 4), (2, 7)])
def test_dataset_length_formula(dt, k):
    D = 200
    rng = np.random.default_rng(dt * 10 + k)
    panel = make_panel(rng.normal(size=D), rng.uniform(1, 2, D), [rng.uniform(1, 2, D)])
    assert len(build_scheme_dataset(panel, Scheme(dt, k))) == D // dt - k - 1


def test_dataset_too_short():
    panel = make_panel(np.zeros(6), np.ones(6))
    with pytest.raises(DataError):
        build_scheme_dataset(panel, Scheme(2, 2))


def test_target_is_next_period():
    D = 60
    h = np.linspace(1.0, 3.0, D)
    panel = make_panel(np.random.default_rng(1).normal(size=D), h)
    for dt, k in [(1, 3), (3, 2), (5, 5)]:
        ds = build_scheme_dataset(panel, Scheme(dt, k))
        h_agg = aggregate_vol(h, dt)
        assert np.all(ds.raw_target > h_agg[ds.periods])
        np.testing.assert_array_equal(ds.raw_target, h_agg[ds.periods + 1])


def test_target_denormalizes(small_panel):
    for scheme in (Scheme(1, 2), Scheme(5, 5), Scheme(3, 9)):
        ds = build_scheme_dataset(small_panel, scheme)
        assert np.all(ds.norm_std > 0)
        np.testing.assert_allclose(ds.denormalize(ds.target), ds.raw_target, atol=1e-9, rtol=0)


@pytest.mark.parametrize("dt, k", [(1, 2), (5, 5), (2, 6)])
def test_dataset_causality_poison(small_panel, dt, k):
    base = build_scheme_dataset(small_panel, Scheme(dt, k))
    for j in (0, len(base) // 2, len(base) - 2):
        cut = (int(base.periods[j]) + 1) * dt  # first day after row j's period
        trends = [np.array(t.values) for t in small_panel.trends]
        r, h = small_panel.r.copy(), small_panel.h.copy()
        r[cut:] = np.nan
        h[cut:] = np.nan
        for t in trends:
            t[cut:] = np.nan
        poisoned = build_scheme_dataset(make_panel(r, h, trends), Scheme(dt, k))
        np.testing.assert_array_equal(poisoned.features[: j + 1], base.features[: j + 1])
        np.testing.assert_array_equal(poisoned.norm_mean[: j + 1], base.norm_mean[: j + 1])
        np.testing.assert_array_equal(poisoned.norm_std[: j + 1], base.norm_std[: j + 1])


def test_dataset_csv(small_panel):
    ds = build_scheme_dataset(small_panel, Scheme(5, 5))
    lines = ds.to_csv().decode().splitlines()
    assert lines[0].split(",")[-4:] == ["target", "raw_target", "norm_mean", "norm_std"]
    assert len(lines) == len(ds) + 1


def test_adf_matches_statsmodels(rng):
    from statsmodels.tsa.stattools import adfuller

    for z in (np.cumsum(rng.normal(size=500)), rng.normal(size=500),
              np.convolve(rng.normal(size=520), [1, 0.6, 0.3])[:500]):
        for lags in (0, 1, 5):
            rep = adf_test(z, lags)
            ref = adfuller(z, maxlag=lags, regression="c", autolag=None)[0]
            assert rep.adf_statistic == pytest.approx(ref, rel=1e-9)
            assert rep.reject_unit_root_5pct == (rep.adf_statistic < -2.86)


def test_adf_constant_is_singular():
    with pytest.raises(NumericalError, match="singular"):
        adf_test(np.full(100, 2.0), 5)


def test_adf_too_short():
    with pytest.raises(DataError):
        adf_test(np.arange(12.0), 5)
