import numpy as np
import pytest

from volcast import _pykernels, kernels

ck = pytest.importorskip("volcast._ckernels", reason="compiled extension not built")


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("contemporaneous", [False, True])
def test_garch_variance_agrees(rng, contemporaneous):
    r = rng.normal(0, 0.02, 3000)
    args = (r, 1e-5, 0.07, 0.9, 4e-4, contemporaneous)
    np.testing.assert_allclose(ck.garch_variance(*args), _pykernels.garch_variance(*args),
                               rtol=1e-12, atol=0)
    assert ck.garch_loglik(*args) == pytest.approx(_pykernels.garch_loglik(*args), rel=1e-12)


def test_garch_loglik_nonpositive_variance():
    r = np.array([0.1, 0.2])
    assert ck.garch_loglik(r, 0.1, 0.1, 0.1, 0.0) == -np.inf
    assert _pykernels.garch_loglik(r, 0.1, 0.1, 0.1, 0.0) == -np.inf


def test_garch_simulate_agrees(rng):
    z = rng.standard_normal(2000)
    for a, b in zip(ck.garch_simulate(z, 0.05, 0.1, 0.85, 1.0),
                    _pykernels.garch_simulate(z, 0.05, 0.1, 0.85, 1.0)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)


@pytest.mark.parametrize("n_bins", [1, 2, 10, 100])
def test_binned_mi_agrees(rng, n_bins):
    x = rng.normal(size=5000)
    y = x**2 + rng.normal(size=5000)
    assert ck.binned_mi(x, y, n_bins) == pytest.approx(_pykernels.binned_mi(x, y, n_bins),
                                                       rel=1e-12, abs=1e-15)


def test_binned_mi_constant_axis():
    x = np.full(10, 2.0)
    y = np.arange(10.0)
    assert ck.binned_mi(x, y, 5) == pytest.approx(0.0, abs=1e-15)
    assert _pykernels.binned_mi(x, y, 5) == pytest.approx(0.0, abs=1e-15)
