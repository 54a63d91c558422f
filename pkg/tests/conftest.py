import numpy as np
import pytest

from volcast import _pykernels, kernels
from volcast.evalcli.synth import SynthConfig, synth_panel
from volcast.marketdata import align

try:
    from volcast import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the kernel entry points through each available implementation."""
    impl = request.param
    for name in ("garch_variance", "garch_loglik", "garch_simulate", "binned_mi"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return impl


@pytest.fixture(scope="session")
def small_panel():
    bars, trends, _ = synth_panel(SynthConfig(n_days=400, n_trends=3, seed=11))
    return align(bars, trends)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
