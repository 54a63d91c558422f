"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table shows
the best-of-N wall time and the speed-up. Results are checked for agreement
before timing.
"""

import argparse
import sys
import timeit

import numpy as np

from volcast import _pykernels, garchbench, kernels

try:
    from volcast import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    r = rng.normal(0.0, 0.02, 2000)
    z = rng.standard_normal(2500)
    x = rng.normal(size=2000)
    y = x**2 + rng.normal(size=2000)
    return {
        "garch_variance (T=2000)": ("garch_variance", (r, 1e-5, 0.08, 0.9, 4e-4, False)),
        "garch_variance contemporaneous": ("garch_variance", (r, 1e-5, 0.08, 0.9, 4e-4, True)),
        "garch_loglik (T=2000)": ("garch_loglik", (r, 1e-5, 0.08, 0.9, 4e-4, False)),
        "garch_simulate (T=2500)": ("garch_simulate", (z, 0.05, 0.1, 0.85, 1.0)),
        "binned_mi (T=2000, N=100)": ("binned_mi", (x, y, 100)),
    }


def best_time(func, args, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(lambda: func(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: func(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':<34}{'cython':>12}{'python':>12}{'speed-up':>10}")
    for label, (name, fargs) in cases(rng).items():
        fast, slow = getattr(_ckernels, name), getattr(_pykernels, name)
        a, b = fast(*fargs), slow(*fargs)
        np.testing.assert_allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-10)
        tc, tp = best_time(fast, fargs, args.repeat), best_time(slow, fargs, args.repeat)
        print(f"{label:<34}{tc * 1e6:>10.1f}us{tp * 1e6:>10.1f}us{tp / tc:>9.1f}x")

    # whole-estimator view: fit_garch dispatches through volcast.kernels
    returns = garchbench.simulate_garch(garchbench.GarchParams(0.05, 0.1, 0.85), 2000, 0)
    times = {}
    for impl in (_ckernels, _pykernels):
        kernels.garch_loglik = impl.garch_loglik
        times[impl] = min(timeit.repeat(lambda: garchbench.fit_garch(returns), number=1,
                                        repeat=max(1, args.repeat // 2)))
    tc, tp = times[_ckernels], times[_pykernels]
    print(f"{'fit_garch (T=2000, 3 starts)':<34}{tc * 1e3:>10.1f}ms{tp * 1e3:>10.1f}ms{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
