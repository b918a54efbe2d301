"""Compare the numba kernels against their numpy fallbacks.

Run ``python3 benchmarks/bench_kernels.py``. The whole-solver row re-runs
in a subprocess with ``STEERKIT_DISABLE_NUMBA=1`` so the fallback is also
exercised end to end.
"""
import os
import subprocess
import sys
import timeit

import numpy as np

from steerkit import families, measure
from steerkit.learn import _smo, svm
from steerkit.sdp import _kernels, steering


def best(fn, number=3, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_marginal_gram(m):
    tab = steering.enumerate_strategies(m)
    g = np.random.default_rng(0).standard_normal((tab.n, 9, 9))
    _kernels.marginal_gram(tab.rows, g, 3 * m, use_numba=True)  # compile
    a = np.asarray(_kernels.marginal_gram(tab.rows, g, 3 * m, use_numba=True))
    b = _kernels.marginal_gram(tab.rows, g, 3 * m, use_numba=False)
    assert np.allclose(a, b)
    t_nb = best(lambda: _kernels.marginal_gram(tab.rows, g, 3 * m, use_numba=True))
    t_np = best(lambda: _kernels.marginal_gram(tab.rows, g, 3 * m, use_numba=False))
    return t_nb, t_np


def bench_smo(n):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((n, 16))
    y = np.where(X[:, 0] * X[:, 1] + 0.3 * rng.standard_normal(n) > 0, 1.0, -1.0)
    K = svm.rbf_kernel(X, X, 0.1)
    _smo.smo(K, y, 4.0, use_numba=True)
    t_nb = best(lambda: _smo.smo(K, y, 4.0, use_numba=True), number=1, repeat=3)
    t_np = best(lambda: _smo.smo(K, y, 4.0, use_numba=False), number=1, repeat=3)
    return t_nb, t_np


SOLVE_SNIPPET = """
import timeit
from steerkit import families, measure
from steerkit.sdp import steering
rng = families.make_rng(0)
sig = measure.build_assemblage(families.isotropic(0.5), measure.random_spin_measurements(rng, {m}))
steering.lhs_feasibility(sig, early_stop=False)
print(min(timeit.repeat(lambda: steering.lhs_feasibility(sig, early_stop=False), number=1, repeat=3)))
"""


def bench_solve(m, disable):
    env = dict(os.environ, STEERKIT_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(m=m)], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for m in (3, 5, 7):
        t_nb, t_np = bench_marginal_gram(m)
        print(f"{'marginal_gram m=' + str(m):<28}{t_nb:>12.2e}{t_np:>12.2e}{t_np / t_nb:>10.1f}")
    for n in (400, 1200):
        t_nb, t_np = bench_smo(n)
        print(f"{'smo n=' + str(n):<28}{t_nb:>12.2e}{t_np:>12.2e}{t_np / t_nb:>10.1f}")
    for m in (3, 5):
        t_nb, t_np = bench_solve(m, False), bench_solve(m, True)
        print(f"{'lhs_feasibility m=' + str(m):<28}{t_nb:>12.2e}{t_np:>12.2e}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
