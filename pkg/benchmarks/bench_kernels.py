#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-python fallback.

Times the two hot primitives on sizes representative of the pipeline
(person-period designs of a few tens of thousands of rows) plus one
end-to-end penalized logistic path per backend.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from survhte._kernels import _fallback

try:
    from survhte._kernels import _core
except ImportError:
    _core = None


def time_call(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_enet_cd(impl, n, p, seed=0):
    rng = np.random.default_rng(seed)
    x = np.asfortranarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[: p // 3] = rng.standard_normal(p // 3)
    z = x @ beta + rng.standard_normal(n)
    w = np.full(n, 0.25)
    col_ss = w @ (x * x)

    def run():
        coef = np.zeros(p)
        b0 = np.zeros(1)
        resid = z.copy()
        impl.enet_cd(x, w, resid, coef, b0, col_ss, n * 0.01, n * 0.005,
                     200, 1e-8)

    return time_call(run)


def bench_best_split(impl, n, seed=0):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.random(n))
    y = 2.0 * (x > 0.4) + rng.standard_normal(n)
    order = np.argsort(x, kind="stable")

    def run():
        impl.best_split(x, y, order, 10)

    return time_call(run, repeats=20)


def bench_logistic_path(backend_env, n=20000, p=23, seed=1):
    import os
    import subprocess
    import sys

    code = (
        "import numpy as np, time\n"
        "from survhte.learners.linear import ElasticNetLogistic\n"
        f"rng = np.random.default_rng({seed})\n"
        f"x = rng.random(({n}, {p}))\n"
        "eta = -2.0 + 2.0 * x[:, 0] - 1.5 * x[:, 1]\n"
        "y = (rng.random(len(x)) < 1/(1+np.exp(-eta))).astype(float)\n"
        "t0 = time.perf_counter()\n"
        "ElasticNetLogistic(cv_folds=5).fit(x, y, rng=rng)\n"
        "print(time.perf_counter() - t0)\n"
    )
    env = dict(os.environ, SURVHTE_PURE_PYTHON=backend_env)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    if _core is None:
        print("compiled kernels not built; showing fallback only")
    rows = []
    for n, p in ((5000, 12), (20000, 23), (60000, 23)):
        fb = bench_enet_cd(_fallback, n, p)
        cc = bench_enet_cd(_core, n, p) if _core else float("nan")
        rows.append((f"enet_cd n={n} p={p}", cc, fb))
    for n in (2000, 20000):
        fb = bench_best_split(_fallback, n)
        cc = bench_best_split(_core, n) if _core else float("nan")
        rows.append((f"best_split n={n}", cc, fb))
    print(f"{'kernel':28s} {'compiled':>10s} {'fallback':>10s} {'speedup':>8s}")
    for name, cc, fb in rows:
        ratio = fb / cc if cc == cc and cc > 0 else float("nan")
        print(f"{name:28s} {cc * 1e3:9.2f}ms {fb * 1e3:9.2f}ms {ratio:7.1f}x")
    if _core is not None:
        print("\nend-to-end penalized logistic fit (subprocess per backend):")
        t_compiled = bench_logistic_path("0")
        t_fallback = bench_logistic_path("1")
        print(f"{'logistic path 20k x 23':28s} {t_compiled * 1e3:9.0f}ms "
              f"{t_fallback * 1e3:9.0f}ms {t_fallback / t_compiled:7.1f}x")


if __name__ == "__main__":
    main()
