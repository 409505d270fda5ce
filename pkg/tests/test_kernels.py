"""Parity between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

from survhte._kernels import _fallback, backend_name

try:
    from survhte._kernels import _core
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

pytestmark = pytest.mark.skipif(not HAVE_COMPILED,
                                reason="compiled kernels unavailable")


def _cd_problem(seed, n=400, p=9):
    rng = np.random.default_rng(seed)
    x = np.asfortranarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:3] = (2.0, -1.0, 0.5)
    z = x @ beta + 0.3 * rng.standard_normal(n)
    w = np.abs(rng.standard_normal(n)) + 0.05
    return x, z, w


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("l1,l2", [(0.0, 0.0), (20.0, 0.0), (15.0, 30.0)])
def test_enet_cd_backends_agree(seed, l1, l2):
    x, z, w = _cd_problem(seed)
    col_ss = w @ (x * x)
    results = []
    for impl in (_core, _fallback):
        coef = np.zeros(x.shape[1])
        b0 = np.zeros(1)
        resid = z.copy()
        impl.enet_cd(x, w, resid, coef, b0, col_ss.copy(), l1, l2, 1000, 1e-12)
        results.append((b0[0], coef.copy(), resid.copy()))
    np.testing.assert_allclose(results[0][0], results[1][0], rtol=1e-10)
    np.testing.assert_allclose(results[0][1], results[1][1], rtol=1e-9,
                               atol=1e-12)
    np.testing.assert_allclose(results[0][2], results[1][2], rtol=1e-8,
                               atol=1e-10)


def test_enet_cd_solves_lasso_kkt():
    x, z, w = _cd_problem(7)
    l1 = 25.0
    coef = np.zeros(x.shape[1])
    b0 = np.zeros(1)
    resid = z.copy()
    _core.enet_cd(x, w, resid, coef, b0, w @ (x * x), l1, 0.0, 5000, 1e-13)
    grad = (w * x.T) @ resid  # stationarity: |grad_j| <= l1, equality if active
    active = coef != 0
    np.testing.assert_allclose(np.abs(grad[active]), l1, rtol=1e-6)
    assert (np.abs(grad[~active]) <= l1 + 1e-6).all()


@pytest.mark.parametrize("seed", range(4))
def test_best_split_backends_agree(seed):
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.random(257))
    y = 2.0 * (x > 0.37) + rng.standard_normal(257) * 0.2
    order = np.argsort(x, kind="stable")
    got_c = _core.best_split(x, y, order, 7)
    got_f = _fallback.best_split(x, y, order, 7)
    assert got_c[2] == got_f[2]
    np.testing.assert_allclose(got_c[:2], got_f[:2], rtol=1e-10)


def test_best_split_finds_known_threshold():
    x = np.linspace(0, 1, 200)
    y = np.where(x <= 0.5, 0.0, 4.0)
    order = np.argsort(x, kind="stable")
    thr, gain, n_left = _core.best_split(x, y, order, 5)
    assert abs(thr - 0.5) < 0.01
    assert n_left == 100
    assert gain > 0


def test_best_split_degenerate_cases():
    x = np.ones(50)
    y = np.arange(50, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    thr, gain, n_left = _core.best_split(x, y, order, 5)
    assert np.isnan(thr) and gain == -np.inf and n_left == 0
    thr, gain, n_left = _core.best_split(x[:6], y[:6], order[:6].copy(), 5)
    assert gain == -np.inf


def test_backend_name_reports():
    assert backend_name() in ("compiled", "fallback")
