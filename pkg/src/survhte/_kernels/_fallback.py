"""Pure-numpy implementations of the hot kernels.

Contracts must match ``_core.pyx`` exactly; the parity test suite runs
both backends on the same inputs.
"""

import numpy as np


def enet_cd(x, w, resid, coef, intercept, col_ss, l1, l2, max_sweeps, tol):
    """Cyclic coordinate descent for elastic-net penalized weighted least squares.

    Minimizes 0.5*sum_i w_i*(z_i - b0 - x_i.b)^2 + l1*|b|_1 + 0.5*l2*|b|_2^2
    where the caller maintains resid = z - b0 - x.b. ``coef``, ``resid`` and
    the one-element ``intercept`` array are updated in place. ``x`` must be
    Fortran-ordered so column access is contiguous.

    col_ss[j] must hold sum_i w_i * x_ij**2. Convergence is declared when the
    largest scaled coefficient move max_j |delta_j|*sqrt(col_ss[j]/sum_w)
    drops below ``tol``. Returns the number of sweeps performed.
    """
    n, p = x.shape
    sum_w = float(w.sum())
    if sum_w <= 0.0:
        return 0
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_move = 0.0
        # intercept (unpenalized)
        d0 = float(w @ resid) / sum_w
        intercept[0] += d0
        resid -= d0
        max_move = abs(d0)
        for j in range(p):
            ss = col_ss[j]
            if ss <= 0.0:
                continue
            b_old = coef[j]
            rho = float((w * x[:, j]) @ resid) + ss * b_old
            # soft threshold
            if rho > l1:
                b_new = (rho - l1) / (ss + l2)
            elif rho < -l1:
                b_new = (rho + l1) / (ss + l2)
            else:
                b_new = 0.0
            if b_new != b_old:
                delta = b_new - b_old
                resid -= delta * x[:, j]
                coef[j] = b_new
                move = abs(delta) * np.sqrt(ss / sum_w)
                if move > max_move:
                    max_move = move
        if max_move < tol:
            break
    return sweeps


def best_split(xcol, y, order, min_leaf):
    """Best SSE-reducing split of one feature column.

    ``order`` indexes xcol ascending. Candidate splits fall between distinct
    consecutive values with at least ``min_leaf`` rows on each side. Returns
    (threshold, gain, n_left) where gain = sL^2/nL + sR^2/nR - s^2/n, or
    (nan, -inf, 0) when no valid split exists. Threshold is the midpoint of
    the adjacent values; rows with value <= threshold go left.
    """
    n = xcol.shape[0]
    if n < 2 * min_leaf:
        return (np.nan, -np.inf, 0)
    xs = xcol[order]
    ys = y[order]
    csum = np.cumsum(ys)
    total = csum[-1]
    n_left = np.arange(1, n, dtype=np.float64)
    s_left = csum[:-1]
    gains = s_left * s_left / n_left + (total - s_left) ** 2 / (n - n_left) \
        - total * total / n
    valid = (xs[:-1] < xs[1:]) \
        & (n_left >= min_leaf) & (n_left <= n - min_leaf)
    if not valid.any():
        return (np.nan, -np.inf, 0)
    gains = np.where(valid, gains, -np.inf)
    k = int(np.argmax(gains))
    thr = 0.5 * (xs[k] + xs[k + 1])
    return (float(thr), float(gains[k]), k + 1)
