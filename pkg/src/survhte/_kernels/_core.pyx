# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback``; contracts are identical."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, fabs, sqrt

cnp.import_array()


def enet_cd(double[::1, :] x, double[::1] w, double[::1] resid,
            double[::1] coef, double[::1] intercept, double[::1] col_ss,
            double l1, double l2, int max_sweeps, double tol):
    """See ``survhte._kernels._fallback.enet_cd``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t i, j, sweep
    cdef double sum_w = 0.0
    cdef double max_move, d0, acc, rho, ss, b_old, b_new, delta, move
    cdef int sweeps = 0

    for i in range(n):
        sum_w += w[i]
    if sum_w <= 0.0:
        return 0

    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        acc = 0.0
        for i in range(n):
            acc += w[i] * resid[i]
        d0 = acc / sum_w
        intercept[0] += d0
        for i in range(n):
            resid[i] -= d0
        max_move = fabs(d0)
        for j in range(p):
            ss = col_ss[j]
            if ss <= 0.0:
                continue
            b_old = coef[j]
            acc = 0.0
            for i in range(n):
                acc += w[i] * x[i, j] * resid[i]
            rho = acc + ss * b_old
            if rho > l1:
                b_new = (rho - l1) / (ss + l2)
            elif rho < -l1:
                b_new = (rho + l1) / (ss + l2)
            else:
                b_new = 0.0
            if b_new != b_old:
                delta = b_new - b_old
                for i in range(n):
                    resid[i] -= delta * x[i, j]
                coef[j] = b_new
                move = fabs(delta) * sqrt(ss / sum_w)
                if move > max_move:
                    max_move = move
        if max_move < tol:
            break
    return sweeps


def best_split(double[::1] xcol, double[::1] y, cnp.intp_t[::1] order,
               int min_leaf):
    """See ``survhte._kernels._fallback.best_split``."""
    cdef Py_ssize_t n = xcol.shape[0]
    cdef Py_ssize_t k, idx, nxt
    cdef double total = 0.0
    cdef double s_left = 0.0
    cdef double n_left, gain, base, best_gain, best_thr, xk, xk1
    cdef Py_ssize_t best_k = -1

    if n < 2 * min_leaf:
        return (NAN, -INFINITY, 0)
    for k in range(n):
        total += y[order[k]]
    base = total * total / n
    best_gain = -INFINITY
    best_thr = NAN
    for k in range(n - 1):
        s_left += y[order[k]]
        n_left = k + 1
        if n_left < min_leaf or n_left > n - min_leaf:
            continue
        xk = xcol[order[k]]
        xk1 = xcol[order[k + 1]]
        if xk >= xk1:
            continue
        gain = s_left * s_left / n_left \
            + (total - s_left) * (total - s_left) / (n - n_left) - base
        if gain > best_gain:
            best_gain = gain
            best_thr = 0.5 * (xk + xk1)
            best_k = k
    if best_k < 0:
        return (NAN, -INFINITY, 0)
    return (best_thr, best_gain, int(best_k + 1))
