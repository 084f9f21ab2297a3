"""Bessel functions J0 and J1 of real argument.

Three regimes: the ascending series for ``|x| <= 8``, Miller's backward
recurrence normalised by ``J0 + 2 sum J_2k = 1`` for ``8 < |x| < 25`` and
Hankel's asymptotic expansion beyond. Absolute accuracy is about 1e-15.
"""
from __future__ import annotations

import math

import numpy as np

SERIES_LIMIT = 8.0
ASYMPTOTIC_LIMIT = 25.0


def _series(x, order):
    h = 0.5 * x
    term = h ** order / math.factorial(order)
    total = term.copy()
    q = -h * h
    for k in range(1, 60):
        term = term * q / (k * (k + order))
        total += term
        if np.all(np.abs(term) < 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _miller(x):
    """J0 and J1 by downward recurrence from an order well above ``x``."""
    start = 2 * (int(x.max() + 30 + 3 * np.sqrt(x.max())) // 2)
    j_next = np.zeros_like(x)          # J_{k+1}
    j_cur = np.full_like(x, 1e-300)    # J_k
    norm = np.zeros_like(x)
    j0 = j1 = None
    for k in range(start, 0, -1):
        j_prev = 2 * k / x * j_cur - j_next   # J_{k-1}
        j_next, j_cur = j_cur, j_prev
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2 * j_cur
        big = np.abs(j_cur) > 1e250
        if big.any():
            scale = np.where(big, 1e-250, 1.0)
            j_cur *= scale
            j_next *= scale
            norm *= scale
        if k == 1:
            j0, j1 = j_cur, j_next
    norm += j0
    return j0 / norm, j1 / norm


def _hankel(x, order):
    mu = 4.0 * order * order
    z = 8.0 * x
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    k = 1
    # a_k = prod_{j<=k} (mu - (2j-1)^2) / (k! (8x)^k); stop when terms start growing
    prev = np.inf
    while k < 80:
        term = term * (mu - (2 * k - 1) ** 2) / (k * z)
        size = float(np.max(np.abs(term)))
        if size > prev or size < 1e-17:
            break
        prev = size
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
        k += 1
    chi = x - (0.5 * order + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _evaluate(x, order):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax <= SERIES_LIMIT
    large = ax >= ASYMPTOTIC_LIMIT
    mid = ~small & ~large
    if small.any():
        out[small] = _series(ax[small], order)
    if mid.any():
        j0, j1 = _miller(ax[mid])
        out[mid] = j0 if order == 0 else j1
    if large.any():
        out[large] = _hankel(ax[large], order)
    if order == 1:
        out = np.where(x < 0, -out, out)
    return out


def j0(x):
    """Bessel function of the first kind, order zero."""
    return _evaluate(x, 0)


def j1(x):
    """Bessel function of the first kind, order one."""
    return _evaluate(x, 1)
