"""Integer-order Bessel functions of the first kind by Miller's downward recurrence."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["bessel_j_table", "bessel_j"]

_BIG = 1e250
# below this the two leading series terms are exact in double precision and the
# recurrence ratio 2n/x would overflow in a single step
_SMALL = 1e-6


def _start_order(L: int, zmax: float) -> int:
    m = max(L, zmax)
    n = int(m + 20 + math.ceil(math.sqrt(60.0 * (m + 1.0))))
    return n + (n % 2)  # even start keeps the normalisation sum aligned


def bessel_j_table(L: int, z) -> np.ndarray:
    """``J_0(z) .. J_L(z)`` for every entry of ``z``; shape ``(L + 1,) + z.shape``.

    Downward recurrence from a start order well above ``max(L, |z|)``, normalised
    with ``J_0 + 2 * sum_k J_2k = 1``; tiny arguments use the power series.  Negative arguments use
    ``J_l(-z) = (-1)^l J_l(z)``.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    z = np.asarray(z, dtype=float)
    shape = z.shape
    x = np.abs(z).ravel()
    out = np.zeros((L + 1, x.size))
    small = x < _SMALL
    if np.any(small):
        h = 0.5 * x[small]
        term = np.ones_like(h)
        for l in range(L + 1):
            out[l, small] = term * (1.0 - h * h / (l + 1))
            term = term * h / (l + 1)
    live = ~small
    if np.any(live):
        xl = x[live]
        N = _start_order(L, float(xl.max()))
        two_over_x = 2.0 / xl
        b_next = np.zeros_like(xl)  # J_{n+1}
        b = np.full_like(xl, 1e-300)  # J_n
        norm = np.zeros_like(xl)
        vals = np.zeros((L + 1, xl.size))
        for n in range(N, 0, -1):
            b_prev = n * two_over_x * b - b_next
            b_next, b = b, b_prev
            # b now holds J_{n-1}, b_next J_n
            if n - 1 <= L:
                vals[n - 1] = b
            if (n - 1) % 2 == 0 and n - 1 > 0:
                norm += 2.0 * b
            big = np.abs(b) > _BIG
            if np.any(big):
                s = 1.0 / _BIG
                b[big] *= s
                b_next[big] *= s
                norm[big] *= s
                vals[:, big] *= s
        norm += b  # J_0 term
        out[:, live] = vals / norm
    if np.any(z.ravel() < 0):
        odd = np.arange(L + 1) % 2 == 1
        neg = z.ravel() < 0
        out[np.ix_(odd, neg)] *= -1.0
    return out.reshape((L + 1,) + shape)


def bessel_j(l: int, z):
    """``J_l(z)`` for integer ``l`` (negative orders via ``J_{-l} = (-1)^l J_l``)."""
    table = bessel_j_table(abs(l), z)
    v = table[abs(l)]
    if l < 0 and l % 2:
        v = -v
    return v if np.ndim(v) else float(v)
