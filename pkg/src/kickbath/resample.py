"""Resampling of grid functions under a linear change of coordinates.

Both resamplers compute ``g(r) = f(B r)`` on the nodes of a :class:`GridSpec`.

``BilinearResampler`` interpolates each back-traced point from its four
neighbouring nodes.  ``ShearResampler`` factors ``B`` into an exact lattice
permutation, three one-dimensional shears and an isotropic scaling; each
shear is a per-line Fourier phase shift on a zero-padded buffer, and the
scaling applies a periodic-sinc interpolation matrix along each axis.  The
shear route is exact for band-limited functions that vanish near the grid
edge.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, bilinear_sample

__all__ = ["BilinearResampler", "ShearResampler", "make_resampler", "SCHEMES"]

SCHEMES = ("spectral", "bilinear")

_ROTATIONS = {
    0: np.eye(2),
    1: np.array([[0.0, -1.0], [1.0, 0.0]]),
    2: -np.eye(2),
    3: np.array([[0.0, 1.0], [-1.0, 0.0]]),
}


def _fast_odd(n: int) -> int:
    m = sfft.next_fast_len(max(int(n), 1))
    while m % 2 == 0:
        m = sfft.next_fast_len(m + 1)
    return m


def _shear_matrix(axis: str, e: float) -> np.ndarray:
    if axis == "k":
        return np.array([[1.0, e], [0.0, 1.0]])
    return np.array([[1.0, 0.0], [e, 1.0]])


def factor_unimodular(R: np.ndarray, allow_quarter_turns: bool):
    """Write ``R`` (det 1) as ``Q @ S1 @ S2 @ S3`` with the smallest shear factors.

    ``Q`` is a rotation by a multiple of 90 degrees (only 0 and 180 degrees
    unless ``allow_quarter_turns``).  Returns ``(m, [(axis, e), ...])`` where
    ``Q = rot(90*m)``.
    """
    best = None
    # a tiny pivot gives huge (and rejected) factors; overflow there is harmless
    with np.errstate(over="ignore"):
        for m in (0, 1, 2, 3) if allow_quarter_turns else (0, 2):
            Rp = _ROTATIONS[m].T @ R
            candidates = []
            if np.allclose(Rp, np.eye(2), rtol=0.0, atol=1e-15):
                candidates.append([])
            if Rp[1, 0] != 0.0:
                c = Rp[1, 0]
                candidates.append([("k", (Rp[0, 0] - 1.0) / c), ("s", c), ("k", (Rp[1, 1] - 1.0) / c)])
            if Rp[0, 1] != 0.0:
                c = Rp[0, 1]
                candidates.append([("s", (Rp[1, 1] - 1.0) / c), ("k", c), ("s", (Rp[0, 0] - 1.0) / c)])
            for seq in candidates:
                cost = max((abs(e) for _, e in seq), default=0.0)
                if best is None or cost < best[0] - 1e-15:
                    best = (cost, m, seq)
    return best[1], best[2]


def _quarter_turn(a: np.ndarray, m: int) -> np.ndarray:
    """Array of ``f(r) = a(Q r)`` for ``Q = rot(90*m)`` on a symmetric square grid."""
    if m == 0:
        return a
    if m == 2:
        return a[::-1, ::-1]
    if m == 1:  # f(k, s) = a(-s, k)
        return a.T[::-1, :]
    return a.T[:, ::-1]  # f(k, s) = a(s, -k)


def _periodic_sinc_matrix(x_out: np.ndarray, half_in: int) -> np.ndarray:
    """Trigonometric interpolation from nodes ``-half_in..half_in`` to points ``x_out``.

    Node units; the period equals the (odd) number of input nodes.
    """
    P = 2 * half_in + 1
    u = x_out[:, None] - np.arange(-half_in, half_in + 1)[None, :]
    frac = np.mod(u, P)
    at_node = (np.abs(frac) < 1e-12) | (np.abs(frac - P) < 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.sin(np.pi * u) / (P * np.sin(np.pi * u / P))
    D[at_node] = 1.0
    return D


class _LeakCounter:
    """Counts back-traced reads that fall outside the grid where the state is not negligible.

    A read counts when the nearest edge value, times the optional per-node
    ``weight`` of the output it feeds, exceeds ``tol``.
    """

    def __init__(self, grid: GridSpec, k_src: np.ndarray, s_src: np.ndarray, tol: float,
                 weight: np.ndarray | None = None):
        x = k_src / grid.dk + grid.ck
        y = s_src / grid.ds + grid.cs
        eps = 1e-9
        outside = (x < -eps) | (x > grid.nk - 1 + eps) | (y < -eps) | (y > grid.ns - 1 + eps)
        idx = np.nonzero(outside.ravel())[0]
        self.tol = tol
        self.rows = np.clip(np.rint(y.ravel()[idx]), 0, grid.ns - 1).astype(np.intp)
        self.cols = np.clip(np.rint(x.ravel()[idx]), 0, grid.nk - 1).astype(np.intp)
        self.weight = None if weight is None else np.asarray(weight).ravel()[idx]

    @property
    def n_outside(self) -> int:
        return int(self.rows.size)

    def __call__(self, values: np.ndarray) -> int:
        if self.rows.size == 0:
            return 0
        mag = np.abs(values[self.rows, self.cols])
        if self.weight is not None:
            mag = mag * self.weight
        return int(np.count_nonzero(mag > self.tol))


class BilinearResampler:
    """``g(r) = f(B r)`` by bilinear interpolation (zero outside the grid)."""

    def __init__(self, grid: GridSpec, B: np.ndarray, leak_tol: float = 1e-10, weight=None):
        self.grid = grid
        self.B = np.asarray(B, dtype=float)
        K, S = grid.mesh()
        self._k = self.B[0, 0] * K + self.B[0, 1] * S
        self._s = self.B[1, 0] * K + self.B[1, 1] * S
        self._leaks = _LeakCounter(grid, self._k, self._s, leak_tol, weight)

    def __call__(self, values: np.ndarray):
        out, _ = bilinear_sample(values, self.grid, self._k, self._s)
        return out, self._leaks(values)


class ShearResampler:
    """``g(r) = f(B r)`` by shear factorisation with Fourier line shifts.

    ``B`` must have positive determinant.  Values outside the grid are taken
    as zero, exactly like the bilinear scheme.
    """

    #: extra nodes kept around every intermediate support
    margin = 4
    #: guard band separating periodic images in each line transform
    guard = 16

    def __init__(self, grid: GridSpec, B: np.ndarray, leak_tol: float = 1e-10, weight=None):
        self.grid = grid
        self.B = B = np.asarray(B, dtype=float)
        det = float(np.linalg.det(B))
        if not det > 0:
            raise ValueError(f"resampling matrix must have positive determinant, got {det}")
        self.scale = lam = np.sqrt(det)
        R = B / lam
        self.quarter, self.shears = factor_unimodular(R, grid.is_square)

        K, S = grid.mesh()
        self._leaks = _LeakCounter(grid, B[0, 0] * K + B[0, 1] * S, B[1, 0] * K + B[1, 1] * S,
                                   leak_tol, weight)
        self._plan_stages()

    def _plan_stages(self):
        g = self.grid
        dk, ds = g.dk, g.ds
        mats = [_shear_matrix(ax, e) for ax, e in self.shears]
        corners = np.array([[g.k_max, g.k_max, -g.k_max, -g.k_max],
                            [g.s_max, -g.s_max, g.s_max, -g.s_max]])
        n = len(mats)
        needed = [None] * (n + 1)
        needed[n] = self.scale * corners
        for i in range(n - 1, -1, -1):
            needed[i] = mats[i] @ needed[i + 1]
        content = [corners]
        for i in range(n):
            content.append(np.linalg.solve(mats[i], content[i]))
        halves = [(g.ck, g.cs)]
        for i in range(1, n + 1):
            pts = np.hstack([needed[i], content[i]])
            hk = int(np.ceil(np.abs(pts[0]).max() / dk - 1e-9)) + self.margin
            hs = int(np.ceil(np.abs(pts[1]).max() / ds - 1e-9)) + self.margin
            halves.append((hk, hs))

        self._steps = []
        for i, (axis, e) in enumerate(self.shears):
            hk_in, hs_in = halves[i]
            hk_out, hs_out = halves[i + 1]
            if axis == "k":
                lines = np.arange(-hs_out, hs_out + 1)
                shifts = e * lines * ds / dk
                h_in, h_out, h_other_in, h_other_out = hk_in, hk_out, hs_in, hs_out
            else:
                lines = np.arange(-hk_out, hk_out + 1)
                shifts = e * lines * dk / ds
                h_in, h_out, h_other_in, h_other_out = hs_in, hs_out, hk_in, hk_out
            span = max(h_out + np.max(shifts) + h_in, h_in + h_out - np.min(shifts))
            P = _fast_odd(max(int(np.ceil(span)) + 1 + self.guard, 2 * h_in + 1))
            nu = sfft.fftfreq(P)
            phase = np.exp(2j * np.pi * np.outer(shifts, nu))
            # input node x sits at buffer (x + h_in); output node x reads buffer (x + h_in) mod P
            take = np.mod(np.arange(-h_out, h_out + 1) + h_in, P)
            self._steps.append(dict(axis=axis, P=P, phase=phase, take=take,
                                    h_other_in=h_other_in, h_other_out=h_other_out))

        hk, hs = halves[-1]
        lam = self.scale
        if lam == 1.0 and hk == g.ck and hs == g.cs:
            self._scale_k = self._scale_s = None
        else:
            self._scale_k = _periodic_sinc_matrix(lam * np.arange(-g.ck, g.ck + 1), hk)
            self._scale_s = _periodic_sinc_matrix(lam * np.arange(-g.cs, g.cs + 1), hs)

    @staticmethod
    def _resize(f: np.ndarray, axis: int, h: int, new_h: int) -> np.ndarray:
        if new_h == h:
            return f
        if new_h < h:
            index = [slice(None), slice(None)]
            index[axis] = slice(h - new_h, h + new_h + 1)
            return f[tuple(index)]
        pad = [(0, 0), (0, 0)]
        pad[axis] = (new_h - h, new_h - h)
        return np.pad(f, pad)

    def __call__(self, values: np.ndarray):
        leaks = self._leaks(values)
        f = _quarter_turn(values, self.quarter)
        for st in self._steps:
            if st["axis"] == "k":
                f = self._resize(f, 0, st["h_other_in"], st["h_other_out"])
                F = sfft.fft(f, n=st["P"], axis=1)
                F *= st["phase"]
                f = np.take(sfft.ifft(F, axis=1, overwrite_x=True), st["take"], axis=1)
            else:
                f = self._resize(f, 1, st["h_other_in"], st["h_other_out"])
                F = sfft.fft(f, n=st["P"], axis=0)
                F *= st["phase"].T
                f = np.take(sfft.ifft(F, axis=0, overwrite_x=True), st["take"], axis=0)
        if self._scale_k is not None:
            f = self._scale_s @ f @ self._scale_k.T
        else:
            f = np.array(f, copy=True)
        return f, leaks


def make_resampler(scheme: str, grid: GridSpec, B: np.ndarray, leak_tol: float = 1e-10,
                   weight: np.ndarray | None = None):
    if scheme == "spectral":
        return ShearResampler(grid, B, leak_tol, weight)
    if scheme == "bilinear":
        return BilinearResampler(grid, B, leak_tol, weight)
    raise ValueError(f"unknown interpolation scheme {scheme!r}; expected one of {SCHEMES}")
