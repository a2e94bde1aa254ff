"""Instantaneous cosine kick applied to a chord function.

The kick unitary ``exp(-i a cos(sqrt(2) eta x))`` acts on the chord function
as a superposition of copies shifted along ``k``:

    w'(k, s) = sum_l A_l(s) w(k - sqrt(2) eta l, s),
    A_l(s) = (-1)^l J_l(Z sin(eta s / sqrt(2))),   Z = sqrt(2) kappa / eta^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from sklearn.base import BaseEstimator, TransformerMixin

from .bessel import bessel_j_table
from .grid import ChordState, GridSpec
from .model import ModelParams, check_params
from .validation import check_state

__all__ = [
    "KickPlan",
    "kick_coefficient",
    "kick_coefficients",
    "truncation_order",
    "build_kick_plan",
    "apply_kick",
    "KickMap",
]


def _bessel_argument(s, params: ModelParams):
    Z = math.sqrt(2.0) * params.kappa / params.eta2
    return Z * np.sin(params.eta * np.asarray(s, dtype=float) / math.sqrt(2.0))


def kick_coefficients(L: int, s, params: ModelParams) -> np.ndarray:
    """Table of ``A_l(s)`` for ``l = -L..L``; shape ``(2L + 1,) + s.shape``."""
    J = bessel_j_table(L, _bessel_argument(s, params))
    l = np.arange(-L, L + 1)
    # A_l = (-1)^l J_l for l >= 0; J_{-m} = (-1)^m J_m makes A_{-m} = J_m
    sign = np.where((l > 0) & (l % 2 == 1), -1.0, 1.0)
    return J[np.abs(l)] * sign.reshape((-1,) + (1,) * (J.ndim - 1))


def kick_coefficient(l: int, s, params: ModelParams):
    """``A_l(s) = (-1)^l J_l(Z sin(eta s / sqrt(2)))``."""
    L = abs(int(l))
    table = kick_coefficients(L, s, params)
    v = table[int(l) + L]
    return v if np.ndim(v) else float(v)


def _tail(J: np.ndarray) -> np.ndarray:
    """``2 * sum_{l > L} J_l^2`` for every ``L``, summed from the small end for accuracy."""
    sq = J[::-1] ** 2
    return 2.0 * (np.cumsum(sq)[::-1] - J ** 2)


def truncation_order(params: ModelParams, tol: float = 1e-14) -> int:
    """Smallest ``L`` whose neglected Bessel weight ``2 sum_{l>L} J_l(Z_max)^2`` is below ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be > 0")
    zmax = params.bessel_scale
    if zmax == 0.0:
        return 0
    n = int(zmax + 40 + 4 * math.sqrt(zmax + 1))
    J = bessel_j_table(n, zmax)
    tail = _tail(J)
    return int(np.argmax(tail < tol))


@dataclass(frozen=True)
class KickPlan:
    """Precomputed kick data for one grid and parameter set.

    ``coeff_table[l + L, i]`` holds ``A_l(s_i)``.  ``node_shift`` is the node
    stride of a unit shift when the grid is commensurate, else ``None``.
    """

    grid: GridSpec
    params: ModelParams
    L: int
    shifts: np.ndarray
    node_shift: int | None
    coeff_table: np.ndarray
    tol_tail: float
    interpolation: str = "linear"

    @property
    def order(self) -> list[int]:
        """Summation order: 0, then +l, -l with ascending |l|."""
        out = [0]
        for l in range(1, self.L + 1):
            out += [l, -l]
        return out

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(np.sum(self.coeff_table**2, axis=0) - 1.0)))


def build_kick_plan(grid: GridSpec, params: ModelParams, tol: float = 1e-14,
                    interpolation: str = "linear") -> KickPlan:
    """Coefficient table and shifts for ``grid``; uses exact node strides when possible."""
    check_params(params)
    if interpolation not in ("linear", "spectral"):
        raise ValueError(f"unknown kick interpolation {interpolation!r}")
    L = truncation_order(params, tol)
    table = kick_coefficients(L, grid.s, params)
    # the s = 0 row is exactly the identity
    table[:, grid.cs] = 0.0
    table[L, grid.cs] = 1.0
    plan = KickPlan(
        grid=grid,
        params=params,
        L=L,
        shifts=params.kick_shift * np.arange(-L, L + 1),
        node_shift=grid.stride_for(params.kick_shift),
        coeff_table=table,
        tol_tail=tol,
        interpolation=interpolation,
    )
    defect = plan.unitarity_defect()
    if defect > max(10 * tol, 1e-13):
        raise ArithmeticError(f"kick coefficients violate sum A_l^2 = 1 by {defect:.3e}")
    return plan


def _leaks(values, coeffs, cols, tol) -> int:
    """Significant reads beyond the k edge: coefficient times nearest edge value above ``tol``."""
    if cols.size == 0:
        return 0
    edge = np.abs(values[:, cols]) * np.abs(coeffs)[:, None]
    return int(np.count_nonzero(edge > tol))


def _shift_exact(values, n, coeffs, leak_tol):
    """``values[:, j - n]`` with zeros outside, plus leak count."""
    nk = values.shape[1]
    out = np.zeros_like(values)
    m = min(abs(n), nk)
    if n >= 0:
        out[:, m:] = values[:, :nk - m]
        edge = 0  # outputs j < n read below the grid
    else:
        out[:, :nk - m] = values[:, m:]
        edge = nk - 1
    leaks = _leaks(values, coeffs, np.array([edge]), leak_tol) if m else 0
    return out, leaks


def _shift_linear(values, d, coeffs, leak_tol):
    """``w(k - d)`` by linear interpolation; ``d`` in node units."""
    nk = values.shape[1]
    x = np.arange(nk) - d
    j0 = np.floor(x).astype(np.intp)
    inside = (x >= -1e-12) & (x <= nk - 1 + 1e-12)
    j0c = np.clip(j0, 0, nk - 2)
    t = np.where(j0 > nk - 2, 1.0, np.where(j0 < 0, 0.0, x - j0c))
    out = (1.0 - t) * values[:, j0c] + t * values[:, j0c + 1]
    out[:, ~inside] = 0.0
    reads = np.unique(np.clip(np.rint(x[~inside]), 0, nk - 1).astype(np.intp))
    return out, _leaks(values, coeffs, reads, leak_tol)


def _shift_spectral(values, d, coeffs, leak_tol, P):
    nk = values.shape[1]
    F = sfft.fft(values, n=P, axis=1)
    F *= np.exp(-2j * np.pi * sfft.fftfreq(P) * d)
    out = sfft.ifft(F, axis=1)[:, :nk]
    x = np.arange(nk) - d
    outside = (x < -1e-12) | (x > nk - 1 + 1e-12)
    out[:, outside] = 0.0
    reads = np.unique(np.clip(np.rint(x[outside]), 0, nk - 1).astype(np.intp))
    return out, _leaks(values, coeffs, reads, leak_tol)


def apply_kick(state: ChordState, plan: KickPlan, leak_tol: float = 1e-10) -> ChordState:
    """Apply the kick described by ``plan``; ``tau`` is unchanged and ``n_kicks`` grows by one."""
    check_state(state, plan.grid)
    g = plan.grid
    v = state.values
    L = plan.L
    out = np.zeros_like(v)
    leaks = 0
    P = None
    if plan.node_shift is None and plan.interpolation == "spectral":
        P = sfft.next_fast_len(g.nk + int(np.ceil(np.max(np.abs(plan.shifts)) / g.dk)) + 16)
    for l in plan.order:
        c = plan.coeff_table[l + L]
        if l == 0:
            out += c[:, None] * v
            continue
        if plan.node_shift is not None:
            shifted, lk = _shift_exact(v, l * plan.node_shift, c, leak_tol)
        elif plan.interpolation == "linear":
            shifted, lk = _shift_linear(v, plan.shifts[l + L] / g.dk, c, leak_tol)
        else:
            shifted, lk = _shift_spectral(v, plan.shifts[l + L] / g.dk, c, leak_tol, P)
        out += c[:, None] * shifted
        leaks += lk
    # position-marginal slice is untouched by the kick
    out[g.cs] = v[g.cs]
    return state.evolve(out, kicks=1, leaks=leaks)


class KickMap(TransformerMixin, BaseEstimator):
    """Cosine kick as a transformer on chord states.

    Parameters
    ----------
    kappa, eta2 : float
        Kick strength and squared Lamb-Dicke parameter.
    tol : float
        Bessel truncation tolerance.
    interpolation : {"linear", "spectral"}
        Shift reconstruction on grids where the kick shift is not a node stride.
    leak_tol : float
        Threshold for counting out-of-grid reads.
    """

    def __init__(self, kappa=-0.8, eta2=math.pi, tol=1e-14, interpolation="linear",
                 leak_tol=1e-10):
        self.kappa = kappa
        self.eta2 = eta2
        self.tol = tol
        self.interpolation = interpolation
        self.leak_tol = leak_tol

    def fit(self, X, y=None):
        grid = X.grid if isinstance(X, ChordState) else X
        if not isinstance(grid, GridSpec):
            raise TypeError("fit expects a ChordState or GridSpec")
        # beta, D and q do not enter the kick
        params = ModelParams.from_eta2(0.0, 0.0, self.kappa, self.eta2, 1.0)
        self.plan_ = build_kick_plan(grid, params, self.tol, self.interpolation)
        return self

    def transform(self, X: ChordState) -> ChordState:
        if not hasattr(self, "plan_"):
            self.fit(X)
        return apply_kick(X, self.plan_, self.leak_tol)
