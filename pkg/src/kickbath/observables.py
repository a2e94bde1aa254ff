"""Moments, Wigner function, marginals and limit-cycle statistics from chord states."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import ChordState, WIGNER_MAGIC, write_real_grid
from .validation import check_energy_series

__all__ = [
    "UnderResolvedError",
    "MomentSet",
    "moments",
    "WignerField",
    "wigner",
    "marginals",
    "CycleStats",
    "cycle_stats",
    "CSV_HEADER",
    "write_series_csv",
    "read_series_csv",
    "write_wigner",
]

#: minimum number of nodes across the 1/e width of the chord peak
MIN_PEAK_NODES = 8

# 4th-order central stencils on offsets -2..2
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


class UnderResolvedError(ArithmeticError):
    """The chord peak is too narrow for finite-difference moments on this grid."""


@dataclass(frozen=True)
class MomentSet:
    mean_x: float
    mean_p: float
    xx: float
    pp: float
    xp_sym: float

    @property
    def energy(self) -> float:
        return 0.5 * (self.xx + self.pp)

    @property
    def var_x(self) -> float:
        return self.xx - self.mean_x**2

    @property
    def var_p(self) -> float:
        return self.pp - self.mean_p**2

    @property
    def cov_xp(self) -> float:
        return self.xp_sym - self.mean_x * self.mean_p

    def uncertainty_product(self) -> float:
        """``Var(x) Var(p) - Cov(x, p)^2``; at least 1/4 for physical states."""
        return self.var_x * self.var_p - self.cov_xp**2

    def as_tuple(self) -> tuple[float, ...]:
        return (self.mean_x, self.mean_p, self.xx, self.pp, self.xp_sym)


def moments(state: ChordState, check_resolution: bool = True) -> MomentSet:
    """Moments from derivatives of ``w`` at the origin (4th-order finite differences).

    Raises :class:`UnderResolvedError` when the 1/e width of the peak along
    either axis spans fewer than ``MIN_PEAK_NODES`` nodes.
    """
    g = state.grid
    w = state.values
    i0, j0 = g.cs, g.ck
    w0 = w[i0, j0]
    patch = w[i0 - 2:i0 + 3, j0 - 2:j0 + 3] / w0
    row = patch[2]  # along k
    col = patch[:, 2]  # along s
    dk, ds = g.dk, g.ds
    d_k = _D1 @ row / dk
    d_s = _D1 @ col / ds
    d_kk = _D2 @ row / dk**2
    d_ss = _D2 @ col / ds**2
    d_ks = _D1 @ patch @ _D1 / (dk * ds)
    m = MomentSet(
        mean_x=float(d_k.imag),
        mean_p=float(d_s.imag),
        xx=float(-d_kk.real),
        pp=float(-d_ss.real),
        xp_sym=float(-d_ks.real),
    )
    if check_resolution:
        for var, h, axis in ((m.var_x, dk, "k"), (m.var_p, ds, "s")):
            if var > 0:
                nodes = 2.0 * math.sqrt(2.0 / var) / h
                if nodes < MIN_PEAK_NODES:
                    raise UnderResolvedError(
                        f"under-resolved peak: 1/e width along {axis} spans {nodes:.1f} nodes "
                        f"(< {MIN_PEAK_NODES})"
                    )
    return m


def _centered_fft(a: np.ndarray, axes) -> np.ndarray:
    return sfft.fftshift(sfft.fftn(sfft.ifftshift(a, axes=axes), axes=axes), axes=axes)


@dataclass(frozen=True)
class WignerField:
    """``values[i, j] = W(z_j, p_i)`` on the grid conjugate to the chord grid."""

    values: np.ndarray
    z_max: float
    p_max: float
    imag_residue: float
    tau: float = 0.0
    n_kicks: int = 0

    @property
    def dz(self) -> float:
        return 2.0 * self.z_max / (self.values.shape[1] - 1)

    @property
    def dp(self) -> float:
        return 2.0 * self.p_max / (self.values.shape[0] - 1)

    @property
    def z(self) -> np.ndarray:
        n = (self.values.shape[1] - 1) // 2
        return np.arange(-n, n + 1) * self.dz

    @property
    def p(self) -> np.ndarray:
        n = (self.values.shape[0] - 1) // 2
        return np.arange(-n, n + 1) * self.dp

    @property
    def normalization(self) -> float:
        return float(self.values.sum() * self.dz * self.dp)

    def position_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dp

    def momentum_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dz


def wigner(state: ChordState) -> WignerField:
    """``W(z, p) = (2 pi)^-2 sum dk ds exp(-i (z k + s p)) w(k, s)`` by a centred 2D FFT.

    The origin node maps to the Wigner origin; the spacing is
    ``dz = 2 pi / (nk dk)`` and ``z_max = (nk - 1)/2 * dz`` (likewise for ``p``).
    """
    g = state.grid
    F = _centered_fft(state.values, axes=(0, 1)) * (g.dk * g.ds / (2.0 * math.pi) ** 2)
    dz = 2.0 * math.pi / (g.nk * g.dk)
    dp = 2.0 * math.pi / (g.ns * g.ds)
    return WignerField(
        values=np.ascontiguousarray(F.real),
        z_max=g.ck * dz,
        p_max=g.cs * dp,
        imag_residue=float(np.max(np.abs(F.imag))),
        tau=state.tau,
        n_kicks=state.n_kicks,
    )


def marginals(state: ChordState):
    """Position and momentum densities from the ``s = 0`` and ``k = 0`` slices.

    Returns ``(z, P, p, Q)`` with ``P(z)`` and ``Q(p)`` real.
    """
    g = state.grid
    row = state.values[g.cs]
    col = state.values[:, g.ck]
    P = _centered_fft(row, axes=(0,)).real * g.dk / (2.0 * math.pi)
    Q = _centered_fft(col, axes=(0,)).real * g.ds / (2.0 * math.pi)
    dz = 2.0 * math.pi / (g.nk * g.dk)
    dp = 2.0 * math.pi / (g.ns * g.ds)
    z = np.arange(-g.ck, g.ck + 1) * dz
    p = np.arange(-g.cs, g.cs + 1) * dp
    return z, P, p, Q


def write_wigner(field: WignerField, path) -> None:
    write_real_grid(path, field.values, field.z_max, field.p_max, field.tau, field.n_kicks,
                    WIGNER_MAGIC)


@dataclass(frozen=True)
class CycleStats:
    """Limit-cycle summary of a kicked run.

    ``E_minus[n]`` and ``E_plus[n]`` are the energies just before and after
    kick ``n + 1``.
    """

    E_minus: np.ndarray
    E_plus: np.ndarray
    E_qst: float
    heat_flux: float
    converged: bool
    window: int
    drift: float


def cycle_stats(series, q: float, window: int | None = None) -> CycleStats:
    """Quasi-stationary energy and heat flux over the last ``window`` kicks.

    ``series`` holds ``(E_minus, E_plus)`` rows.  The heat flux averages the
    energy released between kicks, ``E_plus(n) - E_minus(n + 1)``, times
    ``q / 2 pi``.  ``converged`` is set when the cycle-averaged energy of the
    two half-windows differs by less than 0.5 %.
    """
    arr = check_energy_series(series)
    if window is None:
        window = max(2, int(round(q)))
    n = arr.shape[0]
    if window < 2 or n <= window:
        raise ValueError(f"insufficient data: need more than window={window} kicks, got {n}")
    Em, Ep = arr[:, 0], arr[:, 1]
    mid = 0.5 * (Em + Ep)
    E_qst = float(mid[-window:].mean())
    released = Ep[:-1] - Em[1:]
    heat_flux = float(q / (2.0 * math.pi) * released[-window:].mean())
    h = window // 2
    a, b = mid[-window:-window + h].mean(), mid[-h:].mean()
    drift = float(abs(b - a) / max(abs(b), 1e-300))
    return CycleStats(Em.copy(), Ep.copy(), E_qst, heat_flux, drift < 5e-3, window, drift)


CSV_HEADER = ["n", "tau", "E_minus", "E_plus", "mean_x", "mean_p", "xx", "pp", "xp_sym"]


def write_series_csv(path, rows) -> None:
    """Write the per-kick series; each row follows :data:`CSV_HEADER`."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER)
        for r in rows:
            wr.writerow([int(r[0])] + [repr(float(x)) for x in r[1:]])


def read_series_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return np.array([[float(x) for x in row] for row in rd])
