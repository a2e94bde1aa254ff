"""Brute-force reference: truncated number-basis density matrix.

Integrates the master equation

    d rho/dtau = -i[H, rho] - i(beta/2)[x, {p, rho}] - beta D [x, [x, rho]]

with fixed-step RK4 and applies the kick unitary ``exp(-i a cos(sqrt(2) eta x))``
through the eigenbasis of the truncated position operator.  Nothing here
touches the chord grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import linalg

from .model import ModelParams
from .observables import MomentSet

__all__ = [
    "TruncationError",
    "FockDensity",
    "ladder",
    "position_momentum",
    "coherent_fock",
    "evolve_master",
    "apply_kick_fock",
    "chord_of_fock",
    "moments_fock",
]


class TruncationError(ArithmeticError):
    """Population reached the top of the truncated basis."""


@dataclass
class FockDensity:
    rho: np.ndarray
    tau: float = 0.0
    n_kicks: int = 0

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def tail(self) -> float:
        return float(self.rho[-1, -1].real)

    def check(self, tail_tol: float = 1e-8) -> None:
        if self.tail > tail_tol:
            raise TruncationError(
                f"truncation exceeded at tau={self.tau:.6g}: top-level population {self.tail:.3e}"
            )


@lru_cache(maxsize=16)
def ladder(N: int) -> np.ndarray:
    """Annihilation operator on ``|0> .. |N-1>``."""
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1)
    a.setflags(write=False)
    return a


def position_momentum(N: int):
    """``x = (a + a^+)/sqrt(2)`` and ``p = i(a^+ - a)/sqrt(2)`` in the truncated basis."""
    a = ladder(N)
    x = (a + a.T) / math.sqrt(2.0)
    p = 1j * (a.T - a) / math.sqrt(2.0)
    return x, p


def coherent_fock(N: int, x0: float = 0.0, p0: float = 0.0) -> FockDensity:
    alpha = (x0 + 1j * p0) / math.sqrt(2.0)
    n = np.arange(N)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        psi = (n == 0).astype(complex)
    else:
        psi = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(alpha + 0j) - 0.5 * logfact)
    psi /= np.linalg.norm(psi)
    return FockDensity(np.outer(psi, psi.conj()))


def _generator(N: int, beta: float, D: float):
    x, p = position_momentum(N)
    H = np.diag(np.arange(N) + 0.5).astype(complex)

    def rhs(rho):
        comm_h = H @ rho - rho @ H
        anti = p @ rho + rho @ p
        xr = x @ rho - rho @ x
        return (-1j * comm_h
                - 0.5j * beta * (x @ anti - anti @ x)
                - beta * D * (x @ xr - xr @ x))

    return rhs


def evolve_master(state: FockDensity, sigma: float, params: ModelParams, dt: float = 1e-3,
                  tail_tol: float = 1e-8) -> FockDensity:
    """RK4 integration over ``sigma`` with step at most ``dt``; re-Hermitises every step."""
    if dt > 1e-3:
        raise ValueError("dt must be <= 1e-3")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    n_steps = int(math.ceil(sigma / dt - 1e-12)) if sigma > 0 else 0
    h = sigma / n_steps if n_steps else 0.0
    rhs = _generator(state.dim, params.beta, params.D)
    rho = state.rho.astype(complex, copy=True)
    tau = state.tau
    for i in range(n_steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        if rho[-1, -1].real > tail_tol:
            raise TruncationError(
                f"truncation exceeded at tau={tau + (i + 1) * h:.6g}: "
                f"top-level population {rho[-1, -1].real:.3e}"
            )
    return FockDensity(rho, tau + sigma, state.n_kicks)


@lru_cache(maxsize=16)
def _kick_unitary(N: int, kappa: float, eta: float) -> np.ndarray:
    x, _ = position_momentum(N)
    xs, V = np.linalg.eigh(x)
    amp = kappa / (math.sqrt(2.0) * eta * eta)
    phase = np.exp(-1j * amp * np.cos(math.sqrt(2.0) * eta * xs))
    U = (V * phase) @ V.T
    U.setflags(write=False)
    return U


def apply_kick_fock(state: FockDensity, params: ModelParams, tail_tol: float = 1e-8) -> FockDensity:
    U = _kick_unitary(state.dim, float(params.kappa), float(params.eta))
    rho = U @ state.rho @ U.conj().T
    out = FockDensity(0.5 * (rho + rho.conj().T), state.tau, state.n_kicks + 1)
    out.check(tail_tol)
    return out


def chord_of_fock(state: FockDensity, k: float, s: float, pad: int = 40) -> complex:
    """``Tr[rho exp(i(k x + s p))]`` with the displacement built by ``expm`` in a padded basis."""
    N = state.dim
    M = N + pad
    x, p = position_momentum(M)
    Dm = linalg.expm(1j * (k * x + s * p))[:N, :N]
    return complex(np.trace(state.rho @ Dm))


def moments_fock(state: FockDensity) -> MomentSet:
    N = state.dim
    # one extra level so that x^2, p^2 and xp are exact on the kept block
    x, p = position_momentum(N + 2)
    xx = (x @ x)[:N, :N]
    pp = (p @ p)[:N, :N]
    xp = (0.5 * (x @ p + p @ x))[:N, :N]
    rho = state.rho

    def ev(op):
        return float(np.real(np.trace(rho @ op)))

    return MomentSet(ev(x[:N, :N]), ev(p[:N, :N]), ev(xx), ev(pp), ev(xp))


def with_tau(state: FockDensity, tau: float) -> FockDensity:
    return replace(state, tau=tau)
