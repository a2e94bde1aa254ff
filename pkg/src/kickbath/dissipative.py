"""Exact inter-kick propagation of the chord function under the bath.

Between kicks the chord function obeys a first-order PDE whose
characteristics are the damped-oscillator flow ``dk/dt = s``,
``ds/dt = beta*s - k``.  Propagating for a time ``sigma`` gives

    w(r, tau + sigma) = w(M(-sigma) r, tau) * exp(-D*beta * r^T A(sigma) r)

with ``M`` the characteristic flow and ``A`` the accumulated diffusion
quadratic form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from sklearn.base import BaseEstimator, TransformerMixin

from .grid import ChordState, GridSpec
from .model import ModelParams, ParameterError
from .resample import make_resampler
from .validation import check_state

__all__ = [
    "PropagatorMatrices",
    "evolution_matrix",
    "diffusion_matrix",
    "propagator",
    "apply_dissipative",
    "stationary_chord",
    "DissipativeMap",
]


def _check_beta(beta: float) -> None:
    if not (math.isfinite(beta) and 0.0 <= beta < 2.0):
        raise ParameterError(f"beta must satisfy 0 <= beta < 2, got {beta}")


def _trig_entries(beta: float, sigma: float):
    """``(m1, m2, m3, m4)``: the flow matrix without its ``exp(beta*sigma/2)`` prefactor."""
    om = math.sqrt(1.0 - beta * beta / 4.0)
    c, s = math.cos(om * sigma), math.sin(om * sigma)
    half = beta / (2.0 * om)
    return c - half * s, s / om, -s / om, c + half * s


def evolution_matrix(beta: float, sigma: float) -> np.ndarray:
    """Flow ``M(sigma)`` of the characteristics ``(k, s)``; ``det M = exp(beta*sigma)``."""
    _check_beta(beta)
    m1, m2, m3, m4 = _trig_entries(beta, sigma)
    return math.exp(beta * sigma / 2.0) * np.array([[m1, m2], [m3, m4]])


def _diffusion_integrand(beta: float, v: float) -> np.ndarray:
    # s-row of M(-v) without prefactor, weighted by exp(-beta v)
    _, _, m3, m4 = _trig_entries(beta, -v)
    phi = np.array([m3, m4])
    return math.exp(-beta * v) * np.outer(phi, phi)


def _diffusion_closed(beta: float, sigma: float) -> np.ndarray:
    om = math.sqrt(1.0 - beta * beta / 4.0)
    half = beta / (2.0 * om)
    # E0 = int_0^sigma e^{-beta v} dv ; Ec + i Es = int_0^sigma e^{(-beta + 2i om) v} dv
    E0 = sigma if beta == 0.0 else -math.expm1(-beta * sigma) / beta
    z = complex(-beta, 2.0 * om)
    E = (np.exp(z * sigma) - 1.0) / z
    Ec, Es = E.real, E.imag
    Iss = 0.5 * (E0 - Ec)
    Icc = 0.5 * (E0 + Ec)
    Isc = 0.5 * Es
    A1 = Iss / om**2
    A2 = (Isc - half * Iss) / om
    A3 = Icc - 2.0 * half * Isc + half * half * Iss
    return np.array([[A1, A2], [A2, A3]])


def _diffusion_quad(beta: float, sigma: float, tol: float = 1e-13) -> np.ndarray:
    om = math.sqrt(1.0 - beta * beta / 4.0)
    # enough subintervals to resolve the oscillation
    limit = max(50, int(4 * om * sigma) + 50)
    out = np.empty((2, 2))
    for i, j in ((0, 0), (0, 1), (1, 1)):
        val, _ = integrate.quad(lambda v: _diffusion_integrand(beta, v)[i, j], 0.0, sigma,
                                epsabs=tol, epsrel=tol, limit=limit)
        out[i, j] = val
    out[1, 0] = out[0, 1]
    return out


def diffusion_matrix(beta: float, sigma: float, method: str = "closed") -> np.ndarray:
    """Diffusion form ``A(sigma)``, symmetric and positive semidefinite for ``sigma >= 0``.

    ``method`` is ``"closed"`` (antiderivatives) or ``"quad"`` (adaptive quadrature).
    """
    _check_beta(beta)
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if method == "closed":
        return _diffusion_closed(beta, sigma)
    if method == "quad":
        return _diffusion_quad(beta, sigma)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class PropagatorMatrices:
    sigma: float
    M: np.ndarray
    M_inv: np.ndarray
    A: np.ndarray

    @property
    def m1(self):
        return self.M[0, 0]

    @property
    def m2(self):
        return self.M[0, 1]

    @property
    def m3(self):
        return self.M[1, 0]

    @property
    def m4(self):
        return self.M[1, 1]

    @property
    def A1(self):
        return self.A[0, 0]

    @property
    def A2(self):
        return self.A[0, 1]

    @property
    def A3(self):
        return self.A[1, 1]


@lru_cache(maxsize=64)
def propagator(beta: float, sigma: float) -> PropagatorMatrices:
    return PropagatorMatrices(
        sigma=sigma,
        M=evolution_matrix(beta, sigma),
        M_inv=evolution_matrix(beta, -sigma),
        A=diffusion_matrix(beta, sigma),
    )


def stationary_chord(grid: GridSpec, D: float) -> ChordState:
    """Thermal fixed point ``w = exp(-D (k^2 + s^2) / 2)``."""
    if not D > 0:
        raise ParameterError(f"D must be > 0, got {D}")
    K, S = grid.mesh()
    return ChordState(grid, np.exp(-0.5 * D * (K**2 + S**2)))


class DissipativeMap(TransformerMixin, BaseEstimator):
    """Propagate chord states for a time ``sigma`` under the bath.

    ``fit`` builds the per-grid plan (back-traced coordinates and damping
    factors); ``transform`` applies it.  Reusing one fitted map across many
    kick periods avoids recomputing the plan.

    Parameters
    ----------
    beta, D : float
        Damping rate and diffusion constant.
    sigma : float
        Propagation time.
    scheme : {"spectral", "bilinear"}
        How off-node values are reconstructed.
    leak_tol : float
        An out-of-grid read counts as a leak when the nearest boundary value,
        damped by the bath factor at the receiving node, exceeds this.
    """

    def __init__(self, beta=0.1, D=5.0, sigma=math.pi / 2, scheme="spectral", leak_tol=1e-10):
        self.beta = beta
        self.D = D
        self.sigma = sigma
        self.scheme = scheme
        self.leak_tol = leak_tol

    def fit(self, X, y=None):
        grid = X.grid if isinstance(X, ChordState) else X
        if not isinstance(grid, GridSpec):
            raise TypeError("fit expects a ChordState or GridSpec")
        _check_beta(self.beta)
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.D < 0:
            raise ParameterError(f"D must be >= 0, got {self.D}")
        self.matrices_ = propagator(float(self.beta), float(self.sigma))
        self.grid_ = grid
        self.identity_ = self.sigma == 0
        if not self.identity_:
            K, S = grid.mesh()
            A = self.matrices_.A
            quad = A[0, 0] * K**2 + 2.0 * A[0, 1] * K * S + A[1, 1] * S**2
            self.damping_ = np.exp(-self.D * self.beta * quad)
            self.resampler_ = make_resampler(self.scheme, grid, self.matrices_.M_inv,
                                             self.leak_tol, self.damping_)
        return self

    def transform(self, X: ChordState) -> ChordState:
        if not hasattr(self, "grid_"):
            self.fit(X)
        check_state(X, self.grid_)
        if self.identity_:
            return X.evolve(X.values.copy())
        g = self.grid_
        values, leaks = self.resampler_(X.values)
        values *= self.damping_
        # the origin maps onto itself: no interpolation involved
        values[g.cs, g.ck] = X.values[g.cs, g.ck]
        return X.evolve(values, dtau=self.sigma, leaks=leaks)


def apply_dissipative(state: ChordState, sigma: float, params: ModelParams,
                      scheme: str = "spectral") -> ChordState:
    """One-off propagation of ``state`` by ``sigma``; see :class:`DissipativeMap`."""
    return DissipativeMap(params.beta, params.D, sigma, scheme).fit(state).transform(state)
