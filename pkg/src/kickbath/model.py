"""Physical and dimensionless parameters of the kicked, damped oscillator."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

__all__ = [
    "ParameterError",
    "PhysicalParams",
    "ModelParams",
    "ValidationReport",
    "from_physical",
    "validate",
    "check_params",
]


class ParameterError(ValueError):
    """Raised when a parameter set violates a model invariant."""


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionful oscillator, bath and kick parameters.

    ``m``, ``omega0``, ``Tk``, ``hbar`` and ``kB`` must be strictly positive;
    ``gamma``, ``T``, ``|K|`` and ``mu`` non-negative.
    """

    m: float
    omega0: float
    gamma: float
    T: float
    K: float
    mu: float
    Tk: float
    hbar: float = 1.0
    kB: float = 1.0

    @property
    def kick_wavelength(self) -> float:
        return 2 * math.pi / self.mu if self.mu > 0 else math.inf


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters.

    Parameters
    ----------
    beta : float
        Energy decay rate, ``0 <= beta < 2``.
    D : float
        Diffusion constant (bath thermal energy in units of the level spacing).
    kappa : float
        Kick strength.
    eta : float
        Lamb-Dicke parameter; sets the phase-space scale of the kicks.
    q : float
        Kicks per oscillator period.
    """

    beta: float
    D: float
    kappa: float
    eta: float
    q: float

    @classmethod
    def from_eta2(cls, beta, D, kappa, eta2, q) -> "ModelParams":
        return cls(beta=beta, D=D, kappa=kappa, eta=math.sqrt(eta2), q=q)

    @property
    def eta2(self) -> float:
        return self.eta * self.eta

    @property
    def sigma_k(self) -> float:
        """Free evolution time between two kicks."""
        return 2 * math.pi / self.q

    @property
    def kick_amplitude(self) -> float:
        return self.kappa / (math.sqrt(2) * self.eta2)

    @property
    def bessel_scale(self) -> float:
        """Largest Bessel argument appearing in the kick map."""
        return math.sqrt(2) * abs(self.kappa) / self.eta2

    @property
    def kick_shift(self) -> float:
        """Chord-space displacement along k between neighbouring kick copies."""
        return math.sqrt(2) * self.eta

    @property
    def omega_eff(self) -> float:
        return math.sqrt(1.0 - self.beta * self.beta / 4.0)

    def replace(self, **changes) -> "ModelParams":
        if "eta2" in changes:
            changes["eta"] = math.sqrt(changes.pop("eta2"))
        values = dict(beta=self.beta, D=self.D, kappa=self.kappa, eta=self.eta, q=self.q)
        values.update(changes)
        return ModelParams(**values)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(self.violations)


def _finite(x) -> bool:
    try:
        return math.isfinite(x)
    except TypeError:
        return False


def validate(params: ModelParams) -> ValidationReport:
    """Check every invariant of ``params`` and report each violation by name."""
    report = ValidationReport()
    for name in ("beta", "D", "kappa", "eta", "q"):
        if not _finite(getattr(params, name)):
            report.violations.append(f"{name}: must be a finite real, got {getattr(params, name)!r}")
    if report.violations:
        return report

    if not 0.0 <= params.beta < 2.0:
        report.violations.append(
            f"beta: underdamped bound 0 <= beta < 2 violated (beta={params.beta})"
        )
    elif params.beta >= 1.0:
        report.warnings.append(
            f"beta={params.beta} lies in [1, 2); the closed-form propagator is valid but "
            "this range is outside the weak-damping regime"
        )
    if params.D < 0:
        report.violations.append(f"D: diffusion constant must be >= 0 (D={params.D})")
    if not params.eta > 0:
        report.violations.append(f"eta: Lamb-Dicke parameter must be > 0 (eta={params.eta})")
    if not params.q > 0:
        report.violations.append(f"q: kicks per period must be > 0 (q={params.q})")
    return report


def check_params(params: ModelParams) -> ModelParams:
    """Validate and return ``params``; raise :class:`ParameterError` otherwise."""
    report = validate(params)
    if not report.ok:
        raise ParameterError(str(report))
    for msg in report.warnings:
        warnings.warn(msg, stacklevel=2)
    return params


def from_physical(p: PhysicalParams) -> ModelParams:
    """Convert dimensionful parameters to the dimensionless model."""
    for name in ("m", "omega0", "Tk", "hbar", "kB"):
        if not getattr(p, name) > 0:
            raise ParameterError(f"{name} must be strictly positive")
    for name in ("gamma", "T", "mu"):
        if getattr(p, name) < 0:
            raise ParameterError(f"{name} must be non-negative")

    beta = 2.0 * p.gamma / p.omega0
    if beta >= 2.0:
        raise ParameterError(
            f"beta = 2*gamma/omega0 = {beta} >= 2: overdamped oscillators are not supported"
        )
    D = p.kB * p.T / (p.hbar * p.omega0)
    eta = p.mu * math.sqrt(p.hbar / (2.0 * p.m * p.omega0))
    kappa = p.K * p.mu**2 / (math.sqrt(2.0) * p.m * p.omega0)
    q = 2.0 * math.pi / (p.omega0 * p.Tk)
    return ModelParams(beta=beta, D=D, kappa=kappa, eta=eta, q=q)
