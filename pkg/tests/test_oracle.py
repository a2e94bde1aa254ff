import math

import numpy as np
import pytest
from scipy import integrate, linalg

from kickbath import oracle
from kickbath.model import ModelParams


def moment_ode(t, y, beta, D):
    xx, pp, C = y
    return [C, -C - 2 * beta * pp + 2 * beta * D, 2 * pp - 2 * xx - beta * C]


def ode_moments(beta, D, tau, y0=(0.5, 0.5, 0.0)):
    sol = integrate.solve_ivp(moment_ode, (0, tau), list(y0), args=(beta, D), method="DOP853",
                              rtol=1e-12, atol=1e-12)
    return sol.y[:, -1]


@pytest.fixture(scope="module")
def thermalised():
    p = ModelParams(0.1, 1.0, 0.0, 1.0, 4.0)
    return p, oracle.evolve_master(oracle.coherent_fock(30), 50.0, p)


def test_vacuum_chord():
    rho = oracle.coherent_fock(20)
    for k, s in ((0, 0), (0.7, -0.2), (1.5, 1.0)):
        assert oracle.chord_of_fock(rho, k, s) == pytest.approx(math.exp(-(k * k + s * s) / 4),
                                                               abs=1e-13)


def test_coherent_state_moments():
    m = oracle.moments_fock(oracle.coherent_fock(60, 1.5, -0.5))
    assert m.mean_x == pytest.approx(1.5, abs=1e-12)
    assert m.mean_p == pytest.approx(-0.5, abs=1e-12)
    assert m.var_x == pytest.approx(0.5, abs=1e-12)
    assert m.cov_xp == pytest.approx(0.0, abs=1e-12)


def test_unitary_rotation_conserves_energy():
    p = ModelParams(0.0, 0.0, 0.0, 1.0, 4.0)
    rho = oracle.coherent_fock(40, 1.0, 0.5)
    E0 = oracle.moments_fock(rho).energy
    out = oracle.evolve_master(rho, math.pi / 2, p)
    assert oracle.moments_fock(out).energy == pytest.approx(E0, abs=1e-8)
    # a quarter period maps (x, p) -> (p, -x)
    m = oracle.moments_fock(out)
    assert m.mean_x == pytest.approx(0.5, abs=1e-8) and m.mean_p == pytest.approx(-1.0, abs=1e-8)


def test_trace_and_hermiticity_preserved(thermalised):
    _, out = thermalised
    assert np.trace(out.rho).real == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(out.rho - out.rho.conj().T)) == 0.0
    assert out.tau == pytest.approx(50.0)


def test_thermalisation_follows_moment_equations(thermalised):
    p, out = thermalised
    xx, pp, C = ode_moments(p.beta, p.D, 50.0)
    m = oracle.moments_fock(out)
    assert m.xx == pytest.approx(xx, abs=1e-7)
    assert m.pp == pytest.approx(pp, abs=1e-7)
    assert 2 * m.xp_sym == pytest.approx(C, abs=1e-7)
    # and both sit close to the fixed point xx = pp = D
    assert abs(m.xx - 1) < 0.02 and abs(m.pp - 1) < 0.02


def test_thermalised_chord_is_gaussian(thermalised):
    p, out = thermalised
    xx, pp, C = ode_moments(p.beta, p.D, 50.0)
    for k, s in ((0.3, 0.0), (0.0, 0.8), (0.5, -0.5), (1.2, 0.7)):
        ref = math.exp(-0.5 * (xx * k * k + C * k * s + pp * s * s))
        assert oracle.chord_of_fock(out, k, s) == pytest.approx(ref, abs=1e-7)


def test_zero_temperature_decay():
    p = ModelParams(0.1, 0.0, 0.0, 1.0, 4.0)
    rho = oracle.coherent_fock(40, 2.0, 0.0)
    E = []
    y = (0.5 + 4.0, 0.5, 0.0)
    for n in range(1, 6):
        rho = oracle.evolve_master(rho, 2.0, p)
        E.append(oracle.moments_fock(rho).energy)
        xx, pp, _ = ode_moments(p.beta, p.D, 2.0 * n, y)
        assert E[-1] == pytest.approx(0.5 * (xx + pp), abs=1e-7)
    assert all(b < a for a, b in zip(E, E[1:]))


def test_kick_identity_and_position_invariance():
    rho = oracle.coherent_fock(60, 0.5, 0.2)
    p = ModelParams.from_eta2(0.1, 5.0, -0.8, math.pi, 4.0)
    same = oracle.apply_kick_fock(rho, p.replace(kappa=0.0))
    np.testing.assert_allclose(same.rho, rho.rho, atol=1e-14)
    kicked = oracle.apply_kick_fock(rho, p)
    x, _ = oracle.position_momentum(60)
    cos = linalg.cosm(math.sqrt(2) * p.eta * x)
    before = np.trace(rho.rho @ cos)
    after = np.trace(kicked.rho @ cos)
    assert after == pytest.approx(before, abs=1e-10)
    assert kicked.n_kicks == 1


def test_truncation_detected():
    p = ModelParams.from_eta2(0.1, 5.0, -4.5, 1.0, 4.0)
    with pytest.raises(oracle.TruncationError):
        # displaced, so that odd levels are reached too
        oracle.apply_kick_fock(oracle.coherent_fock(12, 0.5, 0.0), p)


def test_step_limit():
    with pytest.raises(ValueError):
        oracle.evolve_master(oracle.coherent_fock(5), 1.0, ModelParams(0.1, 1, 0, 1, 4), dt=0.01)


def hermite_functions(N, x):
    """Oscillator eigenfunctions psi_0..psi_{N-1} on the points ``x`` by recurrence."""
    psi = np.zeros((N, x.size))
    psi[0] = math.pi ** -0.25 * np.exp(-x**2 / 2)
    if N > 1:
        psi[1] = math.sqrt(2) * x * psi[0]
    for n in range(2, N):
        psi[n] = math.sqrt(2 / n) * x * psi[n - 1] - math.sqrt((n - 1) / n) * psi[n - 2]
    return psi


def position_density(state, x):
    psi = hermite_functions(state.dim, x)
    return np.einsum("mx,mn,nx->x", psi, state.rho, psi).real


def test_kick_leaves_position_density_unchanged():
    # the truncated position operator converges with N: 1.8e-6 at N=60, 9e-11 at N=140
    rho = oracle.coherent_fock(140, 0.5, 0.2)
    p = ModelParams.from_eta2(0.1, 5.0, -0.8, math.pi, 4.0)
    kicked = oracle.apply_kick_fock(rho, p)
    x = np.linspace(-4, 4, 81)
    np.testing.assert_allclose(position_density(kicked, x), position_density(rho, x), atol=1e-10)


def test_long_bath_run_reaches_thermal_position_density():
    D = 1.0
    out = oracle.evolve_master(oracle.coherent_fock(20), 15.0, ModelParams(1.0, D, 0.0, 1.0, 4.0))
    x = np.linspace(-4, 4, 81)
    ref = np.exp(-x**2 / (2 * D)) / math.sqrt(2 * math.pi * D)
    assert np.max(np.abs(position_density(out, x) - ref)) < 1e-3
