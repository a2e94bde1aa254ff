import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kickbath.dissipative import (DissipativeMap, apply_dissipative, diffusion_matrix,
                                  evolution_matrix, propagator, stationary_chord)
from kickbath.grid import GridSpec, coherent_state
from kickbath.model import ModelParams, ParameterError
from kickbath.observables import moments

betas = st.floats(0.0, 1.9)
times = st.floats(0.0, 15.0)


def characteristic_flow(beta, sigma, r0):
    sol = integrate.solve_ivp(lambda t, y: [y[1], beta * y[1] - y[0]], (0, sigma), r0,
                              method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def moment_ode(t, y, beta, D):
    mx, mp, xx, pp, C = y
    return [mp, -mx - beta * mp, C, -C - 2 * beta * pp + 2 * beta * D, 2 * pp - 2 * xx - beta * C]


def test_identity_at_zero_time():
    assert np.array_equal(evolution_matrix(0.1, 0.0), np.eye(2))
    assert np.array_equal(diffusion_matrix(0.1, 0.0), np.zeros((2, 2)))


@given(times)
def test_undamped_flow_is_rotation(sigma):
    c, s = math.cos(sigma), math.sin(sigma)
    np.testing.assert_allclose(evolution_matrix(0.0, sigma), [[c, s], [-s, c]], atol=1e-14)


def test_flow_matches_characteristic_integration():
    M = evolution_matrix(0.1, math.pi / 2)
    for r0 in ([1.0, 0.0], [0.0, 1.0]):
        np.testing.assert_allclose(M @ r0, characteristic_flow(0.1, math.pi / 2, r0), atol=1e-12)


@given(betas, times)
def test_determinant(beta, sigma):
    assert np.linalg.det(evolution_matrix(beta, sigma)) == pytest.approx(math.exp(beta * sigma),
                                                                        rel=1e-10)


@given(betas, times, times)
def test_composition(beta, s1, s2):
    M = evolution_matrix(beta, s1 + s2)
    P = evolution_matrix(beta, s1) @ evolution_matrix(beta, s2)
    assert np.max(np.abs(P - M)) <= 1e-10 * max(1.0, np.max(np.abs(M)))


@given(betas, times)
def test_inverse(beta, sigma):
    np.testing.assert_allclose(evolution_matrix(beta, sigma) @ evolution_matrix(beta, -sigma),
                               np.eye(2), atol=1e-10)


@given(betas, times)
@settings(max_examples=40, deadline=None)
def test_diffusion_closed_form_vs_quadrature(beta, sigma):
    A = diffusion_matrix(beta, sigma)
    np.testing.assert_allclose(A, diffusion_matrix(beta, sigma, "quad"), atol=1e-10)
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() >= -1e-12 * max(1.0, np.abs(A).max())


def test_diffusion_strong_coupling_value():
    A = diffusion_matrix(0.1, math.pi / 2)
    np.testing.assert_allclose(A, diffusion_matrix(0.1, math.pi / 2, "quad"), atol=1e-10)


def test_diffusion_long_time_limit():
    # diagonal entries approach 1/(2 beta) = 5 up to O(beta^2) corrections
    A = diffusion_matrix(0.1, 2000.0)
    assert A[0, 0] == pytest.approx(5.0, rel=1e-2)
    assert A[1, 1] == pytest.approx(5.0, rel=1e-2)
    assert abs(A[0, 1]) < 0.01


def test_beta_bound():
    with pytest.raises(ParameterError):
        evolution_matrix(2.0, 1.0)
    with pytest.raises(ParameterError):
        diffusion_matrix(0.1, -1.0)


def test_propagator_bundle():
    P = propagator(0.1, math.pi / 2)
    np.testing.assert_allclose(P.M @ P.M_inv, np.eye(2), atol=1e-14)
    assert P.A1 == P.A[0, 0] and P.m4 == P.M[1, 1]


def test_zero_time_is_identity():
    g = GridSpec.square(33, 5.0)
    st_ = coherent_state(g, 1.0, 0.5)
    out = apply_dissipative(st_, 0.0, ModelParams(0.1, 5.0, 0.0, 1.0, 4))
    np.testing.assert_array_equal(out.values, st_.values)


def test_stationary_state_is_fixed_point():
    g = GridSpec.square(257, 6.0)
    st_ = stationary_chord(g, 5.0)
    out = DissipativeMap(0.1, 5.0, math.pi / 2).fit(g).transform(st_)
    assert np.max(np.abs(out.values - st_.values)) < 1e-8
    m = moments(st_)
    # limited by the finite-difference stencil at this spacing
    assert m.xx == pytest.approx(5.0, rel=1e-4) and m.pp == pytest.approx(5.0, rel=1e-4)
    assert m.energy == pytest.approx(5.0, rel=1e-4)


def test_semigroup_on_grid():
    g = GridSpec.square(257, 10.0)
    st_ = coherent_state(g, 1.0, -0.5)
    once = DissipativeMap(0.1, 5.0, 1.0).fit(g).transform(st_)
    half = DissipativeMap(0.1, 5.0, 0.5).fit(g)
    twice = half.transform(half.transform(st_))
    assert np.max(np.abs(once.values - twice.values)) < 1e-10
    assert once.tau == pytest.approx(twice.tau)


def _moment_reference(beta, D, sigma, n, y0):
    t = sigma * np.arange(1, n + 1)
    sol = integrate.solve_ivp(moment_ode, (0, t[-1]), y0, t_eval=t, args=(beta, D),
                              method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y.T


def test_gaussian_moments_follow_moment_equations():
    beta, D, sigma = 0.1, 5.0, 0.7
    g = GridSpec.square(1025, 10.0)
    st_ = coherent_state(g, 1.5, -0.5)
    dm = DissipativeMap(beta, D, sigma).fit(g)
    ref = _moment_reference(beta, D, sigma, 8, [1.5, -0.5, 2.75, 0.75, -1.5])
    for row in ref:
        st_ = dm.transform(st_)
        m = moments(st_)
        got = [m.mean_x, m.mean_p, m.xx, m.pp, 2 * m.xp_sym]
        np.testing.assert_allclose(got, row, atol=1e-6 * np.abs(row).max())
    assert st_.boundary_leak == 0


def test_bilinear_scheme_tracks_means():
    # piecewise-linear reconstruction spoils curvature at the origin, so only
    # first moments are meaningful with this scheme
    beta, D, sigma = 0.1, 5.0, 0.7
    g = GridSpec.square(257, 10.0)
    dm = DissipativeMap(beta, D, sigma, "bilinear").fit(g)
    st_ = dm.transform(coherent_state(g, 1.5, -0.5))
    ref = _moment_reference(beta, D, sigma, 1, [1.5, -0.5, 2.75, 0.75, -1.5])[0]
    m = moments(st_)
    np.testing.assert_allclose([m.mean_x, m.mean_p], ref[:2], atol=5e-3)
    assert abs(st_.trace - 1) < 1e-14


def test_estimator_params_and_unfitted_transform():
    dm = DissipativeMap(beta=0.2, D=1.0)
    assert dm.get_params()["beta"] == 0.2
    g = GridSpec.square(33, 5.0)
    out = dm.transform(coherent_state(g))
    assert out.tau == pytest.approx(math.pi / 2)


def test_stationary_requires_positive_D():
    with pytest.raises(ParameterError):
        stationary_chord(GridSpec.square(17, 2.0), 0.0)
