import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickbath.dissipative import stationary_chord
from kickbath.grid import ChordState, GridSpec, coherent_state, read_real_grid
from kickbath.observables import (CSV_HEADER, UnderResolvedError, cycle_stats, marginals,
                                  moments, read_series_csv, wigner, write_series_csv,
                                  write_wigner)


def squeezed_chord(grid, x0, p0, vx, vp, cxp):
    """Chord function of a Gaussian with means, variances and covariance given."""
    K, S = grid.mesh()
    quad = vx * K**2 + 2 * cxp * K * S + vp * S**2
    return ChordState(grid, np.exp(1j * (x0 * K + p0 * S) - 0.5 * quad))


def test_vacuum_moments():
    m = moments(coherent_state(GridSpec.square(17, 0.04)))
    assert m.mean_x == 0 and m.mean_p == 0
    assert m.xx == pytest.approx(0.5, abs=1e-8) and m.pp == pytest.approx(0.5, abs=1e-8)
    assert m.energy == pytest.approx(0.5, abs=1e-8)
    assert m.uncertainty_product() == pytest.approx(0.25, abs=1e-8)


def test_displaced_coherent_moments():
    m = moments(coherent_state(GridSpec.square(17, 0.04), 1.5, -0.5))
    assert m.mean_x == pytest.approx(1.5, abs=1e-8)
    assert m.mean_p == pytest.approx(-0.5, abs=1e-8)
    assert m.xx == pytest.approx(0.5 + 2.25, abs=1e-8)
    assert m.pp == pytest.approx(0.5 + 0.25, abs=1e-8)
    assert m.xp_sym == pytest.approx(1.5 * -0.5, abs=1e-8)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 3), st.floats(0.3, 3),
       st.floats(-0.9, 0.9))
@settings(max_examples=30)
def test_general_gaussian_moments(x0, p0, vx, vp, rho):
    cxp = rho * math.sqrt(vx * vp)
    m = moments(squeezed_chord(GridSpec.square(17, 0.04), x0, p0, vx, vp, cxp))
    assert m.var_x == pytest.approx(vx, abs=1e-7)
    assert m.var_p == pytest.approx(vp, abs=1e-7)
    assert m.cov_xp == pytest.approx(cxp, abs=1e-7)


def test_fourth_order_convergence():
    errs = []
    for extent in (0.8, 0.4, 0.2):
        m = moments(squeezed_chord(GridSpec.square(17, extent), 1.0, 0.5, 2.0, 1.5, 0.4))
        errs.append(abs(m.xx - (2.0 + 1.0)) + abs(m.xp_sym - (0.4 + 0.5)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 4) < 0.3), rates


def test_stationary_energy():
    m = moments(stationary_chord(GridSpec.square(17, 0.04), 5.0))
    assert m.energy == pytest.approx(5.0, abs=1e-6)
    assert m.xx == pytest.approx(5.0, abs=1e-6) and abs(m.xp_sym) < 1e-12


def test_under_resolved_peak_raises():
    g = GridSpec.square(65, 10.0)  # dk = 0.3125
    hot = stationary_chord(g, 40.0)
    with pytest.raises(UnderResolvedError, match="under-resolved"):
        moments(hot)
    assert moments(hot, check_resolution=False).energy > 0


# -- Wigner ---------------------------------------------------------------------------------

def test_vacuum_wigner():
    W = wigner(coherent_state(GridSpec.square(513, 12.0)))
    Z, P = np.meshgrid(W.z, W.p)
    assert np.max(np.abs(W.values - np.exp(-Z**2 - P**2) / math.pi)) < 1e-6
    assert W.normalization == pytest.approx(1.0, abs=1e-6)
    assert W.imag_residue < 1e-12


def test_stationary_wigner_variance_D():
    D = 5.0
    W = wigner(stationary_chord(GridSpec.square(257, 5.0), D))
    Z, P = np.meshgrid(W.z, W.p)
    ref = np.exp(-(Z**2 + P**2) / (2 * D)) / (2 * math.pi * D)
    assert np.max(np.abs(W.values - ref)) < 1e-10
    var = np.sum(Z**2 * W.values) * W.dz * W.dp
    assert var == pytest.approx(D, rel=1e-8)


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=10, deadline=None)
def test_wigner_normalised_for_any_state(x0, p0):
    W = wigner(coherent_state(GridSpec.square(129, 10.0), x0, p0))
    assert W.normalization == pytest.approx(1.0, abs=1e-10)


def test_marginals():
    g = GridSpec.square(513, 12.0)
    st_ = coherent_state(g)
    z, Pz, p, Qp = marginals(st_)
    np.testing.assert_allclose(Pz, np.exp(-z**2) / math.sqrt(math.pi), atol=1e-12)
    np.testing.assert_allclose(Qp, np.exp(-p**2) / math.sqrt(math.pi), atol=1e-12)
    W = wigner(st_)
    np.testing.assert_allclose(W.position_marginal(), Pz, atol=1e-12)
    np.testing.assert_allclose(W.momentum_marginal(), Qp, atol=1e-12)


def test_stationary_marginal_variance():
    z, Pz, _, _ = marginals(stationary_chord(GridSpec.square(257, 5.0), 5.0))
    np.testing.assert_allclose(Pz, np.exp(-z**2 / 10) / math.sqrt(10 * math.pi), atol=1e-10)


def test_wigner_file(tmp_path):
    W = wigner(coherent_state(GridSpec.square(33, 6.0)))
    write_wigner(W, tmp_path / "w.wig")
    values, zm, pm, tau, n = read_real_grid(tmp_path / "w.wig")
    assert values.tobytes() == W.values.tobytes()
    assert (zm, pm) == (W.z_max, W.p_max)


# -- cycles ---------------------------------------------------------------------------------

def test_constant_series_is_equilibrium():
    cs = cycle_stats(np.full((30, 2), 5.0), 4.0)
    assert cs.E_qst == 5.0 and cs.heat_flux == 0.0 and cs.converged


def test_sawtooth_heat_flux():
    series = np.tile([5.0, 6.0], (40, 1))
    cs = cycle_stats(series, 4.0, window=10)
    assert cs.heat_flux == pytest.approx(4 / (2 * math.pi), abs=1e-15)
    assert cs.heat_flux == pytest.approx(0.6366, abs=1e-4)
    assert cs.E_qst == pytest.approx(5.5)


def test_drifting_series_not_converged():
    n = np.arange(40)
    series = np.column_stack([5 + 0.1 * n, 5.5 + 0.1 * n])
    assert not cycle_stats(series, 4.0, window=10).converged


def test_cycle_stats_needs_data():
    with pytest.raises(ValueError, match="insufficient"):
        cycle_stats(np.ones((4, 2)), 4.0)
    with pytest.raises(ValueError):
        cycle_stats(np.ones((10, 3)), 4.0)


def test_series_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    rows = [[n, n * 1.5707963267948966] + list(rng.normal(size=7)) for n in range(1, 6)]
    write_series_csv(tmp_path / "s.csv", rows)
    back = read_series_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back, np.array(rows))
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == ",".join(CSV_HEADER)
