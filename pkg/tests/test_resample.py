import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickbath.dissipative import evolution_matrix
from kickbath.grid import GridSpec
from kickbath.resample import (BilinearResampler, ShearResampler, factor_unimodular,
                               make_resampler, _ROTATIONS, _shear_matrix)


def gaussian(k, s, width=1.0, a=0.7, b=-0.4):
    return np.exp(-(k**2 + s**2) / (4 * width) + 1j * (a * k + b * s))


def mapped(B, g):
    K, S = g.mesh()
    return B[0, 0] * K + B[0, 1] * S, B[1, 0] * K + B[1, 1] * S


@pytest.mark.parametrize("B", [
    evolution_matrix(0.1, -math.pi / 2),
    evolution_matrix(0.1, -0.3),
    evolution_matrix(0.0, -2.0),
    np.array([[1.3, 0.2], [-0.4, 0.8]]),
])
def test_spectral_exact_on_band_limited_gaussian(B):
    g = GridSpec.square(129, 12.0)
    K, S = g.mesh()
    f = gaussian(K, S)
    out, leaks = ShearResampler(g, B)(f)
    exact = gaussian(*mapped(B, g))
    assert np.max(np.abs(out - exact)) < 1e-12
    assert leaks == 0


def test_bilinear_second_order():
    B = evolution_matrix(0.1, -0.3)
    errs = []
    for n in (129, 257, 513):
        g = GridSpec.square(n, 12.0)
        K, S = g.mesh()
        out, _ = BilinearResampler(g, B)(gaussian(K, S))
        errs.append(np.max(np.abs(out - gaussian(*mapped(B, g)))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)
    assert errs[-1] < 1e-3


def test_identity_map_is_a_copy():
    g = GridSpec.square(33, 5.0)
    K, S = g.mesh()
    f = gaussian(K, S)
    for scheme in ("spectral", "bilinear"):
        out, leaks = make_resampler(scheme, g, np.eye(2))(f)
        np.testing.assert_array_equal(out, f)
        assert leaks == 0


def test_unknown_scheme():
    with pytest.raises(ValueError, match="unknown interpolation"):
        make_resampler("cubic", GridSpec.square(17, 2.0), np.eye(2))


def test_leak_counted_for_wide_state_only():
    g = GridSpec.square(65, 6.0)
    K, S = g.mesh()
    B = np.array([[1.5, 0.0], [0.0, 1.0]])  # stretches reads past the k edge
    narrow = gaussian(K, S, width=0.25)
    wide = gaussian(K, S, width=30.0)
    for cls in (ShearResampler, BilinearResampler):
        assert cls(g, B)(narrow)[1] == 0
        assert cls(g, B)(wide)[1] > 0


def test_leak_weight_suppresses_damped_nodes():
    g = GridSpec.square(65, 6.0)
    K, S = g.mesh()
    B = np.array([[1.5, 0.0], [0.0, 1.0]])
    wide = gaussian(K, S, width=30.0)
    assert BilinearResampler(g, B, weight=np.zeros(g.shape))(wide)[1] == 0


@given(st.floats(0.0, 1.9), st.floats(-6.0, 6.0))
@settings(max_examples=50)
def test_factorisation_reconstructs(beta, sigma):
    M = evolution_matrix(beta, sigma)
    R = M / math.sqrt(np.linalg.det(M))
    for quarter in (False, True):
        m, factors = factor_unimodular(R, quarter)
        P = _ROTATIONS[m].copy()
        for axis, e in factors:
            P = P @ _shear_matrix(axis, e)
        # near the identity the pivot is tiny and the factors lose about eps/|pivot|
        # relative accuracy; absolute coordinate errors stay far below a grid cell
        np.testing.assert_allclose(P, R, atol=1e-9)
        assert len(factors) <= 3
