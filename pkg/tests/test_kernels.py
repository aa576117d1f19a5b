"""The numba kernels and their numpy twins agree."""

import numpy as np
import pytest

from cocycle_lab import kernels as K
from cocycle_lab.cocycle import grid_points


def _args(P):
    return (P.w, complex(P.E), *P.kernel_args())


@pytest.mark.parametrize("variant", ["a", "plain", "unimodular"])
@pytest.mark.parametrize("every", [1, 5])
def test_transfer_product(complex_jacobi, variant, every):
    xs = grid_points(7)
    code = K.VARIANT_CODES[variant]
    e1, s1, d1 = K.transfer_product_nb(xs, *_args(complex_jacobi), 77, code, every)
    e2, s2, d2 = K.transfer_product_np(xs, *_args(complex_jacobi), 77, code, every)
    l1 = K.spectral_norm2_nb(e1) + s1
    l2 = K.spectral_norm2_np(e2) + s2
    assert np.max(np.abs(l1 - l2)) < 1e-11
    assert np.max(np.abs(d1 - d2)) < 1e-11


def test_determinants(harper):
    xs = grid_points(7)
    r1 = K.det_lastpair_nb(xs, *_args(harper), 90)
    r2 = K.det_lastpair_np(xs, *_args(harper), 90)
    assert np.max(np.abs(r1[0] - r2[0])) < 1e-11
    assert np.max(np.abs(r1[1] - r2[1])) < 1e-9
    s1 = K.det_sequence_nb(0.3, *_args(harper), 40)
    s2 = K.det_sequence_np(0.3, *_args(harper), 40)
    assert np.max(np.abs(s1[0] - s2[0])) < 1e-11


def test_sturm_and_bisection(rng):
    d = rng.normal(size=30)
    b2 = rng.random(29) + 0.1
    lams = np.linspace(-5, 5, 41)
    c1 = np.array([K.sturm_count_nb(d, b2, float(l)) for l in lams])
    assert np.array_equal(c1, K.sturm_count_np(d, b2, lams))
    e1 = K.bisect_eigs_nb(d, b2, -10.0, 10.0, 1e-13)
    e2 = K.bisect_eigs_np(d, b2, -10.0, 10.0, 1e-13)
    assert np.max(np.abs(e1 - e2)) < 1e-12


def test_dyadic_oscillation(rng):
    f = rng.normal(size=256)
    a = K.dyadic_oscillation_nb(f, 6, 0)
    b = K.dyadic_oscillation_np(f, 6, 0)
    assert a[0] == pytest.approx(b[0], rel=1e-12) and a[1] == b[1]
