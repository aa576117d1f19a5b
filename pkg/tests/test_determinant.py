import math

import numpy as np
import pytest

from cocycle_lab import analytic as an
from cocycle_lab import determinant as dt
from cocycle_lab.cocycle import CocycleParams


def test_small_n_closed_forms(complex_jacobi):
    P, x, w = complex_jacobi, 0.21, complex_jacobi.w
    f1, f2 = dt.det_recurrence(P, x, 2)
    assert f1.value == pytest.approx(complex(P.v(x + w)) - P.E, rel=1e-14)
    expect = (complex(P.v(x + w)) - P.E) * (complex(P.v(x + 2 * w)) - P.E) - abs(complex(P.a(x + 2 * w))) ** 2
    assert f2.value == pytest.approx(expect, rel=1e-13)


def test_dense_oracle_amo(golden, rng):
    P = CocycleParams(an.constant(1.0), an.amo_potential(2.0), 0.0, golden)
    for x in rng.random(20):
        got = dt.det_last(P, x, 6).value
        ref = dt.dense_det(P, x, 6)
        assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


def test_shifted_det(harper):
    x = 0.4
    assert dt.shifted_det(harper, x, 5, 5).value == pytest.approx(complex(harper.v(x + 5 * harper.w)) - harper.E)
    assert dt.shifted_det(harper, x, 1, 9).value == pytest.approx(dt.det_recurrence(harper, x, 9)[-1].value)
    ref = dt.det_last(harper, x + 2 * harper.w, 5)
    assert dt.shifted_det(harper, x, 3, 7).value == pytest.approx(ref.value, rel=1e-12)


def test_identity_free_case(free):
    r = dt.det_identity_check(free, 0.3, 3)
    assert r.log_residual == 0.0 and r.phase_residual <= 1e-15


@pytest.mark.parametrize("name,n", [("amo", 100), ("harper", 50), ("complex_jacobi", 60)])
def test_identity(request, name, n, rng):
    P = request.getfixturevalue(name)
    for x in rng.random(100 if name == "amo" else 30):
        r = dt.det_identity_check(P, x, n)
        assert r.log_residual <= 1e-8


def test_normalized_unit_weight(amo):
    p, u = dt.normalized_dets(amo, 0.3, 20)
    f = dt.det_last(amo, 0.3, 20)
    assert p.log_mag == pytest.approx(f.log_mag) and u.log_mag == pytest.approx(f.log_mag)


def test_normalized_constant_weight(golden):
    P = CocycleParams(an.constant(2.0), an.amo_potential(1.0), 0.1, golden)
    p, _ = dt.normalized_dets(P, 0.3, 4)
    assert p.log_mag == pytest.approx(dt.det_last(P, 0.3, 4).log_mag - 4 * math.log(2), rel=1e-13)


def test_unimodular_phase_invariance(harper):
    rot = harper.with_weight(harper.a.scaled(np.exp(0.7j)))
    for x in (0.1, 0.55):
        a = dt.normalized_dets(harper, x, 30)[1]
        b = dt.normalized_dets(rot, x, 30)[1]
        assert a.log_mag == pytest.approx(b.log_mag, abs=1e-10)


def test_diagonal_dominant_mean(golden):
    P = CocycleParams(an.constant(1.0), an.constant(0.0), 100.0, golden)
    s = dt.log_det_stats(P, 10, 9)
    assert s.mean == pytest.approx(10 * math.log(100), rel=0.02)


def test_mean_tracks_n_la(amo):
    gaps = [abs(dt.log_det_stats(amo, n, 10).gap) for n in (128, 256, 512)]
    assert max(gaps) <= 10


def test_log_det_floor(amo):
    vals, low = dt.log_det_values(amo, np.array([0.1, 0.2]), 50)
    assert low == 0 and np.all(vals > dt.LOG_FLOOR)


def test_zero_determinant_is_not_an_error(free):
    # f_2 = -1 + 0 ... free case f_n(x) = U_n(-E/2): f_1(E=0) = 0
    f = dt.det_recurrence(free, 0.0, 3)
    assert f[0].is_zero and f[0].value == 0
    assert f[1].value == pytest.approx(-1.0)
