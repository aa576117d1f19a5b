import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cocycle_lab import analytic as an
from cocycle_lab.errors import OutsideAnnulus


def test_cosine_zero():
    assert abs(an.evaluate(an.amo_potential(1.0), 0.25)) < 1e-15


def test_single_mode_off_axis():
    f = an.AnalyticObservable(np.array([1]), np.array([1.0 + 0j]), rho=0.2)
    assert abs(an.evaluate(f, 0.0, 0.1)) == pytest.approx(math.exp(-0.2 * math.pi), rel=1e-14)


def test_harper_matches_direct_formula(rng):
    om = (math.sqrt(5) - 1) / 2
    l1, l2, l3 = 0.5, 1.0, 0.3
    a = an.harper_weight(l1, l2, l3, om)
    xs = rng.random(200)
    s = xs + om / 2
    direct = l3 * np.exp(-2j * np.pi * s) + l2 + l1 * np.exp(2j * np.pi * s)
    assert np.max(np.abs(an.evaluate(a, xs) - direct)) < 1e-14


def test_conj_dual_single_mode():
    d = an.conj_dual(an.AnalyticObservable(np.array([1]), np.array([1.0 + 0j])))
    assert d.coeff(-1) == 1 and d.coeff(1) == 0


def test_conj_dual_of_real_valued_is_itself():
    v = an.amo_potential(2.0)
    d = an.conj_dual(v)
    assert np.array_equal(d.ks, v.ks) and np.array_equal(d.cs, v.cs)


def test_conj_dual_random(rng):
    ks = np.arange(-6, 7)
    cs = rng.normal(size=ks.size) + 1j * rng.normal(size=ks.size)
    a = an.AnalyticObservable(ks, cs)
    xs = rng.random(1000)
    err = np.abs(an.evaluate(an.conj_dual(a), xs) - np.conj(an.evaluate(a, xs)))
    assert err.max() <= 1e-13 * np.abs(cs).sum()


def test_sup_norm_examples():
    b, est = an.sup_norm_annulus(an.AnalyticObservable(np.array([1]), np.array([1.0 + 0j])), 0.1)
    assert b == pytest.approx(math.exp(0.2 * math.pi), rel=1e-14)
    assert est <= b
    b, est = an.sup_norm_annulus(an.constant(-3.0), 0.5)
    assert b == pytest.approx(3.0) and est == pytest.approx(3.0)
    b, est = an.sup_norm_annulus(an.amo_potential(1.0), 0.05)
    assert b == pytest.approx(2 * math.exp(0.1 * math.pi), rel=1e-14)
    # |2 cos 2 pi (x + i y)| peaks at 2 cosh(2 pi y), well inside the triangle bound
    assert est == pytest.approx(2 * math.cosh(0.1 * math.pi), rel=1e-6)
    assert est <= b


def test_outside_annulus():
    f = an.amo_potential(1.0, rho=0.1)
    with pytest.raises(OutsideAnnulus):
        an.sup_norm_annulus(f, 0.2)
    with pytest.raises(OutsideAnnulus):
        an.evaluate(f, 0.0, 0.1)


@given(hnp.arrays(np.complex128, st.integers(1, 33),
                  elements=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)))
def test_parseval(cs):
    ks = np.arange(cs.size) - cs.size // 2
    f = an.AnalyticObservable(ks, cs)
    xs = np.arange(4096) / 4096
    lhs = float(np.mean(np.abs(an.evaluate(f, xs)) ** 2))
    rhs = float(np.sum(np.abs(cs) ** 2))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


def test_torus_zeros_of_cosine():
    z = an.amo_potential(1.0).torus_zeros()
    assert np.allclose(z, [0.25, 0.75], atol=1e-9)


def test_harper_zero_free_when_dominant_middle():
    om = (math.sqrt(5) - 1) / 2
    assert an.harper_weight(0.5, 1.0, 0.3, om).torus_zeros().size == 0


def test_mean_log_abs_against_grid():
    a = an.AnalyticObservable(np.array([0, 1]), np.array([1.5, 0.5j]))
    xs = (np.arange(1 << 14) + 0.5) / (1 << 14)
    assert a.mean_log_abs() == pytest.approx(np.mean(np.log(np.abs(an.evaluate(a, xs)))), abs=1e-10)
    # a root outside the unit disk contributes log|root|
    b = an.AnalyticObservable(np.array([0, 1]), np.array([0.5, 1.0]))
    assert b.mean_log_abs() == pytest.approx(0.0, abs=1e-14)


def test_from_spec_forms():
    assert an.from_spec(2.0).coeff(0) == 2
    f = an.from_spec([[1, 0.5, 0.0], [-1, 0.5, 0.0]])
    assert an.evaluate(f, 0.0) == pytest.approx(1.0)
    g = an.from_spec({"preset": "amo-potential", "lambda": 5.0})
    assert an.evaluate(g, 0.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        an.from_spec("nope")
