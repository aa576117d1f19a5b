import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cocycle_lab import analytic as an
from cocycle_lab import ergodic as eg
from cocycle_lab.errors import OrbitHit, QuadratureOverflow

W = (math.sqrt(5) - 1) / 2


def test_birkhoff_trivial_cases():
    assert eg.birkhoff_deviation(an.constant(3.0), 0.2, 50, W) == pytest.approx(0.0, abs=1e-12)
    loga = lambda x: np.full(np.shape(x), math.log(2.0))  # noqa: E731
    assert eg.birkhoff_deviation(loga, 0.2, 50, W) == pytest.approx(0.0, abs=1e-12)


def test_birkhoff_closed_form(rng):
    u = an.AnalyticObservable(np.arange(-3, 4), rng.normal(size=7) + 1j * rng.normal(size=7))
    xs = rng.random(50)
    a = eg.birkhoff_sum(u, xs, 300, W)
    b = eg.birkhoff_closed_form(u, xs, 300, W)
    assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("zeta", [0.5, 0.3 + 0.1j, -0.2 + 0.4j, 1.3 - 0.05j, 0.0, 1.0, 0.7j])
def test_I_zeta_against_quadrature(zeta):
    assert eg.I_zeta(zeta) == pytest.approx(eg.I_zeta_quad(zeta), abs=1e-10)


def test_I_half():
    assert eg.I_zeta(0.5) == pytest.approx(-1 + math.log(0.5), abs=1e-14)


def test_F_q_single_term():
    x, z = 0.4, 0.3 + 0.2j
    assert eg.F_q([x], z, 1, W)[0] == pytest.approx(math.log(abs(x - z)))


def test_F_q_orbit_hit():
    with pytest.raises(OrbitHit):
        eg.F_q([0.25], 0.25, 3, W)


def test_fq_bound_golden(golden, rng):
    qs = golden.denominators
    for s in range(4, 9):
        for x in rng.random(20):
            r = eg.fq_zeta(float(x), 0.3 + 0.05j, qs[s], golden, s=s)
            assert r.deviation <= r.bound


def test_exp_moment_trivial():
    assert eg.exp_moment(0.3, 50, W, 0.0).value == 1.0
    assert eg.exp_moment(0.3, 0, W, 1.0).value == 1.0


def test_exp_moment_monotone(golden):
    q7 = golden.denominators[6]
    a = eg.exp_moment(0.3 + 0.1j, q7, golden, 0.01)
    b = eg.exp_moment(0.3 + 0.1j, q7, golden, 0.02)
    assert math.isfinite(a.value) and 1.0 <= a.value <= b.value


def test_exp_moment_overflow():
    with pytest.raises(QuadratureOverflow):
        eg.exp_moment(0.3, 1000, W, 1e4)


def test_measure_estimates():
    s = eg.Sampler("stratified-jitter", 60_000, 1)
    m = eg.measure_estimate(lambda x: np.cos(2 * np.pi * x) > 0.5, s)
    assert m.estimate == pytest.approx(1 / 3, abs=2 / s.count)
    m = eg.measure_estimate(lambda x: np.zeros(x.shape, bool), s)
    assert m.estimate == 0 and m.ci_hi <= 3.7 / s.count
    g = eg.Sampler("grid", 4096)
    m = eg.measure_estimate(lambda x: (x < 0.25) | (x > 0.75), g)
    assert m.estimate == pytest.approx(0.5, abs=1 / 4096)


def test_sampler_strata_and_determinism():
    a = eg.Sampler("stratified-jitter", 50_000, 7).points()
    b = eg.Sampler("stratified-jitter", 50_000, 7).points()
    assert np.array_equal(a, b)
    assert np.all(np.floor(a * 50_000) == np.arange(50_000))


@given(st.integers(0, 1000), st.integers(1, 10**6))
def test_clopper_pearson_brackets(hits, extra):
    n = hits + extra
    lo, hi = eg.clopper_pearson(hits, n)
    assert 0 <= lo <= hits / n <= hi <= 1


def test_ldt_birkhoff_constant():
    rep = eg.ldt_experiment("birkhoff", None, 100, [0.01, 0.1], eg.Sampler("grid", 2000), "nL", u=an.constant(1.0), omega=W)
    assert all(e == 0 for e in rep.estimates)


def test_ldt_birkhoff_decays():
    u = an.amo_potential(0.5)
    rep = eg.ldt_experiment("birkhoff", None, 34, [0.001, 0.005, 0.01], eg.Sampler("grid", 4000), u=u, omega=W)
    assert rep.nonincreasing


def test_ldt_matrix_runs(amo):
    rep = eg.ldt_experiment("matrix", amo, 64, [0.02, 0.05, 0.1], eg.Sampler("stratified-jitter", 4096, 3))
    assert rep.nonincreasing
    assert len(rep.csv_rows()) == 3


def test_bmo_examples():
    assert eg.bmo_estimate(np.zeros(1 << 10), 10).value == 0
    ind = (np.arange(1 << 10) < (1 << 9)).astype(float)
    b = eg.bmo_estimate(ind, 10)
    assert b.value == pytest.approx(0.5) and b.depth == 0


def test_bmo_cosine_stable():
    def cosb(d, sd):
        N = 1 << d
        return eg.bmo_estimate(np.cos(2 * np.pi * (np.arange(N) + 0.5) / N), d, sd).value

    assert cosb(14, 16) == pytest.approx(cosb(16, 16), abs=1e-3)
    assert cosb(14, 16) == pytest.approx(2 / math.pi, abs=1e-3)


def test_john_nirenberg_fit(amo):
    from cocycle_lab.determinant import log_det_values

    xs = (np.arange(1 << 12) + 0.5) / (1 << 12)
    f, _ = log_det_values(amo, xs, 64)
    b = eg.bmo_estimate(f, 12, 8)
    fit = eg.john_nirenberg_fit(f, b.value)
    assert fit.c > 0


def test_small_det_thresholds(amo):
    s = eg.Sampler("grid", 4096)
    assert eg.small_det_measure(amo, 6, 1e6, s).measure.estimate == 0
    assert eg.small_det_measure(amo, 6, -1e6, s).measure.estimate == 1
