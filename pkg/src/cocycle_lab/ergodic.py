"""Birkhoff sums, the F_{q,zeta} / I(zeta) machinery, Monte Carlo measure
estimates of exceptional sets, exponential moments and BMO estimates."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import kernels, parallel
from .analytic import AnalyticObservable
from .cocycle import CocycleParams, finite_lyapunov, log_norms
from .determinant import LOG_FLOOR, log_det_values
from .errors import DegenerateFit, OrbitHit, QuadratureOverflow
from .freq import circle_distance

ORBIT_FLOOR = 1e-300
SAMPLER_KINDS = ("grid", "stratified-jitter")
OBSERVABLES = ("birkhoff", "matrix", "determinant")
CENTERINGS = ("empirical-mean", "nL")
SAMPLE_BLOCK = 1 << 14

PREDICTED_DECAY = {
    "birkhoff": "mes < exp(-c delta n) once delta > delta0^n",
    "matrix": "mes < exp(-c1 delta n) + exp(-c2 delta^2 n)",
    "determinant": "mes < exp(-c delta / delta0^n)",
}


# ---------------------------------------------------------------- Birkhoff


def birkhoff_sum(u, xs, n: int, omega) -> np.ndarray:
    """sum_{k=1..n} u(x + k w), vectorized over x, by direct summation."""
    w = float(omega)
    xs = np.asarray(xs, dtype=float)
    acc = np.zeros(xs.shape, dtype=complex)
    for k in range(1, n + 1):
        acc += np.asarray(u(xs + k * w), dtype=complex)
    return acc


def birkhoff_closed_form(u: AnalyticObservable, xs, n: int, omega) -> np.ndarray:
    """Same sum for a trigonometric polynomial via the geometric series
    sum_{j=1..n} e(k j w) = e(k w) (e(k n w) - 1) / (e(k w) - 1)."""
    w = float(omega)
    xs = np.asarray(xs, dtype=float)
    out = np.zeros(xs.shape, dtype=complex)
    for k, c in zip(u.ks, u.cs):
        if k == 0:
            out += n * c
            continue
        z = cmath.exp(2j * math.pi * k * w)
        g = z * (z**n - 1.0) / (z - 1.0)
        out += c * g * np.exp(2j * math.pi * k * xs)
    return out


def birkhoff_deviation(u, x, n: int, omega, mean: complex | None = None):
    """|sum_{k=1..n} u(x + k w) - n <u>|.

    ``mean`` defaults to the zeroth Fourier coefficient for trigonometric
    polynomials and to a 2^14-point grid average for other callables.
    """
    if mean is None:
        if isinstance(u, AnalyticObservable):
            mean = u.mean
        else:
            g = (np.arange(1 << 14) + 0.5) / (1 << 14)
            mean = complex(np.mean(np.asarray(u(g), dtype=complex)))
    s = birkhoff_sum(u, x, n, omega)
    out = np.abs(s - n * mean)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- F and I


def _xlogx(z: complex) -> complex:
    return 0j if z == 0 else z * cmath.log(z)


def I_zeta(zeta: complex) -> float:
    """int_0^1 log|y - zeta| dy = Re[(1-zeta) log(1-zeta) + zeta log(-zeta)] - 1.

    This is t log t - t between t = -zeta and 1 - zeta along a horizontal
    segment, which never crosses the principal cut.  Writing log(zeta) for
    log(-zeta) is off by pi Im(zeta) once zeta leaves the real axis.
    """
    z = complex(zeta)
    return float((_xlogx(1.0 - z) - _xlogx(-z)).real - 1.0)


def I_zeta_quad(zeta: complex) -> float:
    """Adaptive-quadrature value of I(zeta), splitting at Re zeta."""
    z = complex(zeta)
    pts = [z.real] if 0.0 < z.real < 1.0 else None
    val, _ = integrate.quad(lambda y: math.log(abs(y - z)), 0.0, 1.0, points=pts, limit=200, epsabs=1e-13, epsrel=1e-13)
    return float(val)


def F_q(xs, zeta: complex, q: int, omega) -> np.ndarray:
    """F_{q,zeta}(x) = sum_{0<=k<q} log|{x + k w} - zeta|, vectorized over x."""
    w = float(omega)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    acc = np.zeros(xs.shape)
    for k in range(q):
        d = np.abs(np.mod(xs + k * w, 1.0) - zeta)
        if np.any(d < ORBIT_FLOOR):
            raise OrbitHit(f"orbit point x + {k} w meets zeta", k=k)
        acc += np.log(d)
    return acc


def orbit_distance(x: float, omega, n: int) -> float:
    """min_{0<=k<n} ||x + k w|| (distance on the circle)."""
    ks = np.arange(n)
    return float(np.min(circle_distance(float(x) + ks * float(omega))))


@dataclass(frozen=True)
class FqReport:
    F: float
    I: float
    deviation: float  # |F - q I|
    bound: float | None  # C l log q_s + |log D| + 2 l log q_{s+1}
    terms: dict = field(default_factory=dict)


def fq_zeta(
    x: float,
    zeta: complex,
    q: int,
    omega,
    *,
    l: int = 1,
    s: int | None = None,
    C: float = 1.0,
) -> FqReport:
    """F_{q,zeta}(x), I(zeta) and, when q = l q_s, the bound on |F - q I|.

    D(x - xi, -w, l q_s) is the distance from x - xi to {-m w : m < l q_s}
    on the circle.  ``C`` is the absolute constant of the bound; the default
    is the calibrated value documented in the README.
    """
    F = float(F_q([x], zeta, q, omega)[0])
    I = I_zeta(zeta)
    dev = abs(F - q * I)
    bound = None
    terms: dict = {}
    freq = omega if hasattr(omega, "denominators") else None
    if freq is not None:
        qs = freq.denominators
        if s is None:
            cand = [i for i, qq in enumerate(qs) if l * qq == q and i + 1 < len(qs)]
            s = cand[-1] if cand else None
        if s is not None:
            if l * qs[s] != q:
                raise ValueError(f"q = {q} is not l * q_s = {l} * {qs[s]}")
            Dv = orbit_distance(float(x) - complex(zeta).real, -float(omega), q)
            terms = {
                "C_l_log_qs": C * l * math.log(qs[s]),
                "abs_log_D": abs(math.log(Dv)) if Dv > 0 else math.inf,
                "two_l_log_qs1": 2.0 * l * math.log(qs[s + 1]),
                "s": s,
                "C": C,
            }
            bound = terms["C_l_log_qs"] + terms["abs_log_D"] + terms["two_l_log_qs1"]
    return FqReport(F, I, dev, bound, terms)


@dataclass(frozen=True)
class ExpMoment:
    value: float
    overflow: bool
    bound: float | None  # exp(C_hat sigma n delta0)
    log_value: float


def exp_moment(
    zeta: complex,
    n: int,
    omega,
    sigma: float,
    grid: int = 1 << 12,
    *,
    C_hat: float | None = None,
    delta0: float | None = None,
) -> ExpMoment:
    """Midpoint-rule value of int_0^1 exp(sigma |F_{n,zeta}(x) - n I(zeta)|) dx."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if grid < 1 << 10:
        raise ValueError("grid must be >= 2^10")
    bound = None
    if C_hat is not None and delta0 is not None:
        bound = math.exp(C_hat * sigma * n * delta0)
    if sigma == 0 or n == 0:
        return ExpMoment(1.0, False, bound, 0.0)
    xs = (np.arange(grid) + 0.5) / grid
    dev = np.abs(F_q(xs, zeta, n, omega) - n * I_zeta(zeta))
    e = sigma * dev
    top = float(np.max(e))
    logv = top + math.log(float(np.mean(np.exp(e - top))))
    if logv > 709.0:
        raise QuadratureOverflow(f"log of the exponential moment is {logv:.1f}")
    return ExpMoment(math.exp(logv), False, bound, logv)


# ---------------------------------------------------------------- sampling


@dataclass(frozen=True)
class Sampler:
    kind: str = "stratified-jitter"
    count: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler kind must be one of {SAMPLER_KINDS}")
        if self.count < 1000:
            raise ValueError("sampler count must be >= 1000")

    def points(self) -> np.ndarray:
        """Sample phases; the i-th point lies in [i/N, (i+1)/N)."""
        N = self.count
        if self.kind == "grid":
            return (np.arange(N) + 0.5) / N

        def work(s, e, b):
            rng = parallel.block_rng(self.seed, b)
            return (np.arange(s, e) + rng.random(e - s)) / N

        return parallel.concat(parallel.block_map(work, N, block=SAMPLE_BLOCK, threads=1))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "count": self.count, "seed": self.seed}


@dataclass(frozen=True)
class MeasureEstimate:
    estimate: float
    ci_lo: float
    ci_hi: float
    hits: int
    count: int
    kind: str

    @property
    def ci_width(self) -> float:
        return self.ci_hi - self.ci_lo


def clopper_pearson(hits: int, count: int, level: float = 0.95) -> tuple:
    a = 1.0 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(a / 2, hits, count - hits + 1))
    hi = 1.0 if hits == count else float(stats.beta.ppf(1 - a / 2, hits + 1, count - hits))
    return lo, hi


def _estimate_from_hits(hits: int, sampler: Sampler) -> MeasureEstimate:
    N = sampler.count
    est = hits / N
    if sampler.kind == "grid":
        lo, hi = max(0.0, est - 1.0 / N), min(1.0, est + 1.0 / N)
    else:
        lo, hi = clopper_pearson(hits, N)
    return MeasureEstimate(est, lo, hi, int(hits), N, sampler.kind)


def measure_estimate(predicate, sampler: Sampler, threads: int | None = None) -> MeasureEstimate:
    """Lebesgue measure of {x in T : predicate(x)} from ``sampler``.

    ``predicate`` maps an array of phases to a boolean array.
    """
    xs = sampler.points()

    def work(s, e, _i):
        return int(np.count_nonzero(predicate(xs[s:e])))

    hits = sum(parallel.block_map(work, xs.size, block=SAMPLE_BLOCK, threads=threads))
    return _estimate_from_hits(hits, sampler)


# ---------------------------------------------------------------- LDT


@dataclass
class DeviationReport:
    observable: str
    n: int
    delta_grid: list
    measures: list  # MeasureEstimate per delta
    sampler: dict
    centering: str
    center: float
    fit: dict | None  # slope, intercept, r_squared on positive measures
    censored: list  # deltas whose estimate is 0
    predicted_decay: str
    extra: dict = field(default_factory=dict)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([m.estimate for m in self.measures])

    def strictly_decreasing(self) -> bool:
        e = self.estimates
        return bool(np.all(np.diff(e) < 0))

    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.estimates) <= 0))

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "n": self.n,
            "delta_grid": [float(d) for d in self.delta_grid],
            "measures": [
                {"delta": float(d), "measure": m.estimate, "ci_lo": m.ci_lo, "ci_hi": m.ci_hi, "hits": m.hits}
                for d, m in zip(self.delta_grid, self.measures)
            ],
            "sampler": self.sampler,
            "centering": self.centering,
            "center": self.center,
            "fit": self.fit,
            "censored": [float(d) for d in self.censored],
            "predicted_decay": self.predicted_decay,
            "extra": self.extra,
        }

    def csv_rows(self) -> list:
        return [(float(d), m.estimate, m.ci_lo, m.ci_hi) for d, m in zip(self.delta_grid, self.measures)]


def fit_log_measure(deltas, measures) -> dict | None:
    """Least squares of log(measure) on delta over the positive entries."""
    d = np.asarray(deltas, dtype=float)
    m = np.asarray(measures, dtype=float)
    pos = m > 0
    if pos.sum() < 2:
        return None
    r = stats.linregress(d[pos], np.log(m[pos]))
    r2 = float(r.rvalue**2) if pos.sum() > 2 or r.rvalue != 0 else 1.0
    return {"slope": float(r.slope), "intercept": float(r.intercept), "r_squared": r2, "points": int(pos.sum())}


def observable_values(
    observable: str,
    params: CocycleParams | None,
    xs: np.ndarray,
    n: int,
    *,
    u=None,
    omega=None,
    variant: str = "plain",
    threads: int | None = None,
) -> np.ndarray:
    if observable == "birkhoff":
        if u is None:
            raise ValueError("birkhoff observable needs u")
        w = omega if omega is not None else params.omega
        return np.real(birkhoff_sum(u, xs, n, w))
    if observable == "matrix":
        return log_norms(params, xs, n, variant, threads=threads)
    if observable == "determinant":
        return log_det_values(params, xs, n, threads)[0]
    raise ValueError(f"observable must be one of {OBSERVABLES}")


def ldt_experiment(
    observable: str,
    params: CocycleParams | None,
    n: int,
    delta_grid,
    sampler: Sampler,
    centering: str = "empirical-mean",
    *,
    u=None,
    omega=None,
    variant: str = "plain",
    ref_n: int | None = None,
    grid_log2: int = 11,
    threads: int | None = None,
) -> DeviationReport:
    """mes{x : |obs(x) - center| > n delta} for each delta.

    ``centering="nL"`` uses n <u> for Birkhoff sums, n L_{ref_n} for the
    matrix log-norm and n L_{ref_n}^a for log|f_n^a|.
    """
    delta_grid = [float(d) for d in delta_grid]
    if any(b <= a for a, b in zip(delta_grid, delta_grid[1:])):
        raise ValueError("delta_grid must be increasing")
    if centering not in CENTERINGS:
        raise ValueError(f"centering must be one of {CENTERINGS}")
    if observable == "determinant" and n < 8:
        raise ValueError("determinant observable needs n >= 8")
    xs = sampler.points()
    vals = observable_values(observable, params, xs, n, u=u, omega=omega, variant=variant, threads=threads)
    if centering == "empirical-mean":
        center = float(np.mean(vals))
    elif observable == "birkhoff":
        mean = u.mean if isinstance(u, AnalyticObservable) else complex(np.mean(u((np.arange(1 << 14) + 0.5) / (1 << 14))))
        center = float(n * np.real(mean))
    else:
        var = "a" if observable == "determinant" else variant
        center = n * finite_lyapunov(params, ref_n or n, grid_log2, var, threads).value
    dev = np.abs(vals - center)
    measures = [_estimate_from_hits(int(np.count_nonzero(dev > n * d)), sampler) for d in delta_grid]
    est = [m.estimate for m in measures]
    censored = [d for d, e in zip(delta_grid, est) if e == 0]
    return DeviationReport(
        observable,
        int(n),
        delta_grid,
        measures,
        sampler.to_dict(),
        centering,
        center,
        fit_log_measure(delta_grid, est),
        censored,
        PREDICTED_DECAY[observable],
        {"all_censored": len(censored) == len(delta_grid), "clamped": int(np.count_nonzero(vals <= LOG_FLOOR))},
    )


# ---------------------------------------------------------------- BMO


@dataclass(frozen=True)
class BMOEstimate:
    value: float
    depth: int
    max_depth: int


def bmo_estimate(samples, max_depth: int, stride_div: int = 0) -> BMOEstimate:
    """Largest mean oscillation over dyadic-length windows at every cyclic
    translate (every ``L // stride_div`` samples if stride_div > 0)."""
    f = np.ascontiguousarray(samples, dtype=float)
    if max_depth < 8:
        raise ValueError("max_depth must be >= 8")
    if f.size != 1 << max_depth:
        raise ValueError("need exactly 2^max_depth samples")
    best, dep = kernels.dyadic_oscillation(f, int(max_depth), int(stride_div))
    return BMOEstimate(float(best), int(dep), int(max_depth))


@dataclass(frozen=True)
class JohnNirenbergFit:
    C: float
    c: float
    r_squared: float
    gammas: np.ndarray
    measures: np.ndarray


def john_nirenberg_fit(samples, bmo: float, gammas=None) -> JohnNirenbergFit:
    """Fit mes{|f - <f>| > gamma} = C exp(-c gamma / bmo) on the positive tail."""
    f = np.asarray(samples, dtype=float)
    if not bmo > 0:
        raise DegenerateFit("BMO estimate must be positive")
    dev = np.abs(f - np.mean(f))
    if gammas is None:
        gammas = np.linspace(0.0, float(np.quantile(dev, 0.999)), 24)[1:]
    gammas = np.asarray(gammas, dtype=float)
    mes = np.array([np.mean(dev > g) for g in gammas])
    pos = mes > 0
    if pos.sum() < 3:
        raise DegenerateFit("too few positive tail measures")
    r = stats.linregress(gammas[pos] / bmo, np.log(mes[pos]))
    return JohnNirenbergFit(float(math.exp(r.intercept)), float(-r.slope), float(r.rvalue**2), gammas, mes)


# ---------------------------------------------------------------- small determinants


@dataclass(frozen=True)
class SmallDetEstimate:
    measure: MeasureEstimate
    l: int
    threshold_exponent: float
    reference: float  # exp(-l)

    @property
    def holds(self) -> bool:
        return self.measure.estimate <= self.reference + self.measure.ci_width


def small_det_measure(
    params: CocycleParams,
    l: int,
    threshold_exponent: float | None = None,
    sampler: Sampler | None = None,
    threads: int | None = None,
) -> SmallDetEstimate:
    """mes{x : |f_l^a(x)| <= exp(-threshold_exponent)} (default l^3)."""
    if l < 4:
        raise ValueError("l must be >= 4")
    thr = float(l**3 if threshold_exponent is None else threshold_exponent)
    sampler = sampler or Sampler("stratified-jitter", 1_000_000, 0)
    vals, _ = log_det_values(params, sampler.points(), l, threads, clamp=False)
    hits = int(np.count_nonzero(vals <= -thr))
    return SmallDetEstimate(_estimate_from_hits(hits, sampler), int(l), thr, math.exp(-l))
