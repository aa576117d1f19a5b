"""Jacobi cocycles: transfer matrices, finite-scale Lyapunov exponents,
polar directions and the Avalanche Principle.

Conventions.  With v_j = v(x + j w), a_j = a(x + j w), a~ the conjugate dual:

    weighted step   A_j = [[v_j - E, -a~_j], [a_{j+1}, 0]]
    plain step      A_j / a_{j+1}
    unimodular step plain step / |det plain step|^(1/2)

and M_n(x) = A_n ... A_1.  With this sign the top-left entry of the
weighted product is the Dirichlet determinant f_n^a(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, parallel
from .analytic import AnalyticObservable, conj_dual
from .errors import (
    DegenerateSingularValues,
    HypothesisDiff,
    HypothesisLarge,
    NearZeroWeight,
)
from .freq import Frequency, circle_distance

VARIANTS = ("a", "plain", "unimodular")
DEFAULT_EXCLUSION = 1e-8
MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True, eq=False)
class CocycleParams:
    a: AnalyticObservable
    v: AnalyticObservable
    E: complex
    omega: object  # Frequency or float
    exclusion_radius: float = DEFAULT_EXCLUSION
    a_dual: AnalyticObservable = field(init=False)
    a_zeros: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.a.is_zero:
            raise ValueError("the weight a must not vanish identically")
        if not self.v.is_real_valued(tol=1e-12 * max(1.0, self.v.l1_norm)):
            raise ValueError("the potential v must be real-valued")
        object.__setattr__(self, "a_dual", conj_dual(self.a))
        object.__setattr__(self, "a_zeros", self.a.torus_zeros())

    @property
    def w(self) -> float:
        return float(self.omega)

    @property
    def frequency(self) -> Frequency | None:
        return self.omega if isinstance(self.omega, Frequency) else None

    def with_energy(self, E) -> "CocycleParams":
        return CocycleParams(self.a, self.v, E, self.omega, self.exclusion_radius)

    def with_weight(self, a: AnalyticObservable) -> "CocycleParams":
        return CocycleParams(a, self.v, self.E, self.omega, self.exclusion_radius)

    def kernel_args(self):
        return (
            self.v.ks, self.v.cs,
            self.a.ks, self.a.cs,
            self.a_dual.ks, self.a_dual.cs,
        )

    @property
    def D(self) -> float:
        """Integral of log|a| over the torus."""
        return self.a.mean_log_abs()

    def near_zero_mask(self, xs, j_first: int, j_last: int) -> np.ndarray:
        """True where some x + j w (j_first <= j <= j_last) lies within the
        exclusion radius of a zero of a."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        bad = np.zeros(xs.shape, dtype=bool)
        if self.a_zeros.size == 0:
            return bad
        w = self.w
        for z in self.a_zeros:
            for j in range(j_first, j_last + 1):
                bad |= circle_distance(xs + j * w - z) < self.exclusion_radius
        return bad

    def describe(self) -> dict:
        return {
            "a": self.a.to_triples(),
            "v": self.v.to_triples(),
            "E": [float(np.real(self.E)), float(np.imag(self.E))],
            "omega": repr(self.w),
            "exclusion_radius": self.exclusion_radius,
        }


@dataclass(frozen=True)
class ScaledMatrix2:
    """exp(log_scale) * entries, with max |entry| normalized to 1.

    ``log_abs_det`` is log|det| of the represented matrix, accumulated from
    the step determinants (the entries alone lose it to cancellation).
    """

    entries: np.ndarray
    log_scale: float
    log_abs_det: float = float("nan")

    @property
    def log_norm(self) -> float:
        return float(kernels.spectral_norm2_np(self.entries[None])[0]) + self.log_scale

    def matrix(self) -> np.ndarray:
        return self.entries * math.exp(self.log_scale)

    def log_entry(self, i: int, j: int) -> tuple:
        """(log|entry|, phase) of one entry of the represented matrix."""
        e = complex(self.entries[i, j])
        if e == 0:
            return -math.inf, 1.0 + 0j
        return math.log(abs(e)) + self.log_scale, e / abs(e)

    @property
    def abs_det(self) -> float:
        return math.exp(self.log_abs_det)


def step_matrix(params: CocycleParams, j: int, x: float, variant: str = "a") -> np.ndarray:
    """Step A_j(x), computed by the same kernel code as ``transfer_product``."""
    code = _check_variant(variant)
    if j < 1:
        raise ValueError("j must be >= 1")
    if code != kernels.VARIANT_A:
        if params.near_zero_mask([x], j + 1, j + 1)[0]:
            raise NearZeroWeight(f"a(x + {j + 1} w) vanishes within the exclusion radius", x=x, j=j + 1)
        if code == kernels.VARIANT_UNIMODULAR and params.near_zero_mask([x], j, j)[0]:
            raise NearZeroWeight(f"a~(x + {j} w) vanishes", x=x, j=j)
    s00, s01, s10 = _steps(params, x, j, code)[j - 1]
    return np.array([[s00, s01], [s10, 0]], dtype=complex)


def _steps(params: CocycleParams, x: float, n: int, code: int) -> np.ndarray:
    return kernels.step_entries(float(x), params.w, complex(params.E), *params.kernel_args(), int(n), code)


def _check_variant(variant: str) -> int:
    if variant not in kernels.VARIANT_CODES:
        raise ValueError(f"variant must be one of {VARIANTS}")
    return kernels.VARIANT_CODES[variant]


def transfer_product(
    params: CocycleParams, x: float, n: int, variant: str = "a", rescale_every: int = 1
) -> ScaledMatrix2:
    """M_n(x) = A_n ... A_1 in log-scaled form."""
    code = _check_variant(variant)
    if n < 1:
        raise ValueError("n must be >= 1")
    if code != kernels.VARIANT_A:
        bad = params.near_zero_mask([x], 1, n + 1)
        if bad[0]:
            raise NearZeroWeight("orbit passes within the exclusion radius of a zero of a", x=x)
    xs = np.array([float(x)])
    ent, ls, ld = kernels.transfer_product(
        xs, params.w, complex(params.E), *params.kernel_args(), int(n), code, int(rescale_every)
    )
    return ScaledMatrix2(ent[0].copy(), float(ls[0]), float(ld[0]))


def inverse_transfer_product(params: CocycleParams, x: float, n: int, variant: str = "unimodular") -> ScaledMatrix2:
    """(A_n ... A_1)^-1 = A_1^-1 ... A_n^-1, built from inverted steps.

    Uses the same step values as ``transfer_product`` but a different
    multiplication order and no accumulated determinants; used to check
    norm symmetry.  Sharing the steps matters: near a resonance the log-norm
    reacts to ulp-level phase changes by far more than 1e-10.
    """
    code = _check_variant(variant)
    if n < 1:
        raise ValueError("n must be >= 1")
    if code != kernels.VARIANT_A and params.near_zero_mask([x], 1, n + 1)[0]:
        raise NearZeroWeight("orbit passes within the exclusion radius of a zero of a", x=x)
    m = np.eye(2, dtype=complex)
    ls = 0.0
    ld = 0.0
    for s00, s01, s10 in _steps(params, x, n, code):
        det = -s01 * s10
        inv = np.array([[0, -s01], [-s10, s00]]) / det
        ld -= math.log(abs(det))
        m = m @ inv
        mx = np.max(np.abs(m))
        m /= mx
        ls += math.log(mx)
    return ScaledMatrix2(m, ls, ld)


def grid_points(grid_log2: int) -> np.ndarray:
    N = 1 << int(grid_log2)
    return (np.arange(N) + 0.5) / N


def log_norms(
    params: CocycleParams,
    xs,
    n: int,
    variant: str = "a",
    rescale_every: int = 1,
    threads: int | None = None,
) -> np.ndarray:
    """log ||M_n^variant(x)|| for every x (no zero screening)."""
    code = _check_variant(variant)
    xs = np.ascontiguousarray(xs, dtype=float)
    args = params.kernel_args()
    E = complex(params.E)

    def work(s, e, _i):
        ent, ls, _ = kernels.transfer_product(xs[s:e], params.w, E, *args, int(n), code, int(rescale_every))
        return kernels.spectral_lognorm(ent) + ls

    return parallel.concat(parallel.block_map(work, xs.size, threads=threads))


@dataclass(frozen=True)
class LyapunovResult:
    value: float
    n: int
    variant: str
    grid_size: int
    skipped: int


def finite_lyapunov(
    params: CocycleParams,
    n: int,
    grid_log2: int = 11,
    variant: str = "plain",
    threads: int | None = None,
    rescale_every: int = 1,
) -> LyapunovResult:
    """(1/n) * grid average of log ||M_n(x)|| on a uniform midpoint grid.

    Plain and unimodular variants skip grid points whose orbit meets the
    exclusion zone around zeros of a; more than 1% skipped is an error.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if grid_log2 < 6:
        raise ValueError("grid must have at least 64 points")
    xs = grid_points(grid_log2)
    skipped = 0
    if variant != "a":
        bad = params.near_zero_mask(xs, 1, n + 1)
        skipped = int(bad.sum())
        if skipped > MAX_SKIP_FRACTION * xs.size:
            raise NearZeroWeight(f"{skipped} of {xs.size} grid orbits meet zeros of a")
        xs = xs[~bad]
    ln = log_norms(params, xs, n, variant, rescale_every, threads)
    return LyapunovResult(float(np.mean(ln)) / n, int(n), variant, int(xs.size + skipped), skipped)


# ---------------------------------------------------------------- SL(2) geometry


@dataclass(frozen=True)
class Directions:
    u_plus: np.ndarray
    u_minus: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    norm: float


def spectral_norm(A) -> float:
    return float(math.exp(kernels.spectral_norm2_np(np.asarray(A, dtype=complex)[None])[0]))


def svd_directions(A, det_tol: float = 1e-8) -> Directions:
    """Unit vectors with A u+ = ||A|| v+ and A u- = ||A||^-1 v-, for |det A| = 1."""
    A = np.asarray(A, dtype=complex)
    if abs(abs(np.linalg.det(A)) - 1.0) > det_tol:
        raise ValueError("svd_directions expects |det A| = 1")
    U, S, Vh = np.linalg.svd(A)
    if S[0] <= 1.0 + 1e-12:
        raise DegenerateSingularValues(f"||A|| = {S[0]!r} is too close to 1")
    V = Vh.conj().T
    return Directions(V[:, 0], V[:, 1], U[:, 0], U[:, 1], float(S[0]))


def wedge(w1, w2) -> float:
    return float(abs(w1[0] * w2[1] - w1[1] * w2[0]))


def random_sl2(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """A complex matrix with Gaussian entries, normalized to det = 1."""
    M = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) * scale
    det = np.linalg.det(M)
    return M / np.sqrt(det)


def polar_direction_slacks(A, B) -> dict:
    """rhs - lhs for the four stability inequalities of expanding and
    contracting directions (non-negative when they hold):

        |B u-_{AB} ^ u-_A|   <= ||A||^-2 ||B||
        |u-_{BA} ^ u-_A|     <= ||A||^-2 ||B||^2
        |v+_{AB} ^ v+_A|     <= ||A||^-2 ||B||^2
        |v+_{BA} ^ B v+_A|   <= ||A||^-2 ||B||
    """
    dA = svd_directions(A)
    dAB = svd_directions(A @ B)
    dBA = svd_directions(B @ A)
    nA = dA.norm
    nB = spectral_norm(B)
    return {
        "B_uAB_minus__uA_minus": nA**-2 * nB - wedge(B @ dAB.u_minus, dA.u_minus),
        "uBA_minus__uA_minus": nA**-2 * nB**2 - wedge(dBA.u_minus, dA.u_minus),
        "vAB_plus__vA_plus": nA**-2 * nB**2 - wedge(dAB.v_plus, dA.v_plus),
        "vBA_plus__B_vA_plus": nA**-2 * nB - wedge(dBA.v_plus, B @ dA.v_plus),
    }


def wedge_triangle_slacks(A, w1, w2, w3) -> tuple:
    """rhs - lhs for

        |w1 ^ A w2| <= |w1 ^ A w3| + sqrt2 ||A^-1|| |w2 ^ w3|
        |w1 ^ A w2| <= |w3 ^ A w2| + sqrt2 ||A||    |w1 ^ w3|
    """
    A = np.asarray(A, dtype=complex)
    nA = spectral_norm(A)
    nAi = spectral_norm(np.linalg.inv(A))
    lhs = wedge(w1, A @ w2)
    s1 = wedge(w1, A @ w3) + math.sqrt(2) * nAi * wedge(w2, w3) - lhs
    s2 = wedge(w3, A @ w2) + math.sqrt(2) * nA * wedge(w1, w3) - lhs
    return s1, s2


# ---------------------------------------------------------------- Avalanche Principle


@dataclass(frozen=True)
class AvalancheReport:
    n: int
    H: float
    residual: float
    ratio: float  # residual * H / n
    min_log_norm: float
    max_angle_defect: float


def _lognorm(A) -> float:
    return math.log(float(np.linalg.svd(A, compute_uv=False)[0]))


def _product_log_terms(mats) -> list:
    """log-norm of A_n ... A_1 as a list of terms whose exact sum is it."""
    m = np.eye(2, dtype=complex)
    terms = []
    for A in mats:
        m = A @ m
        mx = np.max(np.abs(m))
        m /= mx
        terms.append(math.log(mx))
    terms.append(_lognorm(m))
    return terms


def avalanche_check(matrices, H: float) -> AvalancheReport:
    """Residual of the Avalanche Principle for A_1, ..., A_n (listed in
    application order) under its two hypotheses; violations raise.

    All logarithms enter one compensated sum, so cases that cancel exactly
    (commuting diagonal matrices) give a residual of exactly 0.
    """
    mats = [np.asarray(A, dtype=complex) for A in matrices]
    n = len(mats)
    if n < 3:
        raise ValueError("need at least three matrices")
    logn = [_lognorm(A) for A in mats]
    # det by LU carries an absolute error of order eps ||A||^2
    for A, ln in zip(mats, logn):
        if abs(np.linalg.det(A)) > 1.0 + 1e-12 * max(1.0, math.exp(2 * ln)):
            raise ValueError("matrices must satisfy |det A_j| <= 1")
    if not (H > n):
        raise HypothesisLarge(f"H = {H} must exceed n = {n}")
    if min(logn) < math.log(H):
        raise HypothesisLarge(f"min ||A_j|| = {math.exp(min(logn)):.4g} < H = {H}")
    pair = [_lognorm(mats[j + 1] @ mats[j]) for j in range(n - 1)]
    defect = max(logn[j + 1] + logn[j] - pair[j] for j in range(n - 1))
    if defect >= 0.5 * math.log(H):
        raise HypothesisDiff(f"max angle defect {defect:.4g} >= (1/2) log H = {0.5 * math.log(H):.4g}")
    residual = abs(math.fsum(_product_log_terms(mats) + logn[1:-1] + [-p for p in pair]))
    return AvalancheReport(n, float(H), float(residual), float(residual * H / n), float(min(logn)), float(defect))


def random_hyperbolic_sequence(rng: np.random.Generator, n: int, H: float, spread: float = 4.0, angle: float = 0.3):
    """n matrices U diag(s, 1/s) V with s in [H, spread H] and rotations
    drawn within +-angle of a common frame, so consecutive products stay
    aligned enough for the angle hypothesis."""
    out = []
    for _ in range(n):
        s = H * (1.0 + (spread - 1.0) * rng.random())
        t1, t2 = rng.uniform(-angle, angle, 2)
        ph = np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
        R1 = np.array([[math.cos(t1), -math.sin(t1)], [math.sin(t1), math.cos(t1)]])
        R2 = np.array([[math.cos(t2), -math.sin(t2)], [math.sin(t2), math.cos(t2)]])
        out.append(R1 @ np.diag([s * ph[0], ph[1] / s]) @ R2)
    return out
