"""Finite-volume spectra: Sturm bisection, window counts, Jensen zero
counting and a local Hoelder probe for E -> L_n(E)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, parallel
from .analytic import sup_norm_torus
from .cocycle import CocycleParams, finite_lyapunov
from .errors import CenterZero, DegenerateFit, InvalidTolerance

JENSEN_REL_TOL = 1e-6
JENSEN_MAX_NODES = 1 << 14
LOG_UNDERFLOW = -700.0


@dataclass(frozen=True)
class TridiagonalOperator:
    diag: np.ndarray  # v(x + j w), j = 1..n
    offdiag: np.ndarray  # |a(x + (j+1) w)|, j = 1..n-1
    x: float
    gauge: np.ndarray  # unit phases g_j with G^* H G symmetrized, G = diag(g)

    @property
    def n(self) -> int:
        return int(self.diag.size)

    @property
    def gershgorin(self) -> tuple:
        r = np.zeros(self.n)
        r[:-1] += self.offdiag
        r[1:] += self.offdiag
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) - np.diag(self.offdiag, 1) - np.diag(self.offdiag, -1)

    def count_below(self, lams) -> np.ndarray:
        """#{eigenvalues < lam} for each lam."""
        return kernels.sturm_counts(self.diag, self.offdiag**2, lams)


def build_symmetrized(params: CocycleParams, x: float, n: int) -> TridiagonalOperator:
    """Real symmetric form of H_n(x) via a diagonal unitary gauge.

    H has upper entries -a_j (a_j = a(x + (j+1) w)); with g_1 = 1 and
    g_{j+1} = g_j * conj(a_j)/|a_j| the conjugated matrix has -|a_j| off the
    diagonal.  A zero a_j keeps g_{j+1} = g_j.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = params.w
    pts = float(x) + w * np.arange(1, n + 1)
    d = np.real(np.asarray(params.v(pts), dtype=complex)).astype(float)
    a = np.asarray(params.a(pts[1:]), dtype=complex) if n > 1 else np.zeros(0, complex)
    mag = np.abs(a)
    ph = np.where(mag > 0, np.conj(a) / np.where(mag > 0, mag, 1.0), 1.0)
    gauge = np.concatenate([[1.0 + 0j], np.cumprod(ph)])
    return TridiagonalOperator(np.ascontiguousarray(d), np.ascontiguousarray(mag), float(x), gauge)


def _split_blocks(off: np.ndarray) -> list:
    cuts = np.flatnonzero(off == 0.0) + 1
    edges = np.concatenate([[0], cuts, [off.size + 1]])
    return [(int(s), int(e)) for s, e in zip(edges[:-1], edges[1:])]


def eigenvalues(T: TridiagonalOperator, tol: float = 1e-12) -> np.ndarray:
    """All eigenvalues by Sturm bisection, each bracketed to width <= tol."""
    if not (tol > 0):
        raise InvalidTolerance(f"tol must be positive, got {tol!r}")
    out = []
    for s, e in _split_blocks(T.offdiag):
        d = np.ascontiguousarray(T.diag[s:e])
        b = np.ascontiguousarray(T.offdiag[s : e - 1])
        if d.size == 1:
            out.append(d.copy())
            continue
        r = np.zeros(d.size)
        r[:-1] += b
        r[1:] += b
        lo, hi = float(np.min(d - r)), float(np.max(d + r))
        pad = 1e-12 * max(1.0, abs(lo), abs(hi)) + tol
        out.append(kernels.bisect_eigs(d, b**2, lo - pad, hi + pad, float(tol)))
    return np.sort(np.concatenate(out))


def eigenvalues_many(params: CocycleParams, xs, n: int, tol: float = 1e-12, threads: int | None = None) -> list:
    """Independent eigensolves for several phases, in input order."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))

    def work(s, e, _i):
        return [eigenvalues(build_symmetrized(params, x, n), tol) for x in xs[s:e]]

    parts = parallel.block_map(work, xs.size, block=8, threads=threads)
    return [ev for p in parts for ev in p]


def count_in_window(T: TridiagonalOperator, lo: float, hi: float) -> int:
    """#{eigenvalues in the open interval (lo, hi)}."""
    if hi <= lo:
        return 0
    c = T.count_below([np.nextafter(lo, math.inf), hi])
    return int(c[1] - c[0])


@dataclass(frozen=True)
class EigenCountReport:
    count: int
    n: int
    E0: float
    radius: float
    delta0: float | None
    h: float | None
    bound: float | None  # 13 n delta0 when radius = delta0^(1/h)
    holds: bool | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def eigen_count_window(
    params: CocycleParams,
    x0: float,
    E0: float,
    radius: float,
    n: int,
    delta0: float | None = None,
    h: float | None = None,
) -> EigenCountReport:
    """Eigenvalues of H_n(x0) in (E0 - radius, E0 + radius).

    If delta0 is given the count is compared with 13 n delta0; pass
    ``radius=theorem_window_radius(delta0, h)`` for the theorem's window.
    """
    if not (radius > 0):
        raise ValueError("radius must be positive")
    T = build_symmetrized(params, x0, n)
    c = count_in_window(T, E0 - radius, E0 + radius)
    bound = holds = None
    if delta0 is not None:
        bound = 13.0 * n * delta0
        holds = c <= bound
    return EigenCountReport(int(c), int(n), float(E0), float(radius), delta0, h, bound, holds)


def theorem_window_radius(delta0: float, h: float) -> float:
    return float(delta0 ** (1.0 / h))


# ---------------------------------------------------------------- Jensen


def char_poly_logabs(params: CocycleParams, x: float, n: int):
    """Vectorized z -> log|f_n^a(x, z)| for complex energies z."""
    w = params.w
    pts = float(x) + w * np.arange(1, n + 1)
    c = np.asarray(params.v(pts), dtype=complex)
    ww = np.asarray(params.a(pts), dtype=complex) * np.asarray(params.a_dual(pts), dtype=complex)

    def logabs(z):
        z = np.asarray(z, dtype=complex)
        f1 = np.ones(z.shape, dtype=complex)
        f2 = np.zeros(z.shape, dtype=complex)
        ls = np.zeros(z.shape)
        for j in range(n):
            f1, f2 = (c[j] - z) * f1 - ww[j] * f2, f1
            mx = np.maximum(np.abs(f1), np.abs(f2))
            mx = np.where(mx > 0, mx, 1.0)
            f1, f2 = f1 / mx, f2 / mx
            ls += np.log(mx)
        with np.errstate(divide="ignore"):
            return ls + np.log(np.abs(f1))

    return logabs


def _circle_mean(logabs, z0: complex, R: float, nodes: int) -> float:
    th = 2.0 * math.pi * np.arange(nodes) / nodes
    return float(np.mean(logabs(z0 + R * np.exp(1j * th))))


def jensen_sum(logabs, z0: complex, R: float, quad_nodes: int = 64) -> tuple:
    """(1/2pi) int log|f(z0 + R e^{it})| dt - log|f(z0)| by the trapezoid
    rule, doubling nodes until two successive values agree to
    JENSEN_REL_TOL (relative, floor 1) or the node cap is reached.

    Returns (sum, nodes used, converged).
    """
    if quad_nodes < 64:
        raise ValueError("quad_nodes must be >= 64")
    center = float(logabs(np.array([z0]))[0])
    N = int(quad_nodes)
    prev = _circle_mean(logabs, z0, R, N)
    converged = False
    while N < JENSEN_MAX_NODES:
        N *= 2
        cur = _circle_mean(logabs, z0, R, N)
        if abs(cur - prev) <= JENSEN_REL_TOL * max(1.0, abs(cur)):
            prev, converged = cur, True
            break
        prev = cur
    return prev - center, N, converged


@dataclass(frozen=True)
class JensenCount:
    count: int
    raw_sum: float  # Jensen sum at radius R
    estimate: float  # unrounded zero count from the two radii
    z0: complex  # center actually used
    jitter: complex  # z0 - requested center
    nodes: int
    converged: bool


def jensen_zero_count(
    f,
    z0: complex,
    R: float,
    quad_nodes: int = 64,
    eta: float = 1e-3,
    log_abs: bool = False,
    max_recenter: int = 5,
) -> JensenCount:
    """Number of zeros of f in the disk |z - z0| < R from Jensen's formula.

    J(r) = sum over zeros |z - z0| < r of log(r / |z - z0|), so
    (J(R) - J(R(1-eta))) / log(1/(1-eta)) lies between the zero counts of
    the two disks; it is rounded to the nearest integer.  If f(z0) is
    below the underflow floor the center moves by R * 1e-3 * e^{i k} for
    k = 1, 2, ... and the shift is reported.
    """
    logabs = f if log_abs else (lambda z: np.log(np.abs(np.asarray(f(z), dtype=complex))))
    z_req = complex(z0)
    zc = z_req
    for k in range(max_recenter + 1):
        with np.errstate(divide="ignore"):
            lc = float(logabs(np.array([zc]))[0])
        if lc > LOG_UNDERFLOW and math.isfinite(lc):
            break
        zc = z_req + R * 1e-3 * complex(math.cos(k + 1), math.sin(k + 1))
    else:
        raise CenterZero(f"f vanishes at and near the center {z_req}")
    with np.errstate(divide="ignore"):
        jR, nodes, conv = jensen_sum(logabs, zc, R, quad_nodes)
        jr, _, conv2 = jensen_sum(logabs, zc, R * (1.0 - eta), quad_nodes)
    est = (jR - jr) / -math.log1p(-eta)
    return JensenCount(int(round(est)), float(jR), float(est), zc, zc - z_req, nodes, conv and conv2)


# ---------------------------------------------------------------- windows


def spectral_window(params: CocycleParams) -> tuple:
    """[-2||a|| - ||v||, 2||a|| + ||v||] with torus sup norms."""
    r = 2.0 * sup_norm_torus(params.a) + sup_norm_torus(params.v)
    return -r, r


@dataclass(frozen=True)
class HolderFit:
    exponent: float
    intercept: float
    radii: np.ndarray
    differences: np.ndarray
    residuals: np.ndarray


def holder_probe(
    params: CocycleParams,
    E_center: float,
    radii,
    n_ref: int = 1024,
    grid_log2: int = 11,
    noise_floor: float = 1e-12,
    threads: int | None = None,
) -> HolderFit:
    """Least-squares slope of log|L(E_c + r) - L(E_c)| against log r."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2:
        raise DegenerateFit("need at least two radii")
    if np.any(np.diff(radii) >= 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    if n_ref < 1024:
        raise ValueError("n_ref must be >= 1024")

    def L(E):
        return finite_lyapunov(params.with_energy(E), n_ref, grid_log2, "plain", threads).value

    L0 = L(E_center)
    diffs = np.array([abs(L(E_center + r) - L0) for r in radii])
    if np.any(diffs <= noise_floor):
        raise DegenerateFit("Lyapunov differences fall below the noise floor")
    X = np.log(radii)
    Y = np.log(diffs)
    slope, icpt = np.polyfit(X, Y, 1)
    return HolderFit(float(slope), float(icpt), radii, diffs, Y - (slope * X + icpt))
