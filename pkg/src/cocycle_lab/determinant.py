"""Dirichlet determinants of the finite-volume Jacobi matrix, log-scaled.

f_j^a(x) = det(H_j(x) - E) with diagonal v(x + k w), k = 1..j, follows

    f_j = (v(x + j w) - E) f_{j-1} - a(x + j w) a~(x + j w) f_{j-2},
    f_0 = 1, f_{-1} = 0.

With the step convention of ``cocycle`` the weighted transfer matrix is

    M_n^a(x) = [[ f_n(x),                  -a~(x+w) f_{n-1}(x+w)              ],
                [ a(x+(n+1)w) f_{n-1}(x),  -a~(x+w) a(x+(n+1)w) f_{n-2}(x+w)  ]]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, parallel
from .cocycle import CocycleParams, grid_points, log_norms, transfer_product
from .errors import NearZeroWeight

LOG_FLOOR = -700.0


@dataclass(frozen=True)
class LogDet:
    log_mag: float
    phase: complex
    n: int
    cancellation_digits: float = 0.0

    def __post_init__(self):
        if abs(abs(self.phase) - 1.0) > 1e-12:
            raise ValueError("phase must have unit modulus")

    @property
    def value(self) -> complex:
        if self.log_mag == -math.inf:
            return 0j
        return self.phase * math.exp(self.log_mag)

    @property
    def is_zero(self) -> bool:
        return self.log_mag == -math.inf


def _args(params: CocycleParams):
    return (params.w, complex(params.E), *params.kernel_args())


def det_recurrence(params: CocycleParams, x: float, n: int) -> list:
    """[f_1, ..., f_n] at phase x."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lf, pf, cd = kernels.det_sequence(float(x), *_args(params), int(n))
    return [LogDet(float(lf[j]), complex(pf[j]), j + 1, float(cd[j])) for j in range(n)]


def det_at(params: CocycleParams, xs, n: int):
    """(log|f_n|, phase f_n, log|f_{n-1}|, phase f_{n-1}) vectorized in x.

    n = 0 gives f_0 = 1 and f_{-1} = 0.
    """
    xs = np.ascontiguousarray(np.atleast_1d(xs), dtype=float)
    return kernels.det_lastpair(xs, *_args(params), int(n))


def det_last(params: CocycleParams, x: float, n: int) -> LogDet:
    lf, pf, _, _ = det_at(params, [x], n)
    return LogDet(float(lf[0]), complex(pf[0]), int(n))


def shifted_det(params: CocycleParams, x: float, m: int, n: int) -> LogDet:
    """f^a_{[m, n]}(x) = f^a_{n-m+1}(x + (m-1) w)."""
    if m > n:
        raise ValueError("need m <= n")
    return det_last(params, float(x) + (m - 1) * params.w, n - m + 1)


def _cmp(entry: tuple, expected: tuple) -> tuple:
    """(relative log-magnitude residual, phase residual) of two (log, phase) pairs."""
    le, pe = entry
    lx, px = expected
    if le == -math.inf or lx == -math.inf:
        ok = le == lx
        return (0.0 if ok else math.inf), (0.0 if ok else math.inf)
    return abs(le - lx) / max(1.0, abs(lx)), abs(pe - px)


@dataclass(frozen=True)
class IdentityReport:
    n: int
    x: float
    log_residual: float
    phase_residual: float
    entries: tuple  # per-entry (log residual, phase residual), row-major


def _logpair(z: complex) -> tuple:
    return (math.log(abs(z)), z / abs(z)) if z != 0 else (-math.inf, 1.0 + 0j)


def det_identity_check(params: CocycleParams, x: float, n: int) -> IdentityReport:
    """Compare every entry of M_n^a(x) with its determinant expression."""
    if n < 2:
        raise ValueError("n must be >= 2")
    w = params.w
    M = transfer_product(params, x, n, "a")
    at = params.a_dual(float(x) + w)
    an = params.a(float(x) + (n + 1) * w)
    lf, pf, lg, pg = det_at(params, [x], n)
    ls, ps, lh, ph = det_at(params, [float(x) + w], n - 1)

    def combine(scale: complex, lp: float, pp: complex) -> tuple:
        l0, p0 = _logpair(scale)
        return l0 + lp, p0 * pp

    expected = (
        (float(lf[0]), complex(pf[0])),
        combine(-at, float(ls[0]), complex(ps[0])),
        combine(an, float(lg[0]), complex(pg[0])),
        combine(-at * an, float(lh[0]), complex(ph[0])),
    )
    got = (M.log_entry(0, 0), M.log_entry(0, 1), M.log_entry(1, 0), M.log_entry(1, 1))
    res = tuple(_cmp(g, e) for g, e in zip(got, expected))
    return IdentityReport(
        int(n), float(x), max(r[0] for r in res), max(r[1] for r in res), res
    )


def _log_weights(params: CocycleParams, x: float, n: int) -> tuple:
    """(sum_{j=1..n} log|a(x+jw)|, phase of prod a(x+jw),
    (1/2) sum_{j=0..n-1} log|a(x+(j+1)w) a~(x+jw)|)."""
    w = params.w
    pts = float(x) + w * np.arange(n + 1)
    av = np.asarray(params.a(pts))
    tv = np.asarray(params.a_dual(pts))
    la = np.abs(av[1:])
    lt = np.abs(tv[:-1])
    if np.any(la == 0) or np.any(lt == 0):
        raise NearZeroWeight("orbit hits a zero of a", x=float(x))
    plain = float(np.sum(np.log(la)))
    phase = complex(np.prod(av[1:] / la))
    uni = 0.5 * float(np.sum(np.log(la)) + np.sum(np.log(lt)))
    return plain, phase, uni


def normalized_dets(params: CocycleParams, x: float, n: int) -> tuple:
    """(f_n / prod_{j=1..n} a(x+jw), f_n / |prod_{j=0..n-1} a(x+(j+1)w) a~(x+jw)|^(1/2))."""
    if params.near_zero_mask([x], 0, n)[0]:
        raise NearZeroWeight("orbit passes within the exclusion radius of a zero of a", x=float(x))
    f = det_last(params, x, n)
    lp, ph, lu = _log_weights(params, x, n)
    ph_c = ph / abs(ph)
    plain = LogDet(f.log_mag - lp, f.phase / ph_c, n)
    uni = LogDet(f.log_mag - lu, f.phase, n)
    return plain, uni


@dataclass(frozen=True)
class LogDetStats:
    n: int
    mean: float
    deviations: np.ndarray
    clamped: int
    n_L_a: float
    gap: float  # mean - n L_n^a


def log_det_values(params: CocycleParams, xs, n: int, threads: int | None = None, clamp: bool = True) -> tuple:
    """log|f_n^a(x)| on the given points, clamped at LOG_FLOOR unless
    ``clamp`` is False; returns (values, number below the floor)."""
    xs = np.ascontiguousarray(xs, dtype=float)
    args = _args(params)

    def work(s, e, _i):
        return kernels.det_lastpair(xs[s:e], *args, int(n))[0]

    vals = parallel.concat(parallel.block_map(work, xs.size, threads=threads))
    low = vals < LOG_FLOOR
    return (np.where(low, LOG_FLOOR, vals) if clamp else vals), int(low.sum())


def log_det_stats(params: CocycleParams, n: int, grid_log2: int = 11, threads: int | None = None) -> LogDetStats:
    """Grid mean of log|f_n^a|, centered samples and the gap to n L_n^a."""
    if grid_log2 < 9:
        raise ValueError("grid must have at least 2^9 points")
    xs = grid_points(grid_log2)
    vals, clamped = log_det_values(params, xs, n, threads)
    mean = float(np.mean(vals))
    nla = float(np.mean(log_norms(params, xs, n, "a", threads=threads)))
    return LogDetStats(int(n), mean, vals - mean, clamped, nla, mean - nla)


def dense_det(params: CocycleParams, x: float, n: int) -> complex:
    """det(H_n(x) - E) from the dense matrix (LU); test oracle."""
    return complex(np.linalg.det(dense_matrix(params, x, n) - params.E * np.eye(n)))


def dense_matrix(params: CocycleParams, x: float, n: int) -> np.ndarray:
    """H_n(x): diagonal v(x+jw), upper -a(x+(j+1)w), lower -conj a(x+(j+1)w)."""
    w = params.w
    pts = float(x) + w * np.arange(1, n + 1)
    H = np.diag(np.asarray(params.v(pts), dtype=complex))
    if n > 1:
        off = np.asarray(params.a(pts[1:]), dtype=complex)
        H += np.diag(-off, 1) + np.diag(-np.conj(off), -1)
    return H
