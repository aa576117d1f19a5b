"""Hot inner loops.

Every kernel exists twice: a scalar-loop version compiled with numba
(``*_nb``) and a NumPy version vectorized across the batch axis (``*_np``).
The unsuffixed public names are bound to one or the other according to
``COCYCLE_LAB_NUMBA`` (see ``_accel``).  Both versions are always importable
so the benchmark and the cross-check tests can compare them directly.

Observables enter as coefficient arrays (ks int64, cs complex128) of a
trigonometric polynomial sum_k c_k exp(2 pi i k x).  Orbit points are
x + j omega reduced mod 1.

Transfer-matrix variants: 0 = weighted (M^a), 1 = plain Jacobi (M), 2 =
unimodular (M^u).
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

TWO_PI = 2.0 * math.pi
VARIANT_A, VARIANT_PLAIN, VARIANT_UNIMODULAR = 0, 1, 2
VARIANT_CODES = {"a": VARIANT_A, "plain": VARIANT_PLAIN, "unimodular": VARIANT_UNIMODULAR}


# ---------------------------------------------------------------- helpers


@njit
def _teval(ks, cs, p):
    s = 0j
    for m in range(ks.shape[0]):
        ang = TWO_PI * ks[m] * p
        s += cs[m] * complex(math.cos(ang), math.sin(ang))
    return s


def _teval_np(ks, cs, p):
    return np.exp(1j * TWO_PI * np.multiply.outer(p, ks.astype(float))) @ cs


# ------------------------------------------------------- transfer products


@njit
def _step(x, j, omega, E, vk, vc, ak, ac, tk, tc, variant):
    """Entries (s00, s01, s10) of step j at phase x; s11 = 0."""
    p = (x + j * omega) % 1.0
    d = _teval(vk, vc, p) - E
    u = _teval(tk, tc, p)
    lo = _teval(ak, ac, (p + omega) % 1.0)
    if variant == 0:
        return d, -u, lo
    s00 = d / lo
    s01 = -u / lo
    s10 = 1.0 + 0j
    if variant == 2:
        g = math.sqrt(abs(u) / abs(lo))
        s00 /= g
        s01 /= g
        s10 /= g
    return s00, s01, s10


def _step_np(x, j, omega, E, vk, vc, ak, ac, tk, tc, variant):
    """Vectorized ``_step``; x and j broadcast against each other."""
    p = np.atleast_1d((x + j * omega) % 1.0)
    d = _teval_np(vk, vc, p) - E
    u = _teval_np(tk, tc, p)
    lo = _teval_np(ak, ac, (p + omega) % 1.0)
    if variant == 0:
        return d, -u, lo
    s00, s01, s10 = d / lo, -u / lo, np.ones(p.shape, dtype=np.complex128)
    if variant == 2:
        g = np.sqrt(np.abs(u) / np.abs(lo))
        s00, s01, s10 = s00 / g, s01 / g, s10 / g
    return s00, s01, s10


@njit
def step_entries_nb(x, omega, E, vk, vc, ak, ac, tk, tc, n, variant):
    """(n, 3) array of the step entries used by ``transfer_product_nb``."""
    out = np.empty((n, 3), dtype=np.complex128)
    for j in range(1, n + 1):
        s00, s01, s10 = _step(x, j, omega, E, vk, vc, ak, ac, tk, tc, variant)
        out[j - 1, 0] = s00
        out[j - 1, 1] = s01
        out[j - 1, 2] = s10
    return out


def step_entries_np(x, omega, E, vk, vc, ak, ac, tk, tc, n, variant):
    s00, s01, s10 = _step_np(float(x), np.arange(1, n + 1), omega, E, vk, vc, ak, ac, tk, tc, variant)
    return np.stack([s00, s01, s10], axis=1)


@njit
def transfer_product_nb(xs, omega, E, vk, vc, ak, ac, tk, tc, n, variant, every):
    nx = xs.shape[0]
    ent = np.empty((nx, 2, 2), dtype=np.complex128)
    logs = np.zeros(nx)
    logdet = np.zeros(nx)
    for i in range(nx):
        x = xs[i]
        m00 = 1.0 + 0j
        m01 = 0j
        m10 = 0j
        m11 = 1.0 + 0j
        ls = 0.0
        ld = 0.0
        for j in range(1, n + 1):
            s00, s01, s10 = _step(x, j, omega, E, vk, vc, ak, ac, tk, tc, variant)
            # |det S| = |s01 s10|, taken from the step actually applied
            ld += math.log(abs(s01 * s10))
            # left multiply: M <- S M, with S = [[s00, s01], [s10, 0]]
            n00 = s00 * m00 + s01 * m10
            n01 = s00 * m01 + s01 * m11
            n10 = s10 * m00
            n11 = s10 * m01
            m00, m01, m10, m11 = n00, n01, n10, n11
            if j % every == 0 or j == n:
                mx = max(abs(m00), abs(m01), abs(m10), abs(m11))
                if mx > 0.0:
                    m00 /= mx
                    m01 /= mx
                    m10 /= mx
                    m11 /= mx
                    ls += math.log(mx)
        ent[i, 0, 0] = m00
        ent[i, 0, 1] = m01
        ent[i, 1, 0] = m10
        ent[i, 1, 1] = m11
        logs[i] = ls
        logdet[i] = ld
    return ent, logs, logdet


def transfer_product_np(xs, omega, E, vk, vc, ak, ac, tk, tc, n, variant, every):
    xs = np.asarray(xs, dtype=float)
    nx = xs.shape[0]
    m00 = np.ones(nx, dtype=np.complex128)
    m01 = np.zeros(nx, dtype=np.complex128)
    m10 = np.zeros(nx, dtype=np.complex128)
    m11 = np.ones(nx, dtype=np.complex128)
    ls = np.zeros(nx)
    ld = np.zeros(nx)
    for j in range(1, n + 1):
        s00, s01, s10 = _step_np(xs, j, omega, E, vk, vc, ak, ac, tk, tc, variant)
        with np.errstate(divide="ignore"):
            ld += np.log(np.abs(s01 * s10))
        m00, m01, m10, m11 = s00 * m00 + s01 * m10, s00 * m01 + s01 * m11, s10 * m00, s10 * m01
        if j % every == 0 or j == n:
            mx = np.maximum(np.maximum(np.abs(m00), np.abs(m01)), np.maximum(np.abs(m10), np.abs(m11)))
            mx = np.where(mx > 0.0, mx, 1.0)
            m00, m01, m10, m11 = m00 / mx, m01 / mx, m10 / mx, m11 / mx
            ls += np.log(mx)
    ent = np.empty((nx, 2, 2), dtype=np.complex128)
    ent[:, 0, 0], ent[:, 0, 1], ent[:, 1, 0], ent[:, 1, 1] = m00, m01, m10, m11
    return ent, ls, ld


@njit
def spectral_norm2_nb(ent):
    """log of the spectral norm of each 2x2 matrix in ent (nx, 2, 2)."""
    nx = ent.shape[0]
    out = np.empty(nx)
    for i in range(nx):
        a = ent[i, 0, 0]
        b = ent[i, 0, 1]
        c = ent[i, 1, 0]
        d = ent[i, 1, 1]
        s = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
        det = abs(a * d - b * c)
        disc = max(s * s - 4.0 * det * det, 0.0)
        out[i] = 0.5 * math.log(0.5 * (s + math.sqrt(disc)))
    return out


def spectral_norm2_np(ent):
    ent = np.asarray(ent)
    s = np.sum(np.abs(ent) ** 2, axis=(-2, -1))
    det = np.abs(ent[..., 0, 0] * ent[..., 1, 1] - ent[..., 0, 1] * ent[..., 1, 0])
    disc = np.maximum(s * s - 4.0 * det * det, 0.0)
    with np.errstate(divide="ignore"):
        return 0.5 * np.log(0.5 * (s + np.sqrt(disc)))


# ------------------------------------------------------- determinants


@njit
def det_lastpair_nb(xs, omega, E, vk, vc, ak, ac, tk, tc, n):
    """(log|f_n|, phase f_n, log|f_{n-1}|, phase f_{n-1}) for each x.

    f_j = (v(x + j w) - E) f_{j-1} - a(x + j w) a~(x + j w) f_{j-2},
    f_0 = 1, f_{-1} = 0.  The pair is renormalized every step.
    """
    nx = xs.shape[0]
    lf = np.empty(nx)
    pf = np.empty(nx, dtype=np.complex128)
    lg = np.empty(nx)
    pg = np.empty(nx, dtype=np.complex128)
    for i in range(nx):
        x = xs[i]
        f1 = 1.0 + 0j  # f_{j-1}
        f2 = 0j  # f_{j-2}
        ls = 0.0
        for j in range(1, n + 1):
            p = (x + j * omega) % 1.0
            c = _teval(vk, vc, p) - E
            w = _teval(ak, ac, p) * _teval(tk, tc, p)
            f0 = c * f1 - w * f2
            f2 = f1
            f1 = f0
            mx = max(abs(f1), abs(f2))
            if mx > 0.0:
                f1 /= mx
                f2 /= mx
                ls += math.log(mx)
        a1 = abs(f1)
        a2 = abs(f2)
        lf[i] = ls + math.log(a1) if a1 > 0.0 else -np.inf
        pf[i] = f1 / a1 if a1 > 0.0 else 1.0 + 0j
        if n == 0:
            lg[i] = -np.inf
            pg[i] = 1.0 + 0j
        else:
            lg[i] = ls + math.log(a2) if a2 > 0.0 else -np.inf
            pg[i] = f2 / a2 if a2 > 0.0 else 1.0 + 0j
    return lf, pf, lg, pg


def det_lastpair_np(xs, omega, E, vk, vc, ak, ac, tk, tc, n):
    xs = np.asarray(xs, dtype=float)
    nx = xs.shape[0]
    f1 = np.ones(nx, dtype=np.complex128)
    f2 = np.zeros(nx, dtype=np.complex128)
    ls = np.zeros(nx)
    for j in range(1, n + 1):
        p = (xs + j * omega) % 1.0
        c = _teval_np(vk, vc, p) - E
        w = _teval_np(ak, ac, p) * _teval_np(tk, tc, p)
        f1, f2 = c * f1 - w * f2, f1
        mx = np.maximum(np.abs(f1), np.abs(f2))
        mx = np.where(mx > 0.0, mx, 1.0)
        f1, f2 = f1 / mx, f2 / mx
        ls += np.log(mx)
    with np.errstate(divide="ignore", invalid="ignore"):
        a1, a2 = np.abs(f1), np.abs(f2)
        lf = np.where(a1 > 0, ls + np.log(a1), -np.inf)
        pf = np.where(a1 > 0, f1 / np.where(a1 > 0, a1, 1.0), 1.0 + 0j)
        if n == 0:
            lg = np.full(nx, -np.inf)
            pg = np.ones(nx, dtype=np.complex128)
        else:
            lg = np.where(a2 > 0, ls + np.log(a2), -np.inf)
            pg = np.where(a2 > 0, f2 / np.where(a2 > 0, a2, 1.0), 1.0 + 0j)
    return lf, pf, lg, pg


@njit
def det_sequence_nb(x, omega, E, vk, vc, ak, ac, tk, tc, n):
    """log|f_j|, phase f_j and cancellation digits for j = 1..n at one x.

    Cancellation digits: log10(max(|c f_{j-1}|, |w f_{j-2}|) / |f_j|), the
    number of significant digits lost forming f_j.
    """
    lf = np.empty(n)
    pf = np.empty(n, dtype=np.complex128)
    cd = np.zeros(n)
    f1 = 1.0 + 0j
    f2 = 0j
    ls = 0.0
    for j in range(1, n + 1):
        p = (x + j * omega) % 1.0
        c = _teval(vk, vc, p) - E
        w = _teval(ak, ac, p) * _teval(tk, tc, p)
        t1 = c * f1
        t2 = w * f2
        f0 = t1 - t2
        big = max(abs(t1), abs(t2))
        if abs(f0) > 0.0 and big > 0.0:
            cd[j - 1] = max(0.0, math.log10(big / abs(f0)))
        elif big > 0.0:
            cd[j - 1] = np.inf
        f2 = f1
        f1 = f0
        mx = max(abs(f1), abs(f2))
        if mx > 0.0:
            f1 /= mx
            f2 /= mx
            ls += math.log(mx)
        a1 = abs(f1)
        lf[j - 1] = ls + math.log(a1) if a1 > 0.0 else -np.inf
        pf[j - 1] = f1 / a1 if a1 > 0.0 else 1.0 + 0j
    return lf, pf, cd


def det_sequence_np(x, omega, E, vk, vc, ak, ac, tk, tc, n):
    js = np.arange(1, n + 1)
    p = (x + js * omega) % 1.0
    c = _teval_np(vk, vc, p) - E
    w = _teval_np(ak, ac, p) * _teval_np(tk, tc, p)
    lf = np.empty(n)
    pf = np.empty(n, dtype=np.complex128)
    cd = np.zeros(n)
    f1, f2, ls = 1.0 + 0j, 0j, 0.0
    for j in range(n):
        t1, t2 = c[j] * f1, w[j] * f2
        f0 = t1 - t2
        big = max(abs(t1), abs(t2))
        if abs(f0) > 0 and big > 0:
            cd[j] = max(0.0, math.log10(big / abs(f0)))
        elif big > 0:
            cd[j] = np.inf
        f1, f2 = f0, f1
        mx = max(abs(f1), abs(f2))
        if mx > 0:
            f1, f2 = f1 / mx, f2 / mx
            ls += math.log(mx)
        a1 = abs(f1)
        lf[j] = ls + math.log(a1) if a1 > 0 else -np.inf
        pf[j] = f1 / a1 if a1 > 0 else 1.0 + 0j
    return lf, pf, cd


# ------------------------------------------------------- Sturm sequences


@njit
def sturm_count_nb(d, b2, lam):
    """Number of eigenvalues < lam of the symmetric tridiagonal (d, sqrt(b2))."""
    n = d.shape[0]
    count = 0
    q = d[0] - lam
    if q < 0.0:
        count += 1
    for i in range(1, n):
        if q == 0.0:
            q = 1e-300
        q = d[i] - lam - b2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def sturm_count_np(d, b2, lams):
    """Vectorized over an array of shifts."""
    lams = np.asarray(lams, dtype=float)
    q = d[0] - lams
    count = (q < 0).astype(np.int64)
    for i in range(1, d.shape[0]):
        q = np.where(q == 0.0, 1e-300, q)
        q = d[i] - lams - b2[i - 1] / q
        count += q < 0
    return count


@njit
def bisect_eigs_nb(d, b2, lo, hi, tol):
    n = d.shape[0]
    out = np.empty(n)
    for k in range(n):
        a = lo
        b = hi
        # eigenvalue k (0-based) is the smallest lam with count(lam) > k
        while b - a > tol:
            mid = 0.5 * (a + b)
            if mid == a or mid == b:
                break
            if sturm_count_nb(d, b2, mid) > k:
                b = mid
            else:
                a = mid
        out[k] = 0.5 * (a + b)
    return out


def bisect_eigs_np(d, b2, lo, hi, tol):
    n = d.shape[0]
    a = np.full(n, float(lo))
    b = np.full(n, float(hi))
    ks = np.arange(n)
    while True:
        active = (b - a) > tol
        if not np.any(active):
            break
        mid = 0.5 * (a + b)
        stalled = (mid == a) | (mid == b)
        if np.all(stalled | ~active):
            break
        above = sturm_count_np(d, b2, mid) > ks
        upd = active & ~stalled
        b = np.where(upd & above, mid, b)
        a = np.where(upd & ~above, mid, a)
    return 0.5 * (a + b)


# ------------------------------------------------------- dyadic BMO


@njit
def dyadic_oscillation_nb(f, max_depth, stride_div):
    """max over depths d <= max_depth and cyclic translates of the mean
    oscillation of f over windows of length N / 2^d.

    Translates are taken every max(1, L // stride_div) samples (stride_div =
    0 means every sample).  Returns (max value, depth achieving it).
    """
    N = f.shape[0]
    csum = np.empty(2 * N + 1)
    csum[0] = 0.0
    for i in range(2 * N):
        csum[i + 1] = csum[i] + f[i % N]
    best = 0.0
    best_d = 0
    for dep in range(max_depth + 1):
        L = N >> dep
        if L < 1:
            break
        step = 1
        if stride_div > 0:
            step = max(1, L // stride_div)
        starts = N if dep > 0 else 1
        for s in range(0, starts, step):
            m = (csum[s + L] - csum[s]) / L
            acc = 0.0
            for t in range(s, s + L):
                acc += abs(f[t % N] - m)
            val = acc / L
            if val > best:
                best = val
                best_d = dep
    return best, best_d


def dyadic_oscillation_np(f, max_depth, stride_div):
    f = np.asarray(f, dtype=float)
    N = f.shape[0]
    ext = np.concatenate([f, f])
    csum = np.concatenate([[0.0], np.cumsum(ext)])
    best, best_d = 0.0, 0
    for dep in range(max_depth + 1):
        L = N >> dep
        if L < 1:
            break
        step = 1 if stride_div <= 0 else max(1, L // stride_div)
        starts = np.arange(0, N if dep > 0 else 1, step)
        # chunk to bound memory at (chunk x L)
        chunk = max(1, (1 << 22) // L)
        for c0 in range(0, starts.size, chunk):
            st = starts[c0 : c0 + chunk]
            means = (csum[st + L] - csum[st]) / L
            win = np.lib.stride_tricks.sliding_window_view(ext, L)[st]
            vals = np.mean(np.abs(win - means[:, None]), axis=1)
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, best_d = float(vals[i]), dep
    return best, best_d


# ------------------------------------------------------- dispatch

if USE_NUMBA:
    transfer_product = transfer_product_nb
    step_entries = step_entries_nb
    spectral_lognorm = spectral_norm2_nb
    det_lastpair = det_lastpair_nb
    det_sequence = det_sequence_nb
    bisect_eigs = bisect_eigs_nb
    dyadic_oscillation = dyadic_oscillation_nb

    def sturm_counts(d, b2, lams):
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        return np.array([sturm_count_nb(d, b2, float(l)) for l in lams], dtype=np.int64)

else:
    transfer_product = transfer_product_np
    step_entries = step_entries_np
    spectral_lognorm = spectral_norm2_np
    det_lastpair = det_lastpair_np
    det_sequence = det_sequence_np
    bisect_eigs = bisect_eigs_np
    dyadic_oscillation = dyadic_oscillation_np

    def sturm_counts(d, b2, lams):
        return sturm_count_np(d, b2, np.atleast_1d(np.asarray(lams, dtype=float)))
