"""Continued fractions and Brjuno-Russmann frequency arithmetic.

Convergents are exact Python integers; the expansion itself runs in mpmath at
a configurable binary precision so that large denominators are not corrupted
by double rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import mpmath
import numpy as np
from scipy import integrate

from .errors import (
    BracketFailure,
    InsufficientDepth,
    NonMonotoneDelta,
    PrecisionExhausted,
    RationalDetected,
)

DEFAULT_PRECISION_BITS = 256
# bits held back from the working precision when deciding reliability
_GUARD_BITS = 16

NAMED_FREQUENCIES = {
    "golden": lambda: (mpmath.sqrt(5) - 1) / 2,
    "silver": lambda: mpmath.sqrt(2) - 1,
    "pi-3": lambda: mpmath.pi - 3,
}


def parse_omega(omega, precision_bits: int = DEFAULT_PRECISION_BITS):
    """Turn a named constant, decimal string, float or mpf into an mpf."""
    with mpmath.workprec(precision_bits):
        if isinstance(omega, str):
            key = omega.strip().lower()
            if key in NAMED_FREQUENCIES:
                return +NAMED_FREQUENCIES[key]()
            return mpmath.mpf(omega)
        return mpmath.mpf(omega)


@dataclass(frozen=True)
class Frequency:
    """An irrational rotation number with its continued-fraction data.

    ``convergents[s-1] == (p_s, q_s)`` for s = 1..S, with p_0/q_0 = 0/1.
    """

    value: mpmath.mpf
    partial_quotients: tuple
    convergents: tuple
    precision_bits: int = DEFAULT_PRECISION_BITS
    label: str = ""

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    @property
    def denominators(self) -> list:
        return [q for _, q in self.convergents]

    @property
    def numerators(self) -> list:
        return [p for p, _ in self.convergents]

    def __float__(self) -> float:
        return float(self.value)

    @property
    def omega(self) -> float:
        return float(self.value)

    def truncation_bits(self) -> float:
        """log2 of q_S^2, the precision actually consumed by the expansion."""
        q = self.denominators[-1]
        return 2.0 * math.log2(q) if q > 0 else 0.0

    def sandwich_residuals(self) -> list:
        """For each s < S: (lower, |omega - p_s/q_s|, upper) in working precision."""
        out = []
        with mpmath.workprec(self.precision_bits):
            w = mpmath.mpf(self.value)
            for s in range(len(self.convergents) - 1):
                p, q = self.convergents[s]
                q_next = self.convergents[s + 1][1]
                err = abs(w - mpmath.mpf(p) / q)
                lo = mpmath.mpf(1) / (q * (q_next + q))
                hi = mpmath.mpf(1) / (q * q_next)
                out.append((lo, err, hi))
        return out

    def to_dict(self) -> dict:
        with mpmath.workprec(self.precision_bits):
            digits = int(self.precision_bits * math.log10(2)) + 2
            val = mpmath.nstr(self.value, digits, strip_zeros=False)
        return {
            "type": "Frequency",
            "label": self.label,
            "value": val,
            "precision_bits": self.precision_bits,
            "partial_quotients": [str(a) for a in self.partial_quotients],
            "convergents": [[str(p), str(q)] for p, q in self.convergents],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Frequency":
        prec = int(d.get("precision_bits", DEFAULT_PRECISION_BITS))
        with mpmath.workprec(prec):
            value = mpmath.mpf(d["value"])
        return cls(
            value=value,
            partial_quotients=tuple(int(a) for a in d["partial_quotients"]),
            convergents=tuple((int(p), int(q)) for p, q in d["convergents"]),
            precision_bits=prec,
            label=d.get("label", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def continued_fraction(omega, depth: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> Frequency:
    """Expand ``omega`` in (0, 1) to ``depth`` partial quotients.

    Raises RationalDetected when the remainder vanishes (to working precision)
    before ``depth`` is reached, and PrecisionExhausted when the next
    denominator could no longer be trusted at ``precision_bits``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    label = omega if isinstance(omega, str) else ""
    w = parse_omega(omega, precision_bits)
    if not (0 < w < 1):
        raise ValueError(f"omega must lie in (0, 1), got {mpmath.nstr(w, 15)}")

    reliable = mpmath.mpf(2) ** (precision_bits - _GUARD_BITS)
    quotients = []
    convergents = []
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    with mpmath.workprec(precision_bits):
        x = mpmath.mpf(w)
        floor_ = mpmath.mpf(2) ** (-(precision_bits - _GUARD_BITS))
        for s in range(depth):
            # remainder error after s inversions is ~ 2^-prec * q_s^2
            if x != 0 and q * q * 256 > reliable:
                raise PrecisionExhausted(
                    f"depth {depth} needs q_s^2 ~ 2^{2 * math.log2(q):.0f}, "
                    f"beyond {precision_bits}-bit reliability"
                )
            if x == 0 or x < floor_ * q * q:
                raise RationalDetected(
                    f"remainder vanished after {s} partial quotients "
                    f"(omega looks rational at {precision_bits} bits)"
                )
            y = 1 / x
            a = int(mpmath.floor(y))
            x = y - a
            p_prev, p = p, a * p + p_prev
            q_prev, q = q, a * q + q_prev
            if q * q_prev > reliable:
                raise PrecisionExhausted(
                    f"depth {depth} needs q_s q_(s+1) ~ 2^{math.log2(q * q_prev):.0f}, "
                    f"beyond {precision_bits}-bit reliability"
                )
            quotients.append(a)
            convergents.append((p, q))
    return Frequency(
        value=w,
        partial_quotients=tuple(quotients),
        convergents=tuple(convergents),
        precision_bits=precision_bits,
        label=label,
    )


@dataclass(frozen=True)
class BetaEstimate:
    ratios: tuple  # log q_{s+1} / q_s for s = 1..S-1
    max_value: float
    argmax_s: int
    tail_value: float


def beta_estimate(freq) -> BetaEstimate:
    """Truncated proxy for beta(omega) = limsup log q_{s+1} / q_s.

    Accepts a Frequency or a plain increasing sequence of denominators.
    """
    qs = freq.denominators if isinstance(freq, Frequency) else [int(q) for q in freq]
    if len(qs) < 3:
        raise InsufficientDepth(f"need at least 3 convergents, got {len(qs)}")
    ratios = tuple(math.log(qs[s + 1]) / qs[s] for s in range(len(qs) - 1))
    k = int(np.argmax(ratios))
    return BetaEstimate(ratios=ratios, max_value=ratios[k], argmax_s=k + 1, tail_value=ratios[-1])


def circle_distance(t):
    """||t||, distance to the nearest integer."""
    t = np.asarray(t, dtype=float)
    r = np.mod(t, 1.0)
    return np.minimum(r, 1.0 - r)


def orbit_min(x: float, omega: float, n: int) -> float:
    """min over 0 <= k < n of the fractional part {x + k omega}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n, dtype=float)
    return float(np.min(np.mod(x + k * float(omega), 1.0)))


# --------------------------------------------------------------------------
# Brjuno-Russmann gauge functions

FAMILIES = ("poly-log", "power", "exp-log-power", "exp-root", "exp-over-log", "custom-tabulated")


@dataclass(frozen=True)
class BrjunoFunction:
    """A monotone gauge Delta(t) on [1, inf) with Delta(1) = 1.

    Families (u = log t):

    ``poly-log``       t (log t + 1)^alpha
    ``power``          t^alpha
    ``exp-log-power``  exp(u^alpha)
    ``exp-root``       exp(t^(1/alpha) - 1)
    ``exp-over-log``   exp(t / (u + alpha)^alpha - alpha^-alpha)
    ``custom-tabulated`` log-log linear interpolation of ``table``

    The two exponential families are shifted so that Delta(1) = 1 and the
    function is increasing from t = 1; they agree with the textbook forms up
    to a bounded factor in the exponent.
    """

    family: str
    alpha: float = 1.0
    C_omega: float = 1.0
    table: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown Brjuno family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "custom-tabulated":
            if len(self.table) < 2:
                raise ValueError("custom-tabulated family needs at least two (t, Delta) rows")
            ts = np.array([r[0] for r in self.table], dtype=float)
            if ts[0] != 1.0:
                raise ValueError("custom table must start at t = 1")
        elif self.alpha <= 0:
            raise ValueError("alpha must be positive")

    # all evaluations go through log Delta as a function of u = log t
    def _log_delta_u(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        fam = self.family
        with np.errstate(over="ignore"):
            if fam == "poly-log":
                return u + a * np.log1p(u)
            if fam == "power":
                return a * u
            if fam == "exp-log-power":
                return u**a
            if fam == "exp-root":
                return np.expm1(u / a)
            if fam == "exp-over-log":
                return np.exp(u - a * np.log(u + a)) - a ** (-a)
            lt = np.log([r[0] for r in self.table])
            ld = np.log([r[1] for r in self.table])
            out = np.interp(u, lt, ld)
            slope = (ld[-1] - ld[-2]) / (lt[-1] - lt[-2])
            return np.where(u > lt[-1], ld[-1] + slope * (u - lt[-1]), out)

    def _elasticity_u(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        fam = self.family
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if fam == "poly-log":
                return 1.0 + a / (u + 1.0)
            if fam == "power":
                return np.full_like(u, a)
            if fam == "exp-log-power":
                return a * u ** (a - 1.0)
            if fam == "exp-root":
                return np.exp(u / a) / a
            if fam == "exp-over-log":
                return u * np.exp(u - (a + 1.0) * np.log(u + a))
            lt = np.log([r[0] for r in self.table])
            ld = np.log([r[1] for r in self.table])
            slopes = np.diff(ld) / np.diff(lt)
            idx = np.clip(np.searchsorted(lt, u, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

    def log_delta(self, t):
        return self._log_delta_u(np.log(np.asarray(t, dtype=float)))

    def __call__(self, t):
        # fast-growing gauges overflow to inf, which is the right value here
        with np.errstate(over="ignore"):
            return np.exp(self.log_delta(t))

    def elasticity(self, t):
        """t Delta'(t) / Delta(t) = d log Delta / d log t."""
        return self._elasticity_u(np.log(np.asarray(t, dtype=float)))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self(t) * self.elasticity(t) / t

    def inverse(self, y, rel_tol: float = 1e-12) -> float:
        return delta_inverse(self, y, rel_tol)

    def to_dict(self) -> dict:
        d = {"family": self.family, "alpha": self.alpha, "C_omega": self.C_omega}
        if self.table:
            d["table"] = [list(r) for r in self.table]
        return d


def delta_inverse(delta: BrjunoFunction, y: float, rel_tol: float = 1e-12) -> float:
    """Solve Delta(t) = y by bracket doubling and bisection in log t."""
    if not y >= 1.0:
        raise BracketFailure(f"y = {y} lies below Delta(1) = 1")
    target = math.log(y)
    if target == 0.0:
        return 1.0
    u_lo, u_hi = 0.0, math.log(2.0)
    while float(delta._log_delta_u(u_hi)) < target:
        # double t while small, then double log t
        u_lo = u_hi
        u_hi = u_hi + math.log(2.0) if u_hi < 1.0 else 2.0 * u_hi
        if u_hi > 700.0:
            raise BracketFailure(f"no bracket for Delta(t) = {y} below t = e^700")
    for _ in range(200):
        u_mid = 0.5 * (u_lo + u_hi)
        gap = float(delta._log_delta_u(u_mid)) - target
        if abs(gap) < 1.0 and abs(math.expm1(gap)) <= rel_tol:
            return math.exp(u_mid)
        if gap < 0:
            u_lo = u_mid
        else:
            u_hi = u_mid
        if u_hi - u_lo <= 4 * np.spacing(u_hi):
            break
    return math.exp(0.5 * (u_lo + u_hi))


@dataclass(frozen=True)
class HypothesisReport:
    h1: bool
    h2: bool
    h3: bool
    t0: float
    growth_ok: bool  # t Delta' >= Delta on the grid
    lower_bound_ok: bool  # Delta(t) >= t (log t + 1)
    upper_bound_ok: bool  # Delta(t) < exp(t / log t), t > 1
    h3_monotone_ok: bool
    first_violation: dict
    brjuno_integral: float
    brjuno_tail: float
    is_brjuno: bool
    tail_slope: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _resolve_grid(t_grid) -> np.ndarray:
    if t_grid is None:
        return np.geomspace(1.0, 1e6, 4000)
    if isinstance(t_grid, tuple) and len(t_grid) == 2:
        t_max, count = t_grid
        return np.geomspace(1.0, float(t_max), int(count))
    return np.asarray(t_grid, dtype=float)


def brjuno_integral(delta: BrjunoFunction, T: float = 1e6, u_max: float = 600.0):
    """Estimate int_1^T log Delta(t)/t^2 dt and the tail beyond T.

    Works in u = log t, where the integrand is g(u) = log Delta(e^u) e^-u.
    The tail is integrated numerically to ``u_max`` and continued with the
    power law fitted to g on [u_max/2, u_max].  Returns (integral, tail,
    is_brjuno, tail_slope); the gauge is flagged non-Brjuno when g decays no
    faster than 1/u.
    """

    def g(u):
        with np.errstate(over="ignore", invalid="ignore"):
            val = float(delta._log_delta_u(u)) * math.exp(-u)
        return val

    U = math.log(T)
    head, _ = integrate.quad(g, 0.0, U, limit=400)
    us = np.linspace(u_max / 2, u_max, 64)
    gs = np.array([g(u) for u in us])
    if not np.all(np.isfinite(gs)):
        return head, math.inf, False, math.inf
    if np.all(gs <= 0):
        return head, 0.0, True, -math.inf
    slope = float(np.polyfit(np.log(us), np.log(np.maximum(gs, 1e-300)), 1)[0])
    if slope >= -1.0 - 1e-3:
        return head, math.inf, False, slope
    mid, _ = integrate.quad(g, U, u_max, limit=800)
    far = gs[-1] * u_max / (-slope - 1.0)
    return head, mid + far, True, slope


def check_hypotheses(
    delta: BrjunoFunction, t_grid=None, t0: float = math.e**2, T_integral: float = 1e6
) -> HypothesisReport:
    """Check H.1 / H.2 / H.3 on a sample grid of [1, inf).

    H.1: t Delta'(t) >= Delta(t) and Delta(t) >= t (log t + 1).
    H.2: H.1 and Delta(t) < exp(t / log t) for t > 1.
    H.3: H.1 and log Delta(t) / t non-increasing on grid points >= t0.
    """
    if t0 < math.e:
        raise ValueError("t0 must be >= e")
    ts = np.unique(_resolve_grid(t_grid))
    if ts[0] < 1.0:
        raise ValueError("t_grid must lie in [1, inf)")
    u = np.log(ts)
    ld = delta._log_delta_u(u)
    if np.any(np.diff(ld) <= 0):
        bad = int(np.argmax(np.diff(ld) <= 0))
        raise NonMonotoneDelta(f"Delta not strictly increasing near t = {ts[bad]:.6g}")

    tol = 1e-12
    first = {}
    el = delta._elasticity_u(u)
    growth = el >= 1.0 - tol
    lower = ld >= u + np.log1p(u) - tol * np.maximum(1.0, np.abs(ld))
    with np.errstate(divide="ignore"):
        cap = np.where(u > 0, ts / np.where(u > 0, u, 1.0), np.inf)
    upper = ld < cap
    sel = ts >= t0
    ratio = ld[sel] / ts[sel]
    mono = np.diff(ratio) <= tol * np.maximum(1.0, np.abs(ratio[:-1]))

    for name, mask, grid in (
        ("growth", growth, ts),
        ("lower_bound", lower, ts),
        ("upper_bound", upper, ts),
        ("h3_monotone", mono, ts[sel][1:]),
    ):
        if not np.all(mask):
            first[name] = float(grid[int(np.argmin(mask))])

    g_ok = bool(np.all(growth))
    l_ok = bool(np.all(lower))
    u_ok = bool(np.all(upper))
    m_ok = bool(np.all(mono))
    h1 = g_ok and l_ok
    head, tail, ok, slope = brjuno_integral(delta, T_integral)
    return HypothesisReport(
        h1=h1,
        h2=h1 and u_ok,
        h3=h1 and m_ok,
        t0=float(t0),
        growth_ok=g_ok,
        lower_bound_ok=l_ok,
        upper_bound_ok=u_ok,
        h3_monotone_ok=m_ok,
        first_violation=first,
        brjuno_integral=float(head),
        brjuno_tail=float(tail),
        is_brjuno=bool(ok),
        tail_slope=float(slope),
    )


# --------------------------------------------------------------------------
# Smallest deviation

HYPOTHESES = ("H.1", "H.2", "H.3")
DEFAULT_EPSILON = 0.1
_DELTA_FLOOR = float(np.finfo(float).tiny)


def delta_zero(
    delta: BrjunoFunction,
    hypothesis: str,
    n: int,
    epsilon: float = DEFAULT_EPSILON,
    C_breve: float = 1.0,
    C_omega: float | None = None,
    *,
    return_clamped: bool = False,
):
    """The smallest deviation for scale n under the given hypothesis.

    The "1-" exponent is realized as 1 - epsilon.  ``C_omega`` defaults to the
    constant stored on ``delta``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (0.0 <= epsilon < 0.5):
        raise ValueError("epsilon must lie in [0, 0.5)")
    c_om = delta.C_omega if C_omega is None else C_omega
    expo = 1.0 - epsilon
    t_inv = delta_inverse(delta, c_om * n)
    if hypothesis == "H.1":
        val = C_breve * float(delta.log_delta(n)) / t_inv**expo
    elif hypothesis == "H.2":
        lg = math.log(t_inv)
        val = math.inf if lg <= 0 else C_breve / lg**expo
    elif hypothesis == "H.3":
        val = C_breve * math.log(c_om * n) / t_inv**expo
    else:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
    clamped = val < _DELTA_FLOOR
    if clamped:
        val = _DELTA_FLOOR
    return (val, clamped) if return_clamped else val


@dataclass
class DeltaZeroTable:
    hypothesis: str
    epsilon: float
    C_breve: float
    C_omega: float
    delta: BrjunoFunction
    entries: dict
    clamped: bool = False
    nonincreasing_from: int | None = None

    @classmethod
    def build(
        cls,
        delta: BrjunoFunction,
        hypothesis: str,
        ns: Iterable[int],
        epsilon: float = DEFAULT_EPSILON,
        C_breve: float = 1.0,
        C_omega: float | None = None,
    ) -> "DeltaZeroTable":
        c_om = delta.C_omega if C_omega is None else C_omega
        entries = {}
        any_clamped = False
        for n in sorted(set(int(n) for n in ns)):
            val, cl = delta_zero(delta, hypothesis, n, epsilon, C_breve, c_om, return_clamped=True)
            entries[n] = val
            any_clamped |= cl
        keys = sorted(entries)
        vals = [entries[k] for k in keys]
        start = None
        # smallest n from which the table is non-increasing
        for i in range(len(keys) - 1, -1, -1):
            if i == len(keys) - 1 or vals[i] >= vals[i + 1]:
                start = keys[i]
            else:
                break
        return cls(hypothesis, epsilon, C_breve, c_om, delta, entries, any_clamped, start)

    def to_dict(self) -> dict:
        return {
            "type": "DeltaZeroTable",
            "hypothesis": self.hypothesis,
            "epsilon": self.epsilon,
            "C_breve": self.C_breve,
            "C_omega": self.C_omega,
            "delta": self.delta.to_dict(),
            "clamped": self.clamped,
            "nonincreasing_from": self.nonincreasing_from,
            "entries": {str(k): repr(v) for k, v in self.entries.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def certify_c_omega(freq, delta: BrjunoFunction, kmax: int = 10**4):
    """Largest C with ||k omega|| > C / Delta(k) for all 1 <= k <= kmax.

    Returns (C, k_binding).  The scan runs in the frequency's working
    precision; the returned constant is shaded by one part in 1e12 so the
    inequality is strict.
    """
    if isinstance(freq, Frequency):
        prec = freq.precision_bits
        w = freq.value
    else:
        prec = DEFAULT_PRECISION_BITS
        w = parse_omega(freq, prec)
    ks = np.arange(1, kmax + 1)
    with mpmath.workprec(prec):
        dist = np.empty(kmax)
        for i, k in enumerate(range(1, kmax + 1)):
            r = mpmath.frac(k * w)
            dist[i] = float(min(r, 1 - r))
    prod = np.log(dist) + delta.log_delta(ks.astype(float))
    i = int(np.argmin(prod))
    return float(math.exp(prod[i]) * (1.0 - 1e-12)), int(ks[i])


def with_certified_constant(delta: BrjunoFunction, freq, kmax: int = 10**4) -> BrjunoFunction:
    c, _ = certify_c_omega(freq, delta, kmax)
    return BrjunoFunction(delta.family, delta.alpha, c, delta.table)


def brjuno_violations(freq, delta: BrjunoFunction, kmax: int = 10**4, C_omega: float | None = None) -> list:
    """k <= kmax at which ||k omega|| > C_omega / Delta(k) fails."""
    c = delta.C_omega if C_omega is None else C_omega
    w = float(freq) if not isinstance(freq, Frequency) else freq.omega
    ks = np.arange(1, kmax + 1, dtype=float)
    bad = circle_distance(ks * w) * np.exp(delta.log_delta(ks)) <= c
    return [int(k) for k in ks[bad]]
