"""Trigonometric polynomials on the torus and their annulus extensions.

An observable is f(z) = sum_k c_k exp(2 pi i k z) with finitely many k;
z = x + i y is evaluated for |y| < rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutsideAnnulus

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class AnalyticObservable:
    ks: np.ndarray  # int64 frequencies, sorted, unique
    cs: np.ndarray  # complex128 coefficients
    rho: float = 1.0
    name: str = ""

    def __post_init__(self):
        ks = np.asarray(self.ks, dtype=np.int64).ravel()
        cs = np.asarray(self.cs, dtype=np.complex128).ravel()
        if ks.shape != cs.shape:
            raise ValueError("ks and cs must have the same length")
        order = np.argsort(ks, kind="stable")
        ks, cs = ks[order], cs[order]
        if ks.size and np.any(np.diff(ks) == 0):
            # merge duplicate frequencies
            uk, inv = np.unique(ks, return_inverse=True)
            merged = np.zeros(uk.size, dtype=np.complex128)
            np.add.at(merged, inv, cs)
            ks, cs = uk, merged
        if ks.size == 0:
            ks = np.zeros(1, dtype=np.int64)
            cs = np.zeros(1, dtype=np.complex128)
        ks.setflags(write=False)
        cs.setflags(write=False)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "cs", cs)
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    @classmethod
    def from_coeffs(cls, coeffs: dict, rho: float = 1.0, name: str = "") -> "AnalyticObservable":
        ks = np.array(sorted(coeffs), dtype=np.int64)
        return cls(ks, np.array([coeffs[k] for k in ks], dtype=np.complex128), rho, name)

    @classmethod
    def from_triples(cls, triples, rho: float = 1.0, name: str = "") -> "AnalyticObservable":
        ks = [int(t[0]) for t in triples]
        cs = [complex(float(t[1]), float(t[2])) for t in triples]
        return cls(np.array(ks), np.array(cs), rho, name)

    @property
    def K(self) -> int:
        return int(np.max(np.abs(self.ks)))

    def coeff(self, k: int) -> complex:
        idx = np.searchsorted(self.ks, k)
        if idx < self.ks.size and self.ks[idx] == k:
            return complex(self.cs[idx])
        return 0j

    def coeff_dict(self) -> dict:
        return {int(k): complex(c) for k, c in zip(self.ks, self.cs)}

    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.cs)))

    @property
    def mean(self) -> complex:
        return self.coeff(0)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.cs != 0)

    @property
    def is_constant(self) -> bool:
        return bool(np.all((self.cs == 0) | (self.ks == 0)))

    def is_real_valued(self, tol: float = 0.0) -> bool:
        """True when c_{-k} = conj(c_k) for every k (to ``tol`` absolute)."""
        d = self.coeff_dict()
        for k, c in d.items():
            if abs(d.get(-k, 0j) - c.conjugate()) > tol:
                return False
        return True

    def __call__(self, x, y=0.0):
        return evaluate(self, x, y)

    def scaled(self, factor: complex) -> "AnalyticObservable":
        return AnalyticObservable(self.ks, self.cs * factor, self.rho, self.name)

    def to_triples(self) -> list:
        return [[int(k), float(c.real), float(c.imag)] for k, c in zip(self.ks, self.cs)]

    def laurent_roots(self) -> np.ndarray:
        """Roots z != 0 of the Laurent polynomial sum_k c_k z^k."""
        nz = self.cs != 0
        if not np.any(nz):
            raise ValueError("zero observable has no finite root set")
        ks = self.ks[nz]
        cs = self.cs[nz]
        kmin, kmax = int(ks[0]), int(ks[-1])
        if kmin == kmax:
            return np.zeros(0, dtype=np.complex128)
        poly = np.zeros(kmax - kmin + 1, dtype=np.complex128)
        poly[ks - kmin] = cs
        # np.roots wants the highest degree first
        return np.roots(poly[::-1])

    def mean_log_abs(self) -> float:
        """Integral of log|f| over the torus, via Jensen's formula for the
        Laurent polynomial: log|c_top| + sum over roots of log max(1, |r|)."""
        nz = self.cs != 0
        top = self.cs[nz][-1]
        roots = self.laurent_roots()
        return float(math.log(abs(top)) + np.sum(np.log(np.maximum(1.0, np.abs(roots)))))

    def torus_zeros(self, tol: float = 1e-9) -> np.ndarray:
        """Phases x in [0, 1) where f vanishes on the real torus."""
        if self.is_constant:
            return np.zeros(0)
        roots = self.laurent_roots()
        on = roots[np.abs(np.abs(roots) - 1.0) < tol]
        xs = np.mod(np.angle(on) / TWO_PI, 1.0)
        if xs.size == 0:
            return xs
        # confirm with a direct evaluation; np.roots is only backward stable
        keep = np.abs(evaluate(self, xs)) <= 1e3 * tol * max(1.0, self.l1_norm)
        return np.sort(xs[keep])


def evaluate(f: AnalyticObservable, x, y=0.0):
    """sum_k c_k exp(2 pi i k (x + i y)), vectorized over x."""
    y = float(y)
    if abs(y) >= f.rho:
        raise OutsideAnnulus(f"|Im z| = {abs(y)} is not inside the annulus of half-width {f.rho}")
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * TWO_PI * np.multiply.outer(x, f.ks.astype(float)))
    weight = f.cs * np.exp(-TWO_PI * f.ks * y)
    out = phase @ weight
    return out if out.ndim else complex(out)


def conj_dual(f: AnalyticObservable) -> AnalyticObservable:
    """The reflection f~(z) = conj(f(conj z)): coefficient at -k is conj(c_k).

    On the real torus f~(x) = conj(f(x)); off the circle f~ is analytic on the
    same annulus.
    """
    return AnalyticObservable(-f.ks, np.conj(f.cs), f.rho, f.name + "~" if f.name else "")


def sup_norm_annulus(f: AnalyticObservable, rho: float, grid: int = 2048):
    """(upper bound, sampled estimate) of sup |f| over |Im z| <= rho.

    The bound is sum |c_k| e^{2 pi |k| rho}; the estimate samples both edges
    and the real line (the sup of a trig polynomial modulus on a closed strip
    is attained on its boundary).
    """
    if rho >= f.rho:
        raise OutsideAnnulus(f"rho = {rho} is not inside the annulus of half-width {f.rho}")
    bound = float(np.sum(np.abs(f.cs) * np.exp(TWO_PI * np.abs(f.ks) * rho)))
    xs = np.arange(grid) / grid
    est = 0.0
    for y in (-rho, 0.0, rho):
        est = max(est, float(np.max(np.abs(evaluate(f, xs, y)))))
    return bound, min(est, bound)


def sup_norm_torus(f: AnalyticObservable, grid: int = 4096) -> float:
    """Sampled sup |f| on the real torus (exact for constants)."""
    if f.is_constant:
        return abs(f.mean)
    xs = np.arange(grid) / grid
    return float(np.max(np.abs(evaluate(f, xs))))


# --------------------------------------------------------------------------
# presets


def constant(c: complex, rho: float = 1.0) -> AnalyticObservable:
    return AnalyticObservable(np.array([0]), np.array([complex(c)]), rho, f"constant({c})")


def amo_potential(lam: float, rho: float = 1.0) -> AnalyticObservable:
    """2 lam cos(2 pi x)."""
    return AnalyticObservable(np.array([-1, 1]), np.array([lam, lam], dtype=complex), rho, f"amo({lam})")


def harper_weight(lam1: float, lam2: float, lam3: float, omega: float, rho: float = 1.0) -> AnalyticObservable:
    """lam3 e^{-2 pi i (x + omega/2)} + lam2 + lam1 e^{2 pi i (x + omega/2)}."""
    ph = np.exp(1j * math.pi * omega)
    return AnalyticObservable(
        np.array([-1, 0, 1]),
        np.array([lam3 / ph, lam2, lam1 * ph], dtype=complex),
        rho,
        f"harper({lam1},{lam2},{lam3})",
    )


def from_spec(spec, omega: float | None = None) -> AnalyticObservable:
    """Build an observable from a config entry.

    Accepted forms: a list of [k, re, im] triples; a number (constant);
    or a dict with ``preset`` in {constant, amo-potential, harper-weight}
    (or ``coeffs``) plus an optional ``rho``.
    """
    if isinstance(spec, (int, float, complex)):
        return constant(spec)
    if isinstance(spec, list):
        return AnalyticObservable.from_triples(spec)
    if not isinstance(spec, dict):
        raise ValueError(f"cannot build an observable from {spec!r}")
    rho = float(spec.get("rho", 1.0))
    if "coeffs" in spec:
        return AnalyticObservable.from_triples(spec["coeffs"], rho, spec.get("name", ""))
    preset = spec.get("preset")
    if preset == "constant":
        c = spec.get("c", 1.0)
        if isinstance(c, list):
            c = complex(c[0], c[1])
        return constant(c, rho)
    if preset == "amo-potential":
        return amo_potential(float(spec["lambda"]), rho)
    if preset == "harper-weight":
        om = spec.get("omega", omega)
        if om is None:
            raise ValueError("harper-weight preset needs omega")
        return harper_weight(float(spec["lambda1"]), float(spec["lambda2"]), float(spec["lambda3"]), float(om), rho)
    raise ValueError(f"unknown observable preset {preset!r}")
