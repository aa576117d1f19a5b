"""Experiment orchestration: config validation, on-disk cache, scenarios
and report bundles."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, parallel
from ._accel import backend_name
from .analytic import from_spec
from .cocycle import (
    CocycleParams,
    avalanche_check,
    finite_lyapunov,
    random_hyperbolic_sequence,
)
from . import kernels
from .ergodic import Sampler, ldt_experiment
from .errors import (
    AssertionFailed,
    CacheCorrupt,
    ConfigError,
    HypothesisDiff,
    HypothesisLarge,
    LabError,
    ScenarioError,
)
from .freq import (
    FAMILIES,
    HYPOTHESES,
    BrjunoFunction,
    certify_c_omega,
    continued_fraction,
    delta_zero,
)
from .spectrum import (
    build_symmetrized,
    char_poly_logabs,
    count_in_window,
    eigenvalues,
    jensen_zero_count,
    spectral_window,
    theorem_window_radius,
)

SCHEMA_VERSION = 1
CACHE_FORMAT = 1
SCENARIOS = ("ldt-determinant", "ldt-matrix", "sbet", "eigencount", "ap-check", "lyapunov-table", "jensen-vs-sturm")

_observable = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}, "minItems": 1},
        {
            "type": "object",
            "properties": {
                "preset": {"enum": ["constant", "amo-potential", "harper-weight"]},
                "coeffs": {"type": "array"},
                "rho": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    ]
}
_complex = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_pos_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario", "params"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "params": {
            "type": "object",
            "required": ["a", "v"],
            "additionalProperties": False,
            "properties": {
                "a": _observable,
                "v": _observable,
                "E": _complex,
                "exclusion_radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "frequency": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega": {"type": "string"},
                "depth": _pos_int,
                "precision_bits": {"type": "integer", "minimum": 64},
            },
        },
        "delta": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": list(FAMILIES)},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "table": {"type": "array"},
            },
        },
        "hypothesis": {"enum": list(HYPOTHESES)},
        "constants": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "C_omega": {"oneOf": [{"const": "certify"}, {"type": "number", "exclusiveMinimum": 0}]},
                "C_breve": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "grid_log2": {"type": "integer", "minimum": 6, "maximum": 24},
                "samples": {"type": "integer", "minimum": 1000},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "options": {"type": "object"},
    },
}

DEFAULTS = {
    "params": {"E": 0.0, "exclusion_radius": 1e-8},
    "frequency": {"omega": "golden", "depth": 20, "precision_bits": 256},
    "delta": {"family": "poly-log", "alpha": 2.0, "table": []},
    "hypothesis": "H.1",
    "constants": {
        "C_omega": "certify",
        "C_breve": 1.0,
        "epsilon": 0.1,
        "h": 0.5,
        "grid_log2": 11,
        "samples": 100_000,
        "seed": 0,
    },
}

OPTION_DEFAULTS = {
    "ldt-determinant": {
        "n": 512,
        "delta_multipliers": [1, 2, 3, 4],
        "sampler": "stratified-jitter",
        "centering": "empirical-mean",
        "tripwire_tol": 1e-8,
        "assert_shape": False,
        "min_r_squared": 0.9,
    },
    "ldt-matrix": {
        "n": 512,
        "delta_multipliers": [1, 2, 3, 4],
        "sampler": "stratified-jitter",
        "centering": "empirical-mean",
        "variant": "plain",
        "ref_n": None,
        "assert_shape": False,
        "min_r_squared": 0.9,
    },
    "sbet": {
        "n": 512,
        "u": [[-1, 0.5, 0.0], [1, 0.5, 0.0]],
        "delta_multipliers": [1, 2, 3, 4],
        "sampler": "stratified-jitter",
        "centering": "nL",
        "assert_shape": False,
        "min_r_squared": 0.9,
    },
    "eigencount": {"n": 256, "phases": 8, "centers": 8},
    "ap-check": {"preset": "random", "count": 1000, "n_max": 50, "H": 1000.0, "C": 10.0},
    "lyapunov-table": {"ns": [64, 128, 256, 512, 1024], "ref_n": 4096, "identity_tol": 1e-6, "max_L": None},
    "jensen-vs-sturm": {"n": 12, "disks": 20, "margin": 0.02},
}


# ---------------------------------------------------------------- config


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: dict) -> dict:
    """Schema-check ``raw`` and return it with every default filled in."""
    import jsonschema

    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errs = sorted(v.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(e.message, path)
    cfg = _merge(DEFAULTS, raw)
    scen = cfg["scenario"]
    opts = dict(raw.get("options", {}))
    unknown = set(opts) - set(OPTION_DEFAULTS[scen])
    if unknown:
        raise ConfigError(f"unknown option(s) {sorted(unknown)} for scenario {scen}", "options")
    cfg["options"] = _merge(OPTION_DEFAULTS[scen], opts)
    return cfg


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc), str(path)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", str(path))
    return validate_config(raw)


def build_params(params: dict, frequency: dict | None = None) -> CocycleParams:
    """CocycleParams from the ``params`` and ``frequency`` config sections."""
    fr = _merge(DEFAULTS["frequency"], frequency or {})
    p = _merge(DEFAULTS["params"], params)
    freq = continued_fraction(fr["omega"], fr["depth"], fr["precision_bits"])
    E = p["E"]
    E = complex(E[0], E[1]) if isinstance(E, list) else complex(E)
    return CocycleParams(from_spec(p["a"], float(freq)), from_spec(p["v"], float(freq)), E, freq, p["exclusion_radius"])


def load_params(path) -> CocycleParams:
    """Params file: a JSON object with ``params`` (and optional
    ``frequency``) sections, or a bare ``params`` object."""
    try:
        raw = json.loads(Path(path).read_text())
        if "params" not in raw:
            raw = {"params": raw}
        return build_params(raw["params"], raw.get("frequency"))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, LabError) as exc:
        raise ConfigError(str(exc), str(path)) from exc


@dataclass
class ExperimentConfig:
    resolved: dict
    params: CocycleParams
    delta: BrjunoFunction
    C_omega: float

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = validate_config(raw)
        try:
            params = build_params(cfg["params"], cfg["frequency"])
            freq = params.omega
            d = cfg["delta"]
            table = tuple(tuple(r) for r in d["table"])
            delta = BrjunoFunction(d["family"], d["alpha"], 1.0, table)
            co = cfg["constants"]["C_omega"]
            C_omega = certify_c_omega(freq, delta)[0] if co == "certify" else float(co)
        except ConfigError:
            raise
        except (LabError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc), "params") from exc
        cfg = copy.deepcopy(cfg)
        cfg["constants"]["C_omega_resolved"] = C_omega
        return cls(cfg, params, delta, C_omega)

    @property
    def scenario(self) -> str:
        return self.resolved["scenario"]

    @property
    def options(self) -> dict:
        return self.resolved["options"]

    @property
    def constants(self) -> dict:
        return self.resolved["constants"]

    def delta0(self, n: int) -> float:
        c = self.constants
        return delta_zero(self.delta, self.resolved["hypothesis"], n, c["epsilon"], c["C_breve"], self.C_omega)

    def sampler(self) -> Sampler:
        c = self.constants
        return Sampler(self.options.get("sampler", "stratified-jitter"), c["samples"], c["seed"])


# ---------------------------------------------------------------- cache


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def cache_key(key: dict) -> str:
    return hashlib.sha256(_canonical(key).encode()).hexdigest()


@dataclass
class Cache:
    """Content-addressed JSON cache with atomic writes."""

    root: Path
    hits: int = 0
    misses: int = 0
    corrupt: int = 0
    computed: list = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: dict) -> Path:
        return self.root / f"{cache_key(key)}.json"

    def _read(self, p: Path, key: dict):
        doc = json.loads(p.read_text())
        if doc.get("format_version") != CACHE_FORMAT:
            return None
        if doc.get("key") != key:
            return None
        if doc.get("digest") != hashlib.sha256(_canonical(doc.get("payload")).encode()).hexdigest():
            raise CacheCorrupt(f"digest mismatch in {p.name}")
        return doc["payload"]

    def _write(self, p: Path, key: dict, payload) -> None:
        doc = {
            "format_version": CACHE_FORMAT,
            "key": key,
            "digest": hashlib.sha256(_canonical(payload).encode()).hexdigest(),
            "payload": payload,
        }
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(_canonical(doc))
        os.replace(tmp, p)

    def lookup_or_compute(self, key: dict, producer):
        """Cached payload for ``key``, else ``producer()`` stored under it."""
        key = json.loads(_canonical(key))
        p = self.path(key)
        if p.exists():
            try:
                val = self._read(p, key)
            except (CacheCorrupt, json.JSONDecodeError, UnicodeDecodeError):
                self.corrupt += 1
                val = None
            if val is not None:
                self.hits += 1
                return val
        self.misses += 1
        val = producer()
        self.computed.append(cache_key(key))
        self._write(p, key, val)
        return val


def cache_lookup_or_compute(cache: Cache, key: dict, producer):
    return cache.lookup_or_compute(key, producer)


# ---------------------------------------------------------------- results


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    assertions: list = field(default_factory=list)

    def check(self, name: str, ok: bool, detail="") -> None:
        self.assertions.append({"name": name, "passed": bool(ok), "detail": detail})

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)


def _ldt_common(cfg: ExperimentConfig, out: Outcome, observable: str, **kw) -> None:
    o = cfg.options
    n = int(o["n"])
    d0 = cfg.delta0(n)
    deltas = [m * d0 for m in o["delta_multipliers"]]
    rep = ldt_experiment(observable, cfg.params, n, deltas, cfg.sampler(), o["centering"], **kw)
    out.results["delta0"] = d0
    out.results["report"] = rep.to_dict()
    out.tables["ldt"] = (("delta", "measure", "ci_lo", "ci_hi"), rep.csv_rows())
    out.check("nested_exceptional_sets", rep.nonincreasing(), "measures non-increasing in delta")
    shape = rep.strictly_decreasing() and rep.fit is not None and rep.fit["r_squared"] >= o["min_r_squared"]
    out.results["shape_ok"] = bool(shape)
    if o["assert_shape"]:
        out.check("decay_shape", shape, "strictly decreasing and log-linear fit")


def run_ldt_determinant(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    n = int(cfg.options["n"])
    xs = cfg.sampler().points()
    P = cfg.params
    args = (P.w, complex(P.E), *P.kernel_args())
    tol = cfg.options["tripwire_tol"]

    def work(s, e, _i):
        ent, ls, _ = kernels.transfer_product(xs[s:e], *args, n, kernels.VARIANT_A, 1)
        with np.errstate(divide="ignore"):
            lm = np.log(np.abs(ent[:, 0, 0])) + ls
        lf = kernels.det_lastpair(xs[s:e], *args, n)[0]
        fin = np.isfinite(lm) & np.isfinite(lf)
        r = np.abs(lm - lf)[fin] / np.maximum(1.0, np.abs(lf[fin]))
        return float(r.max()) if r.size else 0.0

    worst = max(parallel.block_map(work, xs.size))
    out.results["tripwire_max_residual"] = worst
    if not worst <= tol:
        raise AssertionFailed(f"transfer-matrix and recurrence values of log|f_n| differ by {worst:.3g}")
    _ldt_common(cfg, out, "determinant")
    return out


def run_ldt_matrix(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    _ldt_common(cfg, out, "matrix", variant=cfg.options["variant"], ref_n=cfg.options["ref_n"], grid_log2=cfg.constants["grid_log2"])
    return out


def run_sbet(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    u = from_spec(cfg.options["u"])
    if not u.is_real_valued(1e-12):
        raise ConfigError("u must be real-valued", "options/u")
    _ldt_common(cfg, out, "birkhoff", u=u, omega=cfg.params.omega)
    return out


def run_eigencount(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    o = cfg.options
    n = int(o["n"])
    d0 = cfg.delta0(n)
    h = cfg.constants["h"]
    radius = theorem_window_radius(d0, h)
    bound = 13.0 * n * d0
    rng = parallel.block_rng(cfg.constants["seed"], 0)
    xs = rng.random(int(o["phases"]))
    lo, hi = spectral_window(cfg.params)
    rows = []
    partition_ok = True
    worst = 0
    for x in xs:
        key = {"kind": "eigenvalues", "params": cfg.params.describe(), "x": float(x), "n": n, "backend": backend_name()}
        ev = np.array(cache.lookup_or_compute(key, lambda: eigenvalues(build_symmetrized(cfg.params, x, n)).tolist()))
        T = build_symmetrized(cfg.params, x, n)
        # partition of the real line into windows of width 2 radius
        edges = np.concatenate([[-np.inf], np.arange(lo - radius, hi + 3 * radius, 2 * radius), [np.inf]])
        counts = [count_in_window(T, a, b) for a, b in zip(edges[:-1], edges[1:])]
        # eigenvalues sitting exactly on an edge are in no open window
        on_edge = int(np.sum(np.isin(ev, edges)))
        partition_ok &= sum(counts) + on_edge == n
        for E0 in rng.uniform(lo, hi, int(o["centers"])):
            c = count_in_window(T, E0 - radius, E0 + radius)
            worst = max(worst, c)
            rows.append((float(x), float(E0), radius, c, bound))
    out.results.update({"delta0": d0, "h": h, "radius": radius, "bound": bound, "max_count": worst})
    out.tables["eigencount"] = (("x", "E0", "radius", "count", "bound_13n_delta0"), rows)
    out.check("partition_sums_to_n", partition_ok)
    out.check("count_le_13n_delta0", worst <= bound, f"max count {worst} vs bound {bound:.4g} (calibration-dependent)")
    return out


def run_ap_check(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    o = cfg.options
    H, Cc = float(o["H"]), float(o["C"])
    rows = []
    ok = True
    rejected = 0
    if o["preset"] == "diagonal":
        n = max(3, min(int(o["n_max"]), math.ceil(H) - 1))
        mats = [np.diag([H, 1.0 / H]).astype(complex)] * n
        r = avalanche_check(mats, H)
        rows.append((n, H, r.residual, r.ratio))
        ok = r.residual == 0.0
        out.check("diagonal_residual_zero", ok, r.residual)
    else:
        for i in range(int(o["count"])):
            rng = parallel.block_rng(cfg.constants["seed"], i)
            n = int(rng.integers(3, int(o["n_max"]) + 1))
            mats = random_hyperbolic_sequence(rng, n, H)
            try:
                r = avalanche_check(mats, H)
            except (HypothesisLarge, HypothesisDiff):
                rejected += 1
                continue
            rows.append((n, H, r.residual, r.ratio))
            ok &= r.residual <= Cc * n / H
        out.check("residual_le_C_n_over_H", ok, f"C = {Cc}")
    out.results.update({"checked": len(rows), "rejected": rejected, "max_ratio": max((r[3] for r in rows), default=0.0)})
    out.tables["avalanche"] = (("n", "H", "residual", "ratio"), rows)
    return out


def run_lyapunov_table(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    o = cfg.options
    g = cfg.constants["grid_log2"]
    P = cfg.params
    D = P.D

    def L(n, var):
        key = {"kind": "lyapunov", "params": P.describe(), "n": int(n), "grid_log2": g, "variant": var, "backend": backend_name()}
        return cache.lookup_or_compute(key, lambda: finite_lyapunov(P, n, g, var).__dict__)

    rows = []
    id_ok = True
    for n in list(o["ns"]) + ([o["ref_n"]] if o["ref_n"] else []):
        lp, la, lu = L(n, "plain"), L(n, "a"), L(n, "unimodular")
        rows.append((int(n), lp["value"], la["value"], lu["value"], D, lp["skipped"]))
        if lp["skipped"] == 0:
            id_ok &= abs(la["value"] - lp["value"] - D) <= o["identity_tol"]
    out.tables["lyapunov"] = (("n", "L_n", "L_n_a", "L_n_u", "D", "skipped_points"), rows)
    out.check("La_minus_L_equals_D", id_ok)
    if o["max_L"] is not None:
        out.check("L_n_below_max", all(r[1] <= o["max_L"] for r in rows if r[0] >= 64), o["max_L"])
    return out


def run_jensen_vs_sturm(cfg: ExperimentConfig, cache: Cache) -> Outcome:
    out = Outcome()
    o = cfg.options
    n = int(o["n"])
    lo, hi = spectral_window(cfg.params)
    rows = []
    ok = True
    i = 0
    while len(rows) < int(o["disks"]):
        rng = parallel.block_rng(cfg.constants["seed"], i)
        i += 1
        x = float(rng.random())
        E0 = float(rng.uniform(lo, hi))
        R = float(rng.uniform(0.05, 0.5) * (hi - lo))
        T = build_symmetrized(cfg.params, x, n)
        ev = eigenvalues(T)
        # keep disks whose boundary is clear of the spectrum so both counts are unambiguous
        if np.any(np.abs(np.abs(ev - E0) - R) < o["margin"] * R):
            continue
        J = jensen_zero_count(char_poly_logabs(cfg.params, x, n), E0, R, log_abs=True)
        S = count_in_window(T, E0 - R, E0 + R)
        ok &= J.count == S
        rows.append((x, E0, R, J.count, S, J.estimate))
    out.tables["jensen_vs_sturm"] = (("x", "E0", "R", "jensen_count", "sturm_count", "jensen_estimate"), rows)
    out.check("jensen_equals_sturm", ok)
    return out


RUNNERS = {
    "ldt-determinant": run_ldt_determinant,
    "ldt-matrix": run_ldt_matrix,
    "sbet": run_sbet,
    "eigencount": run_eigencount,
    "ap-check": run_ap_check,
    "lyapunov-table": run_lyapunov_table,
    "jensen-vs-sturm": run_jensen_vs_sturm,
}


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_bundle(out_dir, cfg: ExperimentConfig, outcome: Outcome) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, (header, rows) in outcome.tables.items():
        fn = f"{name}.csv"
        with open(out_dir / fn, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        manifest.append({"table": fn, "columns": list(header), "x": header[0], "y": list(header[1:])})
    report = {
        "library": "cocycle_lab",
        "version": __version__,
        "backend": backend_name(),
        "scenario": cfg.scenario,
        "config": cfg.resolved,
        "passed": outcome.passed,
        "assertions": outcome.assertions,
        "results": outcome.results,
        "tables": [m["table"] for m in manifest],
    }
    report = _jsonable(report)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out_dir / "plots.json").write_text(json.dumps({"plots": manifest}, indent=2, sort_keys=True) + "\n")
    return report


def run(config, out_dir, cache_dir=None, seed: int | None = None, threads: int | None = None) -> dict:
    """Execute one scenario and write report.json, CSV tables and plots.json.

    ``config`` is a dict or a path.  Raises ConfigError for invalid input,
    AssertionFailed for a tripwire abort and ScenarioError for module errors.
    """
    if isinstance(config, (str, os.PathLike)):
        try:
            raw = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc), str(config)) from exc
    else:
        raw = copy.deepcopy(config)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        raw.setdefault("constants", {})["seed"] = int(seed)
    cfg = ExperimentConfig.from_dict(raw)
    if threads is not None:
        parallel.set_threads(threads)
    cache = Cache(Path(cache_dir) if cache_dir else Path(out_dir) / ".cache")
    try:
        outcome = RUNNERS[cfg.scenario](cfg, cache)
    except (AssertionFailed, ConfigError):
        raise
    except (LabError, ValueError) as exc:
        raise ScenarioError(cfg.scenario, exc) from exc
    report = write_bundle(out_dir, cfg, outcome)
    report["_cache"] = {"hits": cache.hits, "misses": cache.misses, "corrupt": cache.corrupt}
    return report
