"""Command-line entry point ``cocycle-lab``.

Module commands (freq, lyapunov, determinant, spectrum, ldt) run a single
computation from flags.  Scenario commands run a full experiment from a JSON
config and write a report bundle.

Exit codes: 0 success, 1 numerical error, 2 assertion failure, 3 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, parallel
from ._accel import backend_name
from .errors import AssertionFailed, ConfigError, LabError

EXIT_OK, EXIT_ERROR, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2, 3


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list:
    return [int(t) for t in text.replace(",", " ").split()]


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in r])


def _emit_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- module commands


def cmd_freq(args) -> int:
    from .freq import (
        BrjunoFunction,
        DeltaZeroTable,
        beta_estimate,
        certify_c_omega,
        check_hypotheses,
        continued_fraction,
    )

    fr = continued_fraction(args.omega, args.depth, args.precision)
    doc = {"frequency": fr.to_dict()}
    b = beta_estimate(fr)
    doc["beta_estimate"] = {"max_value": b.max_value, "tail_value": b.tail_value}
    if args.delta_family:
        delta = BrjunoFunction(args.delta_family, args.alpha)
        c_om, k = certify_c_omega(fr, delta)
        doc["delta"] = delta.to_dict()
        doc["C_omega"] = {"value": c_om, "argmin_k": k}
        doc["hypotheses"] = check_hypotheses(delta).to_dict()
        if args.hypothesis:
            table = DeltaZeroTable.build(delta, args.hypothesis, args.ns, args.epsilon, args.c_breve, c_om)
            doc["delta_zero"] = table.to_dict()
    _emit_json(doc, args.out)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    from .cocycle import finite_lyapunov
    from .harness import load_params

    P = load_params(args.params_config)
    variants = ("plain", "a", "unimodular") if args.variant == "all" else (args.variant,)
    rows = []
    ns = list(args.n) + ([args.ref_n] if args.ref_n else [])
    for n in ns:
        res = {v: finite_lyapunov(P, n, args.grid_log2, v) for v in variants}
        skipped = max(r.skipped for r in res.values())
        get = lambda v: res[v].value if v in res else None  # noqa: E731
        rows.append((n, get("plain"), get("a"), get("unimodular"), P.D, skipped))
    _write_csv(args.out, ("n", "L_n", "L_n_a", "L_n_u", "D", "skipped_points"), rows)
    return EXIT_OK


def cmd_determinant(args) -> int:
    from .cocycle import grid_points
    from .determinant import det_at
    from .harness import load_params

    P = load_params(args.params_config)
    xs = np.array(args.x) if args.x else grid_points(args.grid_log2)
    lf, pf, _, _ = det_at(P, xs, args.n)
    # the sign column is meaningful for real energies, where f_n^a is real
    sign = np.where(np.real(pf) >= 0, 1, -1)
    _write_csv(args.out, ("x", "log_abs_f_n_a", "phase_sign"), zip(xs.tolist(), lf.tolist(), sign.tolist()))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .harness import load_params
    from .spectrum import build_symmetrized, eigen_count_window, eigenvalues

    P = load_params(args.params_config)
    T = build_symmetrized(P, args.x, args.n)
    ev = eigenvalues(T, args.tol)
    _write_csv(args.out, ("index", "eigenvalue"), enumerate(ev.tolist()))
    if args.window_radius is not None:
        rep = eigen_count_window(P, args.x, args.window_center, args.window_radius, args.n, args.delta0, args.h)
        _emit_json(rep.to_dict(), Path(args.out).with_suffix(".json"))
    return EXIT_OK


def cmd_ldt(args) -> int:
    from .analytic import from_spec
    from .ergodic import Sampler, ldt_experiment
    from .harness import load_params

    P = load_params(args.params_config)
    u = from_spec(json.loads(args.u)) if args.observable == "birkhoff" else None
    rep = ldt_experiment(
        args.observable,
        P,
        args.n,
        args.delta_grid,
        Sampler(args.sampler, args.samples, args.seed),
        args.centering,
        u=u,
        variant=args.variant,
    )
    out = Path(args.out)
    _emit_json(rep.to_dict(), out.with_suffix(".json"))
    _write_csv(out.with_suffix(".csv"), ("delta", "measure", "ci_lo", "ci_hi"), rep.csv_rows())
    return EXIT_OK


# ---------------------------------------------------------------- scenarios


def cmd_scenario(args) -> int:
    from .harness import run

    rep = run(args.config, args.out, cache_dir=args.cache, seed=args.seed, threads=args.threads)
    status = "PASS" if rep["passed"] else "FAIL"
    print(f"{args.command}: {status}  ({args.out}/report.json)")
    for a in rep["assertions"]:
        print(f"  [{'ok' if a['passed'] else 'FAIL'}] {a['name']} {a['detail']}")
    return EXIT_OK if rep["passed"] else EXIT_ASSERT


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    from .harness import SCENARIOS

    p = argparse.ArgumentParser(prog="cocycle-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend_name()})")
    p.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("freq", help="continued fraction, Brjuno checks and delta0 table")
    f.add_argument("--omega", required=True, help="decimal string or golden, silver, pi-3")
    f.add_argument("--depth", type=int, default=20)
    f.add_argument("--precision", type=int, default=256, help="working precision in bits")
    f.add_argument("--delta-family", default=None)
    f.add_argument("--alpha", type=float, default=1.0)
    f.add_argument("--hypothesis", choices=("H.1", "H.2", "H.3"), default=None)
    f.add_argument("--epsilon", type=float, default=0.1)
    f.add_argument("--c-breve", type=float, default=1.0)
    f.add_argument("--ns", type=_ints, default=[64, 128, 256, 512, 1024, 2048, 4096])
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_freq)

    ly = sub.add_parser("lyapunov", help="finite-scale Lyapunov exponents")
    ly.add_argument("--params-config", required=True)
    ly.add_argument("--n", type=_ints, required=True, help="scales, comma separated")
    ly.add_argument("--grid-log2", type=int, default=11)
    ly.add_argument("--variant", choices=("all", "plain", "a", "unimodular"), default="all")
    ly.add_argument("--ref-n", type=int, default=None)
    ly.add_argument("--out", required=True)
    ly.set_defaults(func=cmd_lyapunov)

    de = sub.add_parser("determinant", help="log|f_n^a| on phases")
    de.add_argument("--params-config", required=True)
    de.add_argument("--n", type=int, required=True)
    de.add_argument("--x", type=_floats, default=None)
    de.add_argument("--grid-log2", type=int, default=10)
    de.add_argument("--out", required=True)
    de.set_defaults(func=cmd_determinant)

    sp = sub.add_parser("spectrum", help="eigenvalues of H_n(x) and window counts")
    sp.add_argument("--params-config", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--x", type=float, default=0.0)
    sp.add_argument("--window-center", type=float, default=0.0)
    sp.add_argument("--window-radius", type=float, default=None)
    sp.add_argument("--delta0", type=float, default=None, help="compare the count with 13 n delta0")
    sp.add_argument("--h", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_spectrum)

    ld = sub.add_parser("ldt", help="exceptional-set measures for one observable")
    ld.add_argument("--observable", choices=("birkhoff", "matrix", "determinant"), required=True)
    ld.add_argument("--params-config", required=True)
    ld.add_argument("--n", type=int, required=True)
    ld.add_argument("--delta-grid", type=_floats, required=True)
    ld.add_argument("--samples", type=int, default=100_000)
    ld.add_argument("--seed", type=int, default=0)
    ld.add_argument("--sampler", choices=("grid", "stratified-jitter"), default="stratified-jitter")
    ld.add_argument("--centering", choices=("empirical-mean", "nL"), default="empirical-mean")
    ld.add_argument("--variant", choices=("plain", "a", "unimodular"), default="plain")
    ld.add_argument("--u", default="[[-1, 0.5, 0], [1, 0.5, 0]]", help="Birkhoff observable as JSON triples")
    ld.add_argument("--out", required=True, help="output stem; writes .json and .csv")
    ld.set_defaults(func=cmd_ldt)

    for name in SCENARIOS:
        s = sub.add_parser(name, help=f"run the {name} scenario")
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=None)
        s.add_argument("--cache", default=None, help="cache directory (default OUT/.cache)")
        s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        parallel.set_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
