"""Command-line experiment runner.

Every run writes CSV or JSON carrying the full configuration, the seed and
the library version; identical configurations give byte-identical output.
Exit codes: 0 success, 1 invalid input, 2 optimizer non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
from importlib import resources

import numpy as np

from . import __version__, analytic, comparison, estimators
from .comparators import COMPARATOR_IDS, get_comparator
from .effects import Povm, polytope_membership_batch
from .errors import ConvergenceError, QCompareError
from .sampling import MeasureKind
from .states import BlochVector, DensityMatrix, from_bloch

SEED_ENV = "QCOMPARE_SEED"

# comparators and measures of the summary grid
TABLE1_POVMS = ("swap", "xy", "z")
TABLE1_MEASURES = ("hs", "bures")

# analytic overlay: comparator id -> analytic effect id
_ANALYTIC = {"swap": "asym", "xy": "xy-", "z": "z-", "au2": "au2"}


class InputError(Exception):
    """Bad command-line usage or input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# --- schemas ------------------------------------------------------------------


def load_schema(name: str) -> dict:
    """Shipped JSON schema ``name`` (``state``, ``povm`` or ``output``)."""
    text = resources.files("qcompare.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def _validated(path: str, schema: str) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        jsonschema.validate(obj, load_schema(schema))
    except jsonschema.ValidationError as exc:
        raise InputError(f"{path} does not match the {schema} schema: {exc.message}") from exc
    return obj


# --- argument helpers -----------------------------------------------------------


def _floats(text: str, n: int | None = None, name: str = "value"):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"{name} must be a comma-separated list of numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise InputError(f"{name} needs {n} numbers, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"{name} must be finite")
    return vals


def _resolve_seed(args) -> tuple:
    """``(seed, source)`` from the flag, the environment, or fresh entropy."""
    if args.seed is not None:
        return args.seed, "flag"
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env), "env"
        except ValueError as exc:
            raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed, "entropy"


def _comparator(args, ref_default=None):
    kappa = _floats(args.kappa, 4, "--kappa") if args.kappa else None
    ref = args.ref_bloch or ref_default
    ref = _floats(ref, 3, "--ref-bloch") if isinstance(ref, str) else ref
    return get_comparator(args.povm, d=args.d, kappa=kappa, ref_bloch=ref, lam=args.lam, mu=args.mu, j=args.j)


def _state(args, bloch_flag: str, file_flag: str, d: int) -> DensityMatrix:
    path = getattr(args, file_flag)
    text = getattr(args, bloch_flag)
    if path:
        return DensityMatrix.from_json(_validated(path, "state"))
    if text is None:
        raise InputError(f"--{bloch_flag.replace('_', '-')} or --{file_flag.replace('_', '-')} is required")
    return from_bloch(BlochVector(d, _floats(text, d * d - 1, "--" + bloch_flag.replace("_", "-"))))


def _config(args, seed=None) -> dict:
    skip = {"func", "out", "seed"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if seed is not None:
        cfg["seed"] = seed
    return cfg


# --- output ---------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _emit(args, command: str, cfg: dict, result, rows=None, header=None):
    """Write ``result`` as JSON, or ``rows`` as CSV with a commented preamble."""
    buf = io.StringIO()
    if args.format == "json":
        doc = {"qcompare_version": __version__, "command": command, "config": cfg, "result": result}
        buf.write(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True))
        buf.write("\n")
    else:
        buf.write(f"# qcompare {__version__}\n")
        buf.write(f"# command: {command}\n")
        buf.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------------


def cmd_distance(args):
    if args.povm_file:
        p = Povm.from_json(_validated(args.povm_file, "povm"))
        d = p.dim
    else:
        p, d = None, args.d
    rho = _state(args, "rho_bloch", "rho_file", d)
    xi = _state(args, "xi_bloch", "xi_file", d)
    if p is None:
        # nondiag / etalon default to xi's own eigenbasis here
        ref = args.ref_bloch or ([float(x) for x in xi.bloch().coords] if d == 2 else None)
        c = _comparator(args, ref)
        res = comparison.distance(c.povm, rho, xi) if args.method == "optimize" else c.pair_distance(rho, xi)
    else:
        res = comparison.distance(p, rho, xi)
    out = res.to_json()
    cfg = _config(args)
    _emit(args, "distance", cfg, out, [[out["value"], out["method"], *out["minimizer_bloch"]]],
          ["value", "method"] + [f"minimizer_{i + 1}" for i in range(len(out["minimizer_bloch"]))])


def cmd_fraction(args):
    seed, _ = _resolve_seed(args)
    c = _comparator(args)
    r = estimators.comparable_fraction(c, args.measure, args.n, seed, args.workers)
    j = r.to_json()
    _emit(args, "fraction", _config(args, seed), j,
          [[j["povm"], j["measure"], j["d"], j["n"], j["seed"], j["estimate"], j["std_error"]]],
          ["povm", "measure", "d", "n", "seed", "estimate", "std_error"])


def cmd_moments(args):
    seed, _ = _resolve_seed(args)
    c = _comparator(args)
    r = estimators.average_distance(c, args.measure, args.n, seed, args.workers)
    j = r.to_json()
    _emit(args, "moments", _config(args, seed), j,
          [[j["povm"], j["measure"], j["d"], j["n"], j["seed"], j["mean"], j["dispersion"], j["rel_std"], j["std_error"]]],
          ["povm", "measure", "d", "n", "seed", "mean", "dispersion", "rel_std", "std_error"])


def cmd_table1(args):
    seed, _ = _resolve_seed(args)
    results = []
    for i, pid in enumerate(TABLE1_POVMS):
        for j, m in enumerate(TABLE1_MEASURES):
            # one independent stream family per cell
            cell_seed = (seed + 1000003 * (2 * i + j)) % 2**64
            r = estimators.average_distance(get_comparator(pid), m, args.n, cell_seed, args.workers)
            results.append(r.to_json())
    rows = [[r["povm"], r["measure"], r["n"], r["seed"], r["mean"], r["dispersion"], r["rel_std"], r["std_error"]]
            for r in results]
    cfg = _config(args, seed)
    cfg.pop("measure", None)
    _emit(args, "table1", cfg, results, rows,
          ["povm", "measure", "n", "seed", "mean", "dispersion", "rel_std", "std_error"])


def cmd_density(args):
    seed, _ = _resolve_seed(args)
    c = _comparator(args)
    e = c.povm.effects[c.focus_index if args.effect is None else args.effect]
    curve = estimators.density_estimate(e, args.kind, args.measure, args.bins, args.n, seed, args.workers,
                                        label=f"{c.id}:{e.label}")
    ref = None
    aid = _ANALYTIC.get(c.id)
    if aid and args.effect in (None, c.focus_index) and c.dim == 2:
        if c.id != "au2" or (args.lam, args.mu) == (0.5, 0.5):
            ref = analytic.density(aid, args.kind, args.measure)
    result = {
        "effect": curve.effect, "kind": curve.kind, "measure": curve.measure, "n": curve.n, "seed": curve.seed,
        "twin_range": list(curve.twin_range), "frontier": list(curve.frontier), "point_mass": curve.point_mass,
        "analytic": ref.effect if ref else None,
    }
    if curve.point_mass is not None:
        rows = [[curve.point_mass, curve.point_mass, curve.point_mass, "inf", "inf" if ref else ""]]
        result["bins"] = []
    else:
        rows = []
        for a, b, v in zip(curve.edges[:-1], curve.edges[1:], curve.values):
            mid = 0.5 * (a + b)
            rows.append([a, b, mid, v, analytic.evaluate(ref, mid) if ref else ""])
        result["bins"] = [{"lo": float(r[0]), "hi": float(r[1]), "center": float(r[2]), "value": float(r[3]),
                           "analytic": (float(r[4]) if ref else None)} for r in rows]
        if curve.kind == "diff":
            result["mean_distance"] = estimators.mean_via_density(curve)
    _emit(args, "density", _config(args, seed), result, rows,
          ["bin_lo", "bin_hi", "bin_center", "value", "analytic_value"])


def cmd_region(args):
    if args.xi_bloch is None:
        raise InputError("--xi-bloch is required")
    k = _floats(args.xi_bloch, 3, "--xi-bloch")
    from_bloch(BlochVector(2, k))
    c = _comparator(args, args.ref_bloch or k)
    if c.dim != 2:
        raise InputError("region maps are defined for qubits")
    axis = np.linspace(-1.0, 1.0, args.grid)
    pts = np.array(np.meshgrid(axis, axis, axis, indexing="ij")).reshape(3, -1).T
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12]
    dist = c.batch_distance(pts, np.broadcast_to(np.asarray(k), pts.shape))
    rows = [[x, y, z, int(v > comparison.TAU), v] for (x, y, z), v in zip(pts, dist)]
    result = {"xi_bloch": k, "grid": args.grid, "voxels": len(rows), "comparable": int(np.sum(dist > comparison.TAU)),
              "points": [{"r": [float(x), float(y), float(z)], "comparable": bool(cm), "distance": float(v)}
                         for x, y, z, cm, v in rows]}
    _emit(args, "region", _config(args), result, rows, ["rx", "ry", "rz", "comparable", "distance"])


def cmd_polytope(args):
    axis = np.linspace(-1.0, 1.0, args.grid)
    pts = np.array(np.meshgrid(axis, axis, axis, indexing="ij")).reshape(3, -1).T
    member = polytope_membership_batch(pts, args.kappa0)
    rows = [[a, b, c, int(m)] for (a, b, c), m in zip(pts, member)]
    result = {"kappa0": args.kappa0, "grid": args.grid, "members": int(member.sum()),
              "points": [[float(a), float(b), float(c)] for (a, b, c), m in zip(pts, member) if m]}
    _emit(args, "polytope", _config(args), result, rows, ["kappa1", "kappa2", "kappa3", "member"])


def cmd_validate(args):
    p = Povm.from_json(_validated(args.file, "povm"))
    result = {"valid": True, "dim": p.dim, "outcomes": len(p), "labels": list(p.labels)}
    _emit(args, "validate", _config(args), result, [[True, p.dim, len(p), ";".join(p.labels)]],
          ["valid", "dim", "outcomes", "labels"])


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcompare", description="Probability-based comparison of quantum states.")
    parser.add_argument("--version", action="version", version=f"qcompare {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    comp = _Parser(add_help=False)
    comp.add_argument("--povm", choices=COMPARATOR_IDS, default="swap")
    comp.add_argument("--d", type=int, default=2, help="single-system dimension")
    comp.add_argument("--kappa", default=None, help="diag comparator coefficients k0,k1,k2,k3")
    comp.add_argument("--ref-bloch", default=None,
                      help="reference state x,y,z of nondiag/etalon (sampled runs: default 0,0,1)")
    comp.add_argument("--lambda", dest="lam", type=float, default=0.5)
    comp.add_argument("--mu", type=float, default=0.5)
    comp.add_argument("--j", type=int, default=None, help="basis generator index of au2d (0-based)")

    mc = _Parser(add_help=False)
    mc.add_argument("--measure", choices=("hs", "bures"), default="hs")
    mc.add_argument("--n", type=int, default=1_000_000)
    mc.add_argument("--seed", type=int, default=None, help=f"64-bit seed (fallback: ${SEED_ENV}, then entropy)")
    mc.add_argument(
        "--workers", type=int, default=estimators.default_workers(),
        help="number of shards/processes (default: available CPUs). Output is bit-identical for a fixed "
             "seed and worker count; different worker counts agree only statistically",
    )

    p = sub.add_parser("distance", parents=[common, comp], help="distance for one pair of states")
    p.add_argument("--rho-bloch", default=None)
    p.add_argument("--xi-bloch", default=None)
    p.add_argument("--rho-file", default=None, help="state JSON")
    p.add_argument("--xi-file", default=None, help="state JSON")
    p.add_argument("--povm-file", default=None, help="POVM JSON (overrides --povm)")
    p.add_argument("--method", choices=("auto", "optimize"), default="auto")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("fraction", parents=[common, comp, mc], help="comparable fraction")
    p.set_defaults(func=cmd_fraction)
    p = sub.add_parser("moments", parents=[common, comp, mc], help="mean and dispersion of the distance")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("table1", parents=[common, mc], help="means and dispersions for swap, xy, z")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("density", parents=[common, comp, mc], help="probability histogram with analytic overlay")
    p.add_argument("--kind", choices=("diff", "same"), default="diff")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--effect", type=int, default=None, help="effect index (default: the comparator's focus effect)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("region", parents=[common, comp], help="voxel map of states comparable with xi")
    p.add_argument("--xi-bloch", default=None)
    p.add_argument("--grid", type=int, default=41)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("polytope", parents=[common], help="membership cloud of the diagonal-effect polytope")
    p.add_argument("--kappa0", type=float, default=0.5)
    p.add_argument("--grid", type=int, default=41)
    p.set_defaults(func=cmd_polytope)

    p = sub.add_parser("validate", parents=[common], help="validate a POVM JSON file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)
    return parser


def _check_args(args):
    for name in ("n", "bins", "grid", "d", "workers"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise InputError(f"--{name} must be positive, got {v}")
    if getattr(args, "grid", None) is not None and args.grid < 2:
        raise InputError("--grid must be at least 2")
    if getattr(args, "measure", None):
        MeasureKind.parse(args.measure)


def _fail(exc, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConvergenceError) and exc.best is not None:
        err["best_bound"] = exc.best if isinstance(exc.best, float) else list(np.ravel(exc.best).astype(float))
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        _check_args(args)
        args.func(args)
    except ConvergenceError as exc:
        return _fail(exc, 2)
    except (InputError, QCompareError, ValueError, OSError) as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
