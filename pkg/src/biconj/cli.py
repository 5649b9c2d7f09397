"""Command-line interface.

Subcommands: ``conjugate``, ``biconjugate``, ``verify``, ``sweep``,
``counterexample``, ``bench``.  Experiments are described by a YAML config
(declarative key-value sections, no code) passed via ``--config``; see the
README for a worked example.  Reports are deterministic: the same config
produces byte-identical CSV, and byte-identical JSON once the ``metadata``
field (timestamps) is stripped.

Exit codes, stable across subcommands:

* 0 — success;
* 1 — configuration problem (bad field, improper function, resolution too
  coarse), reported as ``field.path: message``;
* 2 — the verified hypothesis fails on valid input (nonpositive curvature,
  a scheduled t certifying nothing, dual-boundary truncation);
* 3 — internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import statistics
import sys
import time
from datetime import datetime, timezone

import numpy as np
import yaml

from . import __version__, funlib
from .diffgeo import grad_fd, subdifferential_1d
from .errors import HypothesisFailure, ValidationError
from .extgrid import DualGrid, Grid, SampledFunction, make_grid, sample
from .legendre import (
    activity_map,
    biconjugate,
    conjugate_bruteforce,
    conjugate_llt,
    derive_dual_grid,
)
from .prop import (
    _axis_interval,
    _gradient_distance,
    default_schedule,
    resolve_constants,
    run_verification,
)

_ENGINES = {"brute": conjugate_bruteforce, "llt": conjugate_llt}

# Analytic conjugates used for --check-oracle footer diagnostics.
_ANALYTIC_CONJUGATE = {
    "quadratic": lambda params, y: y * y / (2.0 * params["a"]),
}


class _Parser(argparse.ArgumentParser):
    """Argument errors are config errors (exit 1), not usage exit 2."""

    def error(self, message):
        raise ValidationError(message, field="argv")


def _fmt(v) -> str:
    return "%.17g" % float(v)


def _py(obj):
    """Recursively convert numpy scalars/arrays for JSON emission."""
    if isinstance(obj, dict):
        return {k: _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_py(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _open_out(args):
    path = args.out
    if path is None and getattr(args, "_output_cfg", None):
        path = args._output_cfg.get("path")
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit_rows(args, columns, rows, footer=None):
    """Write rows as CSV (default) or a JSON table, honoring --out."""
    fmt = _resolve_format(args, default="csv")
    out, close = _open_out(args)
    try:
        if fmt == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
            for key, value in footer or []:
                out.write(f"# {key}: {value}\n")
        else:
            doc = {
                "columns": list(columns),
                "rows": [[_py(v) for v in row] for row in rows],
                "footer": {k: _py(v) for k, v in footer or []},
                "versions": _versions(),
                "metadata": {"timestamp": _now()},
            }
            json.dump(doc, out, indent=2)
            out.write("\n")
    finally:
        if close:
            out.close()


def _versions():
    return {
        "package": __version__,
        "numpy": np.__version__,
        "python": "%d.%d.%d" % sys.version_info[:3],
    }


def _now():
    return datetime.now(timezone.utc).isoformat()


def _resolve_format(args, default):
    if args.format is not None:
        return args.format
    cfg = getattr(args, "_output_cfg", None)
    if cfg and cfg.get("format"):
        return cfg["format"]
    return default


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {"phi", "h", "grid", "x", "t_schedule", "delta_cap", "tx_cap", "dual", "output"}


def _fail(path: str, message: str):
    raise ValidationError(f"{path}: {message}", field=path)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError:
        _fail("config", f"file not found: {path}")
    except yaml.YAMLError as exc:
        _fail("config", f"not parseable: {exc}")
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        _fail("config", "top level must be a mapping")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        _fail("config", f"unknown keys {sorted(unknown)}; allowed: {sorted(_TOP_KEYS)}")
    return cfg


def _cfg_function(cfg: dict, key: str) -> "funlib.FunctionSpec":
    node = cfg.get(key)
    if node is None:
        _fail(key, "required section is missing")
    if not isinstance(node, dict):
        _fail(key, "must be a mapping with `name` and optional `params`")
    extra = set(node) - {"name", "params"}
    if extra:
        _fail(key, f"unknown keys {sorted(extra)}")
    name = node.get("name")
    if not isinstance(name, str):
        _fail(f"{key}.name", "must be a catalog function name")
    params = node.get("params") or {}
    if not isinstance(params, dict):
        _fail(f"{key}.params", "must be a mapping of parameter values")
    try:
        return funlib.spec(name, **params)
    except ValidationError as exc:
        _fail(key, str(exc))


def _cfg_grid(cfg: dict) -> Grid:
    node = cfg.get("grid")
    if node is None:
        _fail("grid", "required section is missing")
    if not isinstance(node, dict):
        _fail("grid", "must be a mapping with lo, hi, n and optional dim")
    extra = set(node) - {"lo", "hi", "n", "dim"}
    if extra:
        _fail("grid", f"unknown keys {sorted(extra)}")
    for k in ("lo", "hi", "n"):
        if k not in node:
            _fail(f"grid.{k}", "required field is missing")
    try:
        return make_grid(
            float(node["lo"]), float(node["hi"]), int(node["n"]), int(node.get("dim", 1))
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            _fail("grid", str(exc))
        _fail("grid", f"fields must be numeric: {exc}")


def _cfg_anchor(cfg: dict, grid: Grid):
    if "x" not in cfg:
        _fail("x", "required field is missing")
    x = cfg["x"]
    if grid.dim == 1:
        if not isinstance(x, (int, float)):
            _fail("x", "must be a number for a 1D grid")
        return float(x)
    if not (isinstance(x, (list, tuple)) and len(x) == 2):
        _fail("x", "must be a pair [x1, x2] for a 2D grid")
    return [float(x[0]), float(x[1])]


def _cfg_schedule(cfg: dict):
    """Returns ('explicit', [floats]) or ('descriptor', dict) or None."""
    node = cfg.get("t_schedule")
    if node is None:
        return None
    if isinstance(node, (list, tuple)):
        try:
            return ("explicit", [float(t) for t in node])
        except (TypeError, ValueError):
            _fail("t_schedule", "entries must be numbers")
    if isinstance(node, dict):
        extra = set(node) - {"halvings", "probe_cap"}
        if extra:
            _fail("t_schedule", f"unknown keys {sorted(extra)}")
        return (
            "descriptor",
            {
                "halvings": int(node.get("halvings", 6)),
                "probe_cap": float(node.get("probe_cap", 0.25)),
            },
        )
    _fail("t_schedule", "must be a list of t values or {halvings, probe_cap}")


def _cfg_scalar(cfg: dict, key: str, default=None):
    if key not in cfg or cfg[key] is None:
        return default
    v = cfg[key]
    if not isinstance(v, (int, float)):
        _fail(key, "must be a number")
    return float(v)


def _cfg_dual(cfg: dict, f: SampledFunction):
    node = cfg.get("dual")
    if node is None:
        return derive_dual_grid(f)
    if not isinstance(node, dict):
        _fail("dual", "must be a mapping: {count} or {lo, hi, n}")
    if set(node) == {"count"}:
        return derive_dual_grid(f, count=int(node["count"]))
    if set(node) == {"lo", "hi", "n"}:
        try:
            return DualGrid(float(node["lo"]), float(node["hi"]), int(node["n"]), f.grid.dim)
        except ValidationError as exc:
            _fail("dual", str(exc))
    _fail("dual", "must provide either `count` or all of `lo`, `hi`, `n`")


def _require_config(args) -> dict:
    if not args.config:
        _fail("config", "this subcommand needs --config PATH")
    cfg = load_config(args.config)
    args._output_cfg = cfg.get("output") or {}
    if args._output_cfg and not isinstance(args._output_cfg, dict):
        _fail("output", "must be a mapping with optional path and format")
    return cfg


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_conjugate(args) -> int:
    cfg = _require_config(args)
    fs = _cfg_function(cfg, "phi")
    grid = _cfg_grid(cfg)
    f = sample(fs, grid)
    dual = _cfg_dual(cfg, f)
    engine = _ENGINES[args.engine]
    res = engine(f, dual)
    footer = []
    if args.check_oracle:
        other = _ENGINES["brute" if args.engine == "llt" else "llt"](f, dual)
        if not np.array_equal(res.values, other.values):
            bad = int(np.flatnonzero(res.values != other.values)[0])
            raise RuntimeError(
                f"engines disagree at dual node {bad}: "
                f"{res.values.ravel()[bad]!r} vs {other.values.ravel()[bad]!r}"
            )
        footer.append(("check_oracle", f"pass, engines bitwise-identical on {res.values.size} nodes"))
        known = _ANALYTIC_CONJUGATE.get(fs.name)
        if known is not None and grid.dim == 1:
            dev = float(np.max(np.abs(res.values - known(fs.params, dual.axis_points()))))
            footer.append(("max_abs_error_vs_analytic_conjugate", _fmt(dev)))
    ys = dual.axis_points()
    if grid.dim == 1:
        columns = ["y", "fstar"]
        rows = [(float(ys[j]), float(res.values[j])) for j in range(dual.n)]
    else:
        columns = ["y1", "y2", "fstar"]
        rows = [
            (float(ys[j1]), float(ys[j2]), float(res.values[j1, j2]))
            for j1 in range(dual.n)
            for j2 in range(dual.n)
        ]
    _emit_rows(args, columns, rows, footer)
    return 0


def cmd_biconjugate(args) -> int:
    cfg = _require_config(args)
    fs = _cfg_function(cfg, "phi")
    grid = _cfg_grid(cfg)
    f = sample(fs, grid)
    amap = activity_map(f)
    b = biconjugate(f)
    xs = grid.axis_points()
    if grid.dim == 1:
        columns = ["x", "f", "biconj", "gap", "active"]
        rows = [
            (float(xs[i]), float(f.values[i]), float(b.values[i]),
             float(amap.gap[i]), int(amap.active[i]))
            for i in range(grid.n)
        ]
    else:
        columns = ["x1", "x2", "f", "biconj", "gap", "active"]
        rows = [
            (float(xs[i]), float(xs[j]), float(f.values[i, j]), float(b.values[i, j]),
             float(amap.gap[i, j]), int(amap.active[i, j]))
            for i in range(grid.n)
            for j in range(grid.n)
        ]
    _emit_rows(args, columns, rows, [("active_count", amap.active_count)])
    return 0


def cmd_verify(args) -> int:
    cfg = _require_config(args)
    if _resolve_format(args, default="json") != "json":
        _fail("format", "verify emits JSON only")
    phi_spec = _cfg_function(cfg, "phi")
    h_spec = _cfg_function(cfg, "h")
    grid = _cfg_grid(cfg)
    x = _cfg_anchor(cfg, grid)
    sched = _cfg_schedule(cfg)
    kwargs = {}
    if sched is not None:
        if sched[0] == "explicit":
            kwargs["schedule"] = sched[1]
        else:
            kwargs["halvings"] = sched[1]["halvings"]
            kwargs["probe_cap"] = sched[1]["probe_cap"]
    result = run_verification(
        phi_spec,
        h_spec,
        grid,
        x,
        delta_cap=_cfg_scalar(cfg, "delta_cap"),
        tx_cap=_cfg_scalar(cfg, "tx_cap", 1.0),
        **kwargs,
    )
    report = result.report
    doc = {
        "constants": {
            **_py(dataclasses.asdict(report.constants)),
            "delta_uncapped": result.delta_uncapped,
            "activation_threshold_empirical": report.activation_threshold,
            "activation_at_least_tx": report.activation_at_least_tx,
            "all_inside_certified": report.all_inside_certified,
        },
        "per_t": [_py(dataclasses.asdict(r)) for r in report.per_t],
        "provenance": _py(report.provenance),
        "grid": {
            "lo": grid.lo,
            "hi": grid.hi,
            "n": grid.n,
            "dim": grid.dim,
            "spacing": grid.spacing,
            "anchor_requested": _py(result.x_requested),
            "anchor_snapped": _py(result.x_snapped),
        },
        "versions": _versions(),
        "metadata": {"timestamp": _now()},
    }
    out, close = _open_out(args)
    try:
        json.dump(doc, out, indent=2)
        out.write("\n")
    finally:
        if close:
            out.close()
    return 0 if result.exit_ok else 2


def cmd_sweep(args) -> int:
    cfg = _require_config(args)
    phi_spec = _cfg_function(cfg, "phi")
    h_spec = _cfg_function(cfg, "h")
    grid = _cfg_grid(cfg)
    x = _cfg_anchor(cfg, grid)
    phi = sample(phi_spec, grid)
    h = sample(h_spec, grid)
    idx = grid.nearest_index(x)
    constants, _, _ = resolve_constants(
        phi_spec, h_spec, phi, h, idx,
        delta_cap=_cfg_scalar(cfg, "delta_cap"),
        tx_cap=_cfg_scalar(cfg, "tx_cap", 1.0),
    )
    sched = _cfg_schedule(cfg)
    if sched is None:
        ts = default_schedule(constants.t_x)
    elif sched[0] == "explicit":
        ts = sorted(sched[1])
    else:
        ts = default_schedule(constants.t_x, **sched[1])

    d = grid.spacing
    if grid.dim == 1:
        base_mid = subdifferential_1d(biconjugate(phi), idx).midpoint
    else:
        b0 = biconjugate(phi)
        l1, r1 = _axis_interval(b0.values[:, idx[1]], idx[0], d)
        l2, r2 = _axis_interval(b0.values[idx[0], :], idx[1], d)
        base_mid = np.array([0.5 * (l1 + r1), 0.5 * (l2 + r2)])

    columns = ["t", "equality_gap", "gradient_error", "active_count"]
    columns += ["D_1"] if grid.dim == 1 else ["D_1", "D_2"]
    rows = []
    for t in ts:
        f = SampledFunction(grid, phi.values + t * h.values)
        amap = activity_map(f)
        b = biconjugate(f)
        gdist = _gradient_distance(b, idx, grad_fd(f, idx))
        if grid.dim == 1:
            gap = float(amap.gap[idx])
            mid = subdifferential_1d(b, idx).midpoint
            dcomp = [0.0 if t == 0 else (mid - base_mid) / t]
        else:
            gap = float(amap.gap[idx[0], idx[1]])
            l1, r1 = _axis_interval(b.values[:, idx[1]], idx[0], d)
            l2, r2 = _axis_interval(b.values[idx[0], :], idx[1], d)
            mid = np.array([0.5 * (l1 + r1), 0.5 * (l2 + r2)])
            dvec = np.zeros(2) if t == 0 else (mid - base_mid) / t
            dcomp = [float(dvec[0]), float(dvec[1])]
        rows.append((float(t), gap, gdist, amap.active_count, *dcomp))
    _emit_rows(args, columns, rows)
    return 0


def cmd_counterexample(args) -> int:
    ce = funlib.counterexample_phi(args.K, args.p)
    columns = ["rho", "q", "flat_measure"]
    rows = []
    for j in range(args.K):
        rho = 2.0 ** (-j)
        rows.append((rho, ce.q(rho), ce.flat_measure(rho)))
    _emit_rows(args, columns, rows, [("K", ce.K), ("p", ce.p)])
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else [
        2**14, 2**16, 2**17, 2**18, 2**19, 2**20,
    ]
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in sizes:
        grid = make_grid(-1.0, 1.0, n)
        f = SampledFunction(grid, rng.uniform(-10.0, 10.0, size=n))
        dual = derive_dual_grid(f)
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            conjugate_llt(f, dual)
            times.append(time.perf_counter() - t0)
        rows.append(("llt", n, float(statistics.median(times))))
        if n <= args.brute_cap:
            times = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                conjugate_bruteforce(f, dual)
                times.append(time.perf_counter() - t0)
            rows.append(("brute", n, float(statistics.median(times))))
    _emit_rows(args, ["engine", "n", "median_seconds"], rows,
               [("repeats", args.repeats), ("brute_cap", args.brute_cap)])
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML experiment description")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--engine", choices=["brute", "llt"], default="llt")
    common.add_argument("--seed", type=int, default=0,
                        help="RNG seed for randomized corpora (bench)")

    p = _Parser(prog="biconj", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    sp = sub.add_parser("conjugate", parents=[common],
                        help="discrete conjugate of phi on a dual grid")
    sp.add_argument("--check-oracle", action="store_true",
                    help="run both engines and require bitwise agreement")
    sp.set_defaults(func=cmd_conjugate)

    sp = sub.add_parser("biconjugate", parents=[common],
                        help="lower convex envelope of phi with activity map")
    sp.set_defaults(func=cmd_biconjugate)

    sp = sub.add_parser("verify", parents=[common],
                        help="full pointwise verification pipeline (JSON)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", parents=[common],
                        help="per-t gap/gradient/velocity table (CSV)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("counterexample", parents=[common],
                        help="flat-set staircase: q(rho) and flat measure per dyadic radius")
    sp.add_argument("--K", type=int, required=True, help="number of flat intervals")
    sp.add_argument("--p", type=int, default=None,
                    help="dyadic resolution exponent (default 3K+1)")
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("bench", parents=[common],
                        help="conjugation wall-clock across grid sizes")
    sp.add_argument("--sizes", help="comma-separated grid sizes")
    sp.add_argument("--repeats", type=int, default=5, help="runs per timing (median)")
    sp.add_argument("--brute-cap", type=int, default=20000,
                    help="largest n for the brute-force contrast")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except ValidationError as exc:  # includes properness/resolution errors
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except HypothesisFailure as exc:  # includes truncation
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
