"""Command-line interface.

Subcommands
-----------
run             optimize a builtin problem (``mech1``, ``mech2``, ``heat``) or a
                JSON config and write history, snapshots and a summary
check-gradient  compare descent fields with central finite differences
sweep-epsilon   nonlocal perimeter of a disk for decreasing smoothing lengths
sweep-p         heat runs over a list of GMIF exponents
render          convert a density file to a graymap

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .io import ensure_dir, read_design, read_pgm, write_pgm
from .objective import ObjectiveBreakdown
from .optimizer import OptimizationResult, optimize
from .perimeter import KernelSpec, c_g_constant, perimeter_value
from .problems import BUILTINS, ProblemConfig, get_builtin, load_config, save_config

log = logging.getLogger("penalty_topopt")

HISTORY_FIELDS = ("iter", "L", "J", "perimeter", "volume", "r", "trials")
GRADIENT_TOL = 1e-3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --- problem resolution ---------------------------------------------------------

def resolve_problem(name_or_path: str) -> ProblemConfig:
    if name_or_path in BUILTINS:
        return get_builtin(name_or_path)
    if os.path.exists(name_or_path):
        return load_config(name_or_path)
    raise UsageError(f"unknown problem {name_or_path!r}: not a builtin "
                     f"({', '.join(BUILTINS)}) and no such config file")


def apply_overrides(cfg: ProblemConfig, args) -> ProblemConfig:
    """Apply ``--key value`` overrides named after the config schema keys."""
    if getattr(args, "nx", None) is not None:
        cfg = cfg.scaled(args.nx, getattr(args, "ny", None))
    elif getattr(args, "ny", None) is not None:
        cfg = cfg.scaled(cfg.grid.nx, args.ny)
    pchanges = {}
    for key in ("lam", "gamma", "eps", "beta", "delta", "constraint", "formulation",
                "max_outer_iters"):
        value = getattr(args, key, None)
        if value is not None:
            pchanges[key] = value
    if pchanges:
        if "formulation" in pchanges and "lam" not in pchanges and cfg.physics == "mechanism":
            pchanges["lam"] = 1.0 if pchanges["formulation"] == "stress" else 25.0
        cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, **pchanges))
    p = getattr(args, "p", None)
    if p is not None:
        if cfg.physics == "mechanism":
            mat = dataclasses.replace(cfg.material, interp="gmif", p=p)
        else:
            mat = dataclasses.replace(cfg.material, interp_kappa="gmif", p=p)
        cfg = dataclasses.replace(cfg, material=mat)
    if getattr(args, "solver", None) is not None:
        cfg = dataclasses.replace(cfg, solver=args.solver)
    return cfg


# --- run --------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(x, ".17g") if isinstance(x, float) else str(x)


def run_problem(cfg: ProblemConfig, out_dir: str, snapshot_every: int = 10,
                quiet: bool = True) -> OptimizationResult:
    """Optimize ``cfg`` and write all run artifacts into ``out_dir``."""
    if snapshot_every < 1:
        raise ConfigurationError("snapshot cadence must be at least 1")
    ensure_dir(out_dir)
    save_config(cfg, os.path.join(out_dir, "config.json"))
    manifest = {
        "tool_version": __version__,
        "problem": cfg.name,
        "output_dir": os.path.abspath(out_dir),
        "snapshot_every": snapshot_every,
        "determinism": "no random numbers are used; identical configs give identical "
                       "history.csv, snapshots and summary.json",
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    physics = cfg.build()
    chi0 = cfg.initial_design()
    hist_fh = open(os.path.join(out_dir, "history.csv"), "w", newline="")
    time_fh = open(os.path.join(out_dir, "timing.csv"), "w", newline="")
    hist = csv.writer(hist_fh, lineterminator="\n")
    timing = csv.writer(time_fh, lineterminator="\n")
    hist.writerow(HISTORY_FIELDS)
    timing.writerow(("iter", "seconds"))
    snapshots = []

    def on_record(rec):
        hist.writerow([_fmt(getattr(rec, f)) for f in HISTORY_FIELDS])
        hist_fh.flush()
        timing.writerow((rec.iter, f"{rec.seconds:.3f}"))
        if not quiet:
            print(f"iter {rec.iter:4d}  L={rec.L:.10g}  J={rec.J:.6g}  vol={rec.volume:.4f}  "
                  f"trials={rec.trials}", flush=True)

    def on_snapshot(rec, chi):
        if rec.iter % snapshot_every == 0:
            path = os.path.join(out_dir, f"density_{rec.iter:04d}.pgm")
            write_pgm(path, chi)
            snapshots.append(path)

    try:
        result = optimize(physics, chi0, callback=on_record, snapshot=on_snapshot)
    finally:
        hist_fh.close()
        time_fh.close()

    write_pgm(os.path.join(out_dir, "final.pgm"), result.chi)
    result.chi.astype("<f8").tofile(os.path.join(out_dir, "final.bin"))
    bd: ObjectiveBreakdown = result.state.breakdown
    summary = {
        "problem": cfg.name,
        "physics": cfg.physics,
        "grid": [cfg.grid.nx, cfg.grid.ny],
        "termination": result.reason,
        "iterations": result.iterations,
        "final_L": bd.total,
        "final_J": physics.physical_objective(result.state),
        "final_perimeter": bd.perimeter_value,
        "final_volume": bd.volume,
        "volume_limit": cfg.params.beta,
        "constraint": cfg.params.constraint,
        "binary": bool(np.all((result.chi == 0) | (result.chi == 1))),
        "line_search_trials": result.total_trials,
        "line_search_backtracks": result.total_backtracks,
        "state_solves": result.n_solves,
    }
    if "max_reciprocity_error" in result.extra:
        summary["max_reciprocity_error"] = result.extra["max_reciprocity_error"]
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return result


def cmd_run(args) -> int:
    cfg = apply_overrides(resolve_problem(args.problem), args)
    out = args.out or os.path.join("runs", cfg.name)
    result = run_problem(cfg, out, args.snapshot_every, quiet=args.quiet)
    print(f"{cfg.name}: {result.iterations} iterations, termination: {result.reason}; "
          f"final L = {result.state.breakdown.total:.10g}; artifacts in {out}")
    return 0


# --- gradient check -----------------------------------------------------------------

def gradient_check(cfg: ProblemConfig, n_directions: int = 20, seed: int = 0,
                   t: float = 1e-6) -> tuple[float, list[tuple[float, float]]]:
    """Max relative error between ``<d, delta>`` and central differences.

    The design is drawn uniformly from [0.2, 0.8]; directions are standard
    normal.  Returns the error and the (field, finite difference) pairs.
    Pairs that are both exactly zero count as exact.
    """
    from .oracle import fd_gradient

    physics = cfg.build()
    rng = np.random.default_rng(seed)
    chi = rng.uniform(0.2, 0.8, physics.grid.shape)
    state = physics.state(chi)
    d = physics.descent_field(state)
    pairs = []
    worst = 0.0
    for _ in range(n_directions):
        delta = rng.standard_normal(physics.grid.shape)
        pred = physics.inner_product(d, delta)
        fd = fd_gradient(lambda c: physics.eval_L(c, state).total, chi, delta, t)
        pairs.append((pred, fd))
        scale = max(abs(fd), abs(pred))
        if scale > 0:
            worst = max(worst, abs(pred - fd) / scale)
    return worst, pairs


def cmd_check_gradient(args) -> int:
    cfg = resolve_problem(args.problem)
    if args.nx is None:
        args.nx = 12
    cfg = apply_overrides(cfg, args)
    err, pairs = gradient_check(cfg, args.directions, args.seed, args.step)
    if all(p == 0 and f == 0 for p, f in pairs):
        print(f"{cfg.name} {cfg.grid.nx}x{cfg.grid.ny}: descent field and finite "
              "differences are both zero (exact)")
        return 0
    status = "ok" if err <= GRADIENT_TOL else "FAILED"
    print(f"{cfg.name} {cfg.grid.nx}x{cfg.grid.ny}: max relative error {err:.3e} over "
          f"{len(pairs)} directions ({status}, tolerance {GRADIENT_TOL:g})")
    return 0 if err <= GRADIENT_TOL else 1


# --- epsilon sweep ----------------------------------------------------------------

def disk_field(n: int, radius: float, center=(0.5, 0.5)) -> np.ndarray:
    c = (np.arange(n) + 0.5) / n
    xx, yy = np.meshgrid(c, c)
    return ((xx - center[0]) ** 2 + (yy - center[1]) ** 2 < radius ** 2).astype(float)


def epsilon_sweep(n: int, radius: float, eps_list, chi=None) -> list[tuple[float, float, float]]:
    """Rows ``(eps, (C_G / eps) P, ratio to 2 pi R)`` for a disk on an n x n grid."""
    h = 1.0 / n
    chi = disk_field(n, radius) if chi is None else chi
    cg = c_g_constant()
    rows = []
    for eps in eps_list:
        value = cg / eps * perimeter_value(chi, KernelSpec(eps, h))
        rows.append((eps, value, value / (2.0 * math.pi * radius)))
    return rows


def cmd_sweep_epsilon(args) -> int:
    if not 0 < args.radius < 0.5:
        raise ConfigurationError("disk radius must lie in (0, 0.5)")
    rows = epsilon_sweep(args.n, args.radius, args.eps)
    print(f"disk R={args.radius} on {args.n}x{args.n}, C_G={c_g_constant():.10f}")
    print("eps,scaled_perimeter,ratio")
    for eps, value, ratio in rows:
        print(f"{eps:.6g},{value:.10g},{ratio:.10f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("eps", "scaled_perimeter", "ratio"))
            w.writerows(rows)
    return 0


# --- p sweep ----------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TOPOPT_THREADS", "1")))
    except ValueError:
        raise ConfigurationError("TOPOPT_THREADS must be a positive integer") from None


def p_sweep(cfg: ProblemConfig, p_list, out_dir: str | None = None, max_workers: int = 1):
    """One run per GMIF exponent; returns rows (p, iterations, trials, backtracks, L, result)."""

    def one(p):
        ns = argparse.Namespace(p=p)
        c = apply_overrides(cfg, ns)
        if out_dir:
            res = run_problem(c, os.path.join(out_dir, f"p_{p:+g}"))
        else:
            res = optimize(c.build(), c.initial_design())
        return (p, res.iterations, res.total_trials, res.total_backtracks,
                res.state.breakdown.total, res)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, p_list))


def cmd_sweep_p(args) -> int:
    cfg = apply_overrides(resolve_problem(args.problem), args)
    out = args.out or os.path.join("runs", f"{cfg.name}_psweep")
    ensure_dir(out)
    rows = p_sweep(cfg, args.p_list, out, _threads())
    with open(os.path.join(out, "sweep_p.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "iterations", "trials", "backtracks", "final_L"))
        for p, it, tr, bt, L, _ in rows:
            w.writerow((_fmt(p), it, tr, bt, _fmt(L)))
    print("p,iterations,trials,backtracks,final_L")
    for p, it, tr, bt, L, _ in rows:
        print(f"{p:g},{it},{tr},{bt},{L:.10g}")
    return 0


# --- render -----------------------------------------------------------------------

def load_density(path: str, nx: int | None = None, ny: int | None = None) -> np.ndarray:
    lower = path.lower()
    if lower.endswith(".pgm"):
        return read_pgm(path)
    if lower.endswith(".npy"):
        return np.load(path)
    if nx is None or ny is None:
        raise ConfigurationError("raw density files need --nx and --ny")
    return read_design(path, (ny, nx))


def cmd_render(args) -> int:
    chi = load_density(args.density, args.nx, args.ny)
    if chi.ndim != 2:
        raise ConfigurationError("density must be a 2D field")
    out = args.out or os.path.splitext(args.density)[0] + "_render.pgm"
    write_pgm(out, chi)
    print(f"wrote {out} ({chi.shape[1]}x{chi.shape[0]})")
    return 0


# --- parser -----------------------------------------------------------------------

def _add_overrides(p):
    p.add_argument("--nx", type=int, help="elements along x (ny follows the aspect ratio)")
    p.add_argument("--ny", type=int, help="elements along y")
    p.add_argument("--max-iters", "--max-outer-iters", dest="max_outer_iters", type=int)
    p.add_argument("--beta", type=float, help="volume fraction")
    p.add_argument("--gamma", type=float, help="perimeter weight")
    p.add_argument("--lam", type=float, help="penalty weight")
    p.add_argument("--eps", type=float, help="smoothing length (default: cell size)")
    p.add_argument("--delta", type=float, help="line-search termination measure (area)")
    p.add_argument("--constraint", choices=("inequality", "equality"))
    p.add_argument("--formulation", choices=("stress", "displacement-adjoint"))
    p.add_argument("--p", type=float, help="GMIF exponent for the stiffness/conductivity")
    p.add_argument("--solver", choices=("direct", "cg"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="penalty-topopt", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an optimization")
    p.add_argument("problem", help=f"builtin name ({', '.join(BUILTINS)}) or JSON config path")
    _add_overrides(p)
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--snapshot-every", type=int, default=10)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-gradient", help="finite-difference check of the descent field")
    p.add_argument("problem")
    _add_overrides(p)
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6)
    p.set_defaults(func=cmd_check_gradient)

    p = sub.add_parser("sweep-epsilon", help="perimeter of a disk versus eps")
    p.add_argument("--radius", type=float, default=0.25)
    p.add_argument("--n", type=int, default=1024, help="grid cells per side")
    p.add_argument("--eps", type=_float_list, default=[0.08, 0.04, 0.02, 0.01])
    p.add_argument("--out", help="optional CSV output")
    p.set_defaults(func=cmd_sweep_epsilon)

    p = sub.add_parser("sweep-p", help="runs over GMIF exponents")
    p.add_argument("problem", nargs="?", default="heat")
    _add_overrides(p)
    p.add_argument("--p-list", type=_float_list, default=[1.0, 0.5, 0.1, -0.1, -1.0])
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_p)

    p = sub.add_parser("render", help="density file to graymap")
    p.add_argument("density", help=".pgm, .npy or raw float64 file")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
