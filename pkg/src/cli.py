# src/cli.py
"""
Command-line surface
--------------------
Subcommands: bounds, figure4, synth, realize-verify, simulate, yamada, run-all.

Flags override config.yaml; the merged RunConfig is echoed as "# key: value"
header lines in every file written. Exit codes: 0 success/pass, 1 usage,
2 infeasible/fail, 3 I/O.
"""

from __future__ import annotations
import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from . import __version__
from .basic1d import from_record, profile, synthesize, to_record
from .bounds import (
    alpha_grid, bounds_report, bounds_table, crossover_alpha_C, figure4_table, lower_1d,
    reference_constants, upper_R_F, yamada_equality_family, yamada_upper_1d,
)
from .config import DEFAULT_CONFIG_PATH, get, load_conf
from .errors import DegenerateEstimate, InfeasibleAtWindow, LatticeError, NotGAlphaProfile, RecordParseError
from .lattice_core import BoxRegion
from .montecarlo import consistency_test, estimate, thinning_check, write_estimate
from .product_nd import case_table, realize, verify_against_target

__all__ = ["RunConfig", "main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_FAIL", "EXIT_IO"]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_IO = 0, 1, 2, 3
PROG = "lattice-galpha"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------- RunConfig ----------------------------- #

@dataclass
class RunConfig:
    command: str
    alpha: Optional[float] = None
    dim: Optional[int] = None
    gamma: Optional[float] = None
    window: Optional[int] = None
    box: Optional[Tuple[int, ...]] = None
    replicas: Optional[int] = None
    radius: Optional[int] = None
    seed: Optional[int] = None
    tol: Optional[float] = None
    out: Optional[str] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def header(self) -> List[str]:
        items = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("command", "extra")}
        items.update(self.extra)
        lines = [f"{PROG} {__version__}", f"command: {self.command}"]
        for k in sorted(items):
            v = items[k]
            if v is None:
                continue
            if isinstance(v, tuple):
                v = "x".join(str(s) for s in v)
            lines.append(f"{k}: {v}")
        return lines

    def validate(self) -> "RunConfig":
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise UsageError(f"--alpha must be >= 0, got {self.alpha}")
        if self.dim is not None and self.dim < 1:
            raise UsageError(f"--dim must be >= 1, got {self.dim}")
        if self.window is not None and self.window < 1:
            raise UsageError(f"--window must be >= 1, got {self.window}")
        if self.gamma is not None and not (0.0 < self.gamma < 1.0):
            raise UsageError(f"--gamma must lie in (0, 1), got {self.gamma}")
        if self.replicas is not None and self.replicas < 2:
            raise UsageError(f"--replicas must be >= 2 for a standard error, got {self.replicas}")
        if self.radius is not None and self.radius < 0:
            raise UsageError(f"--radius must be >= 0, got {self.radius}")
        if self.tol is not None and not self.tol > 0:
            raise UsageError(f"--tol must be > 0, got {self.tol}")
        if self.box is not None and any(s < 1 for s in self.box):
            raise UsageError(f"--box sides must be >= 1, got {self.box}")
        if self.seed is not None and not (0 <= self.seed < 2 ** 64):
            raise UsageError("--seed must be a 64-bit unsigned integer")
        return self


def _pick(flag, conf: dict, path: str, default):
    return flag if flag is not None else get(conf, path, default)


def _fmt(x: float, digits: int = 12) -> str:
    return f"{x:.{digits}g}"


def _parse_box(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"box must look like 64x64, got {text!r}") from None


def _parse_dims(text: str) -> Tuple[int, ...]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 2,3,4 or 2..6, got {text!r}") from None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        parent = os.path.dirname(out)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(out, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _write_table(df, path: str, header: Sequence[str], digits: int) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as f:
        for h in header:
            f.write(f"# {h}\n")
        df.to_csv(f, index=False, float_format=f"%.{digits}g", lineterminator="\n")


def _read_process(path: str):
    with open(path, "r") as f:
        return from_record(f.read())


# ----------------------------- Commands ----------------------------- #

def cmd_bounds(args, conf: dict) -> int:
    rc = RunConfig("bounds", alpha=args.alpha, dim=args.dim, out=args.out).validate()
    digits = int(get(conf, "output.value_digits", 12))
    rep = bounds_report(rc.alpha, rc.dim)
    lines = [f"# {h}" for h in rc.header()]
    lines.append(f"R_F: {_fmt(rep.R_F, digits)}")
    lines.append(f"r_A: {_fmt(rep.r_A, digits)}")
    if rc.dim >= 2:
        lines.append(f"r_C: {_fmt(rep.r_C, digits)}")
    lines.append(f"lower_1d: {_fmt(rep.lower_1d, digits)}")
    lines.append(f"ratio_A: {_fmt(rep.ratio_A, digits)}")
    if rc.dim >= 2:
        lines.append(f"ratio_C: {_fmt(rep.ratio_C, digits)}")
    if rc.alpha == 0 and rc.dim == 1:
        ref = reference_constants()
        lines.append(f"reference_lower: {_fmt(ref.lower_alpha0_1d, 17)}")
        lines.append(f"reference_upper: {_fmt(ref.upper_alpha0_1d, 17)}")
    _emit("\n".join(lines) + "\n", rc.out)
    return EXIT_OK


def cmd_figure4(args, conf: dict) -> int:
    dims = args.dims or tuple(get(conf, "bounds.dims", [2, 3, 4, 5, 6]))
    step = _pick(args.alpha_step, conf, "bounds.alpha_step", 0.01)
    out = args.out or os.path.join(get(conf, "run.results_dir", "results"), "figure4.csv")
    rc = RunConfig("figure4", out=out, extra={"dims": ",".join(str(d) for d in dims), "alpha_step": step})
    if not (0.0 < step <= 0.5):
        raise UsageError(f"--alpha-step must lie in (0, 0.5], got {step}")
    if any(d < 1 for d in dims):
        raise UsageError(f"--dims must be >= 1, got {dims}")
    table = figure4_table(dims, alpha_grid(step))
    _write_table(table, out, rc.header(), int(get(conf, "output.value_digits", 12)))
    drift = float((table["ratio_A"] - math.exp(-1.0)).abs().max())
    print(f"wrote {len(table)} rows to {out}")
    print(f"dotted line r_A/R_F = {_fmt(math.exp(-1.0))} (max deviation {drift:.1e})")
    return EXIT_OK


def cmd_synth(args, conf: dict) -> int:
    rc = RunConfig(
        "synth", alpha=args.alpha, window=args.window, gamma=args.gamma,
        tol=_pick(args.tol, conf, "synth.tol", 1e-6), seed=_pick(args.seed, conf, "run.seed", 0),
        out=args.out, extra={"starts": _pick(args.starts, conf, "synth.starts", 32)},
    ).validate()
    mode = "hit_density" if rc.gamma is not None else "maximize_density"
    try:
        proc, report = synthesize(
            rc.alpha, rc.window, mode, rc.tol, rc.seed, gamma=rc.gamma,
            starts=int(rc.extra["starts"]), n_jobs=int(get(conf, "run.n_jobs", 1)),
            penalties=tuple(float(p) for p in get(conf, "synth.penalties", [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8])),
            max_iter=int(get(conf, "synth.max_iter", 500)), fd_step=float(get(conf, "synth.fd_step", 1e-6)),
        )
    except InfeasibleAtWindow as e:
        print(f"infeasible at window {e.window}: best residual {e.best_residual:.3e}", file=sys.stderr)
        return EXIT_FAIL
    prof = profile(proc)
    summary = [
        f"mode: {mode}",
        f"gamma: {_fmt(prof.density)}",
        f"alpha_hat: {_fmt(prof.alpha_hat) if prof.alpha_hat is not None else 'undefined'}",
        f"max_residual: {report.max_residual:.3e}",
        f"best_start: {report.best_index}",
        f"iterations: {report.total_iterations}",
    ]
    summary += [f"lag{k}: {_fmt(v)}" for k, v in sorted(prof.lag_values.items())]
    if rc.alpha is not None and mode == "maximize_density":
        summary.append(f"reference_lower_1d: {_fmt(lower_1d(rc.alpha))}")
    _emit(to_record(proc, header=rc.header() + summary), rc.out)
    if rc.out:
        print("\n".join(summary))
    return EXIT_OK


def cmd_realize_verify(args, conf: dict) -> int:
    rc = RunConfig("realize-verify", dim=args.dim, radius=_pick(args.radius, conf, "montecarlo.radius", 3),
                   extra={"proc": args.proc}).validate()
    if rc.dim < 2:
        raise UsageError("--dim must be >= 2 for the product construction")
    proc1d = _read_process(args.proc)
    proc = realize(proc1d, rc.dim)
    rep = verify_against_target(proc, max(2, rc.radius))
    lines = [f"# {h}" for h in rc.header()]
    lines.append(f"rho: {_fmt(proc.rho)}  gamma: {_fmt(proc.gamma)}  alpha: {_fmt(proc.alpha)}")
    for row in case_table(proc):
        disp = ",".join(str(c) for c in row.displacement)
        lines.append(f"{row.case:<32} ({disp})  value={_fmt(row.value)}  target={_fmt(row.target)}")
    lines.append(f"max_deviation: {rep.max_deviation:.3e} at ({','.join(str(c) for c in rep.worst_displacement)})")
    if rep.mismatches:
        lines.append("mismatched classes: " + "; ".join(",".join(map(str, k)) for k in rep.mismatches))
    print("\n".join(lines))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_simulate(args, conf: dict) -> int:
    box = args.box or tuple(get(conf, "montecarlo.box", [64, 64]))
    rc = RunConfig(
        "simulate", dim=args.dim, box=tuple(box),
        replicas=_pick(args.replicas, conf, "montecarlo.replicas", 200),
        radius=_pick(args.radius, conf, "montecarlo.radius", 3),
        seed=_pick(args.seed, conf, "run.seed", 0), out=args.out,
        extra={"proc": args.proc, "thin": args.thin,
               "z_max": _pick(args.z_max, conf, "montecarlo.z_max", 4.0)},
    ).validate()
    if rc.dim < 2:
        raise UsageError("--dim must be >= 2 for the product construction")
    if len(rc.box) != rc.dim:
        raise UsageError(f"--box has {len(rc.box)} sides but --dim is {rc.dim}")
    if args.thin is not None and not (0.0 <= args.thin <= 1.0):
        raise UsageError(f"--thin must lie in [0, 1], got {args.thin}")
    z_max = float(rc.extra["z_max"])
    n_jobs = int(get(conf, "run.n_jobs", 1))
    proc = realize(_read_process(args.proc), rc.dim)
    box_region = BoxRegion(rc.box)
    try:
        box_region.shrink(rc.radius)
    except LatticeError as e:
        raise UsageError(str(e)) from None

    est = estimate(proc, box_region, rc.radius, rc.replicas, rc.seed, n_jobs=n_jobs)
    if rc.out:
        write_estimate(est, rc.out, rc.header(), int(get(conf, "output.value_digits", 12)))
    try:
        report = consistency_test(est, proc.target, z_max)
    except DegenerateEstimate as e:
        print(f"degenerate estimate: {e}", file=sys.stderr)
        return EXIT_FAIL
    print(f"rho_hat: {_fmt(est.rho_hat.estimate)} +- {_fmt(est.rho_hat.std_error, 3)}  target {_fmt(proc.rho)}")
    print(f"consistency: {'pass' if report.passed else 'FAIL'}  ({report.note})")
    for label, z, value, target in report.worst:
        print(f"  {label:<12} z={'degenerate' if z is None else _fmt(z, 4)}  estimate={_fmt(value)}  target={_fmt(target)}")
    ok = report.passed

    if args.thin is not None:
        th = thinning_check(proc, args.thin, box_region, rc.radius, rc.replicas, rc.seed, z_max=z_max, n_jobs=n_jobs)
        if rc.out:
            root, ext = os.path.splitext(rc.out)
            write_estimate(th.estimate, f"{root}_thin{ext or '.csv'}", rc.header(),
                           int(get(conf, "output.value_digits", 12)))
        print(f"thinning t={_fmt(th.t)}: rho_hat {_fmt(th.estimate.rho_hat.estimate)} target {_fmt(th.spec.rho)}"
              f"  {'pass' if th.passed else 'FAIL'}")
        ok = ok and th.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_yamada(args, conf: dict) -> int:
    n_max = _pick(args.nmax, conf, "yamada.n_max", 256)
    step = _pick(args.step, conf, "yamada.rho_step", 1e-4)
    rc = RunConfig("yamada", alpha=args.alpha, extra={"n_max": n_max, "rho_step": step}).validate()
    if n_max < 2 or not (0.0 < step < 1.0):
        raise UsageError("--nmax must be >= 2 and --step must lie in (0, 1)")
    res = yamada_upper_1d(rc.alpha, n_max, step)
    print("\n".join(f"# {h}" for h in rc.header()))
    print(f"R_Y: {_fmt(res.R_Y)}")
    print(f"R_F: {_fmt(res.R_F)}")
    print(f"R_F - R_Y: {_fmt(res.R_F - res.R_Y)}")
    if res.interval_witness_n is None:
        print(f"R_Y interval only: {_fmt(res.R_Y_interval)}")
    else:
        print(f"R_Y interval only: {_fmt(res.R_Y_interval)} (n={res.interval_witness_n} fails first)")
    if res.witness_rho is None:
        print("witness: none (every grid density passed)")
    elif res.witness_n is None:
        print(f"witness: structure function fails at rho={_fmt(res.witness_rho)}")
    else:
        print(f"witness: interval n={res.witness_n} fails at rho={_fmt(res.witness_rho)}")
    if args.family:
        fam = yamada_equality_family(int(get(conf, "yamada.k_max", 5)), n_max, step)
        print(fam.to_csv(index=False, float_format="%.12g", lineterminator="\n"), end="")
    return EXIT_OK


def cmd_run_all(args, conf: dict) -> int:
    out_dir = args.out or get(conf, "run.results_dir", "results")
    dims = tuple(get(conf, "bounds.dims", [2, 3, 4, 5, 6]))
    step = float(get(conf, "bounds.alpha_step", 0.01))
    n_max = int(get(conf, "yamada.n_max", 256))
    rho_step = float(get(conf, "yamada.rho_step", 1e-4))
    digits = int(get(conf, "output.value_digits", 12))
    rc = RunConfig("run-all", out=out_dir, extra={"dims": ",".join(map(str, dims)), "alpha_step": step,
                                                  "n_max": n_max, "rho_step": rho_step})
    os.makedirs(out_dir, exist_ok=True)
    header = rc.header()

    print("\n--- Bounds on the maximal realizable density ---")
    print("1. Lower-to-upper bound ratios...")
    _write_table(figure4_table(dims, alpha_grid(step)), os.path.join(out_dir, "figure4.csv"), header, digits)

    print("2. Bound table...")
    grid = [k * 0.05 for k in range(0, 61)]
    _write_table(bounds_table(grid, (1,) + dims), os.path.join(out_dir, "bounds.csv"), header, digits)

    print("3. Crossover alpha_C(d)...")
    tol = float(get(conf, "bounds.crossover_tol", 1e-12))
    pre = float(get(conf, "bounds.crossover_pre_step", 1e-3))
    iters = int(get(conf, "bounds.crossover_max_iter", 200))
    cross = pd.DataFrame([asdict(crossover_alpha_C(d, tol, pre_step=pre, max_iter=iters)) for d in dims])
    _write_table(cross, os.path.join(out_dir, "crossover.csv"), header, digits)

    print("4. Yamada upper bound in 1D...")
    rows = []
    for a in (0.0, 0.25, 0.3, 0.5, 0.75, 1.0, 1.5):
        res = yamada_upper_1d(a, n_max, rho_step)
        rows.append({"alpha": a, "R_Y": res.R_Y, "R_F": res.R_F, "witness_n": res.witness_n,
                     "witness_rho": res.witness_rho, "R_Y_interval": res.R_Y_interval,
                     "interval_witness_n": res.interval_witness_n})
    _write_table(pd.DataFrame(rows), os.path.join(out_dir, "yamada.csv"), header, digits)

    ref = reference_constants()
    meta = {
        "version": __version__,
        "dims": list(dims),
        "alpha_step": step,
        "yamada_n_max": n_max,
        "yamada_rho_step": rho_step,
        "reference_lower_alpha0_1d": ref.lower_alpha0_1d,
        "reference_upper_alpha0_1d": ref.upper_alpha0_1d,
        "upper_R_F_alpha0_1d": upper_R_F(0.0, 1),
        "outputs": ["figure4.csv", "bounds.csv", "crossover.csv", "yamada.csv"],
    }
    with open(os.path.join(out_dir, "run_metadata.json"), "w") as f:
        json.dump(meta, f, indent=2)
    print(f"Saved results to {out_dir}/")
    return EXIT_OK


# ----------------------------- Parser ----------------------------- #

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Realizing and bounding (rho, g^(alpha)) on Z^d.")
    parser.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="YAML configuration file")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="raise log level (repeatable)")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("bounds", help="all bounds at one (alpha, d)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("figure4", help="r_C/R_F and r_A/R_F table")
    p.add_argument("--dims", type=_parse_dims)
    p.add_argument("--alpha-step", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure4)

    p = sub.add_parser("synth", help="synthesize a 1D basic process")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--starts", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("realize-verify", help="exact check of the product construction")
    p.add_argument("--proc", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--radius", type=int)
    p.set_defaults(func=cmd_realize_verify)

    p = sub.add_parser("simulate", help="Monte Carlo estimate and consistency test")
    p.add_argument("--proc", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--box", type=_parse_box)
    p.add_argument("--replicas", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--thin", type=float)
    p.add_argument("--z-max", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("yamada", help="1D upper bound from the Yamada condition")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--nmax", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--family", action="store_true", help="also spot-check alpha = (k +- 1)/(2k)")
    p.set_defaults(func=cmd_yamada)

    p = sub.add_parser("run-all", help="reproduce every bound table into the results directory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run_all)
    return parser


def _configure_logging(conf: dict, verbose: int) -> None:
    level_name = str(get(conf, "logging.level", "WARNING")).upper()
    level = getattr(logging, level_name, logging.WARNING)
    level = max(logging.DEBUG, level - 10 * int(verbose))
    fmt = get(conf, "logging.format", "%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.basicConfig(level=level, format=fmt, stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    conf = load_conf(args.config)
    _configure_logging(conf, args.verbose)
    func = getattr(args, "func", cmd_run_all)
    if args.command is None:
        args.out = None
    try:
        return func(args, conf)
    except UsageError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RecordParseError) as e:
        print(f"{PROG}: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except NotGAlphaProfile as e:
        print(f"{PROG}: process is not of g^(alpha) form: {e}", file=sys.stderr)
        return EXIT_FAIL
    except LatticeError as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
