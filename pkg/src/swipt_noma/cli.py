"""Command-line entry point.

Exit codes: 0 success, 1 infeasible or failed solve under ``--strict``, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .channel import sample_instance, trial_rng
from .conic.ipm import DEFAULT_TOL
from .miso import exhaustive_search, sca_solve
from .siso import gss_solve
from .system import MisoInstance, SisoInstance, SystemParams

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _complex_vector(text: str) -> np.ndarray:
    try:
        return np.array([complex(tok.replace(" ", "")) for tok in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad complex vector {text!r}") from exc


def _add_common(p, sweep: bool):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None if sweep else DEFAULT_TOL)
    p.add_argument("--strict", action="store_true", help="exit 1 on an infeasible or failed solve")
    if sweep:
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", default=None, help="CSV path (records); the summary goes next to it")
        p.add_argument("--grid", type=int, default=None, help="exhaustive-search lattice size")
        p.add_argument("--timing", action="store_true", help="fill the wall_time column")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swipt-noma", description="Cooperative SWIPT NOMA designs and Monte-Carlo sweeps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ps = sub.add_parser("solve-siso", help="single-antenna optimum by golden-section search")
    ps.add_argument("--h1", type=float)
    ps.add_argument("--h2", type=float)
    ps.add_argument("--g", type=float)
    ps.add_argument("--gamma1", type=float, default=1.0)
    ps.add_argument("--eps", type=float, default=1e-4)
    ps.add_argument("--ps-dbm", type=float, default=30.0, help="transmit power when sampling with --seed")
    _add_common(ps, sweep=False)

    pm = sub.add_parser("solve-miso", help="multi-antenna design by SCA or lattice search")
    pm.add_argument("--h1", type=_complex_vector, help="comma-separated complex entries, e.g. 1+2j,0.5")
    pm.add_argument("--h2", type=_complex_vector)
    pm.add_argument("--g", type=float)
    pm.add_argument("--gamma1", type=float, default=1.0)
    pm.add_argument("--nt", type=int, default=2, help="antennas when sampling with --seed")
    pm.add_argument("--ps-dbm", type=float, default=30.0)
    pm.add_argument("--method", choices=("sca", "es"), default="sca")
    pm.add_argument("--grid", type=int, default=101)
    _add_common(pm, sweep=False)

    pw = sub.add_parser("sweep", help="Monte-Carlo sweep from a YAML config")
    pw.add_argument("--config", required=True)
    _add_common(pw, sweep=True)

    pr = sub.add_parser("reproduce", help="run a figure preset")
    pr.add_argument("figure", choices=harness.FIGURES)
    _add_common(pr, sweep=True)
    return parser


def _need_instance(args, parser, vector: bool):
    explicit = [args.h1, args.h2, args.g]
    if args.seed is None and any(v is None for v in explicit):
        parser.error("give --h1, --h2 and --g, or --seed to sample an instance")


def _status_exit(feasible: bool, strict: bool) -> int:
    return EXIT_SOLVER if (strict and not feasible) else EXIT_OK


def _cmd_solve_siso(args, parser) -> int:
    _need_instance(args, parser, vector=False)
    if args.h1 is not None and args.h2 is not None and args.g is not None:
        inst = SisoInstance(args.h1, args.h2, args.g)
    else:
        params = SystemParams(transmit_power_dbm=args.ps_dbm, antenna_count_nt=1)
        inst = sample_instance(trial_rng(args.seed, 0), params).to_siso()
    sol = gss_solve(inst, args.gamma1, eps=args.eps)
    print(f"instance  h1={inst.h1:.12g} h2={inst.h2:.12g} g={inst.g:.12g} gamma1={args.gamma1:.12g}")
    print(f"status    {sol.status.value}")
    print(f"beta      {sol.beta:.12g}")
    print(f"alpha     {sol.alpha:.12g}")
    print(f"objective {sol.objective:.12g}")
    print(f"iterations {sol.iterations}")
    return _status_exit(sol.feasible, args.strict)


def _cmd_solve_miso(args, parser) -> int:
    _need_instance(args, parser, vector=True)
    if args.h1 is not None and args.h2 is not None and args.g is not None:
        if args.h1.shape != args.h2.shape:
            parser.error("--h1 and --h2 need the same length")
        inst = MisoInstance(args.h1, args.h2, args.g)
    else:
        params = SystemParams(transmit_power_dbm=args.ps_dbm, antenna_count_nt=args.nt)
        inst = sample_instance(trial_rng(args.seed, 0), params)
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    if args.method == "sca":
        sol = sca_solve(inst, args.gamma1, tol=args.tol, rng=rng)
    else:
        sol = exhaustive_search(inst, args.gamma1, args.grid, args.grid, tol=args.tol, rng=rng)
    print(f"nt        {inst.nt}")
    print(f"status    {sol.status.value}")
    print(f"beta      {sol.beta:.12g}")
    print(f"objective {sol.objective:.12g}")
    print(f"iterations {sol.iterations}")
    if sol.feasible:
        np.set_printoptions(precision=6)
        print(f"w1        {sol.w1}")
        print(f"w2        {sol.w2}")
        print(f"R_lambda  {sol.meta.get('eig_ratio_raw', math.nan):.6g} (before purification)")
        print(f"extraction {sol.meta.get('extraction')}")
        last = next((r for r in reversed(sol.trace) if "primal_res" in r), None)
        res = sol.meta.get("residuals") or (
            (last["primal_res"], last["dual_res"], last["gap"]) if last else None
        )
        if res is not None:
            print("residuals primal={:.3g} dual={:.3g} gap={:.3g}".format(*res))
    return _status_exit(sol.feasible, args.strict)


def _write(records, summary, out):
    records_csv = harness.records_to_csv(records)
    summary_csv = harness.summary_to_csv(summary)
    if out is None:
        sys.stdout.write(records_csv)
        return
    path = Path(out)
    path.write_text(records_csv, encoding="utf-8")
    path.with_name(path.stem + "_summary.csv").write_text(summary_csv, encoding="utf-8")
    sys.stderr.write(summary_csv)


def _cmd_sweep(args, parser) -> int:
    overrides = {"seed": args.seed, "trials": args.trials, "out": args.out, "tol": args.tol, "es_grid": args.grid}
    if args.timing:
        overrides["timing"] = True
    try:
        config = harness.load_config(args.config, overrides)
    except (OSError, ValueError, TypeError) as exc:
        parser.error(str(exc))
    records, summary = harness.run_sweep(config)
    _write(records, summary, config.out)
    return _status_exit(all(r.feasible for r in records), args.strict)


def _cmd_reproduce(args, parser) -> int:
    records, summary = harness.reproduce(
        args.figure,
        trials=args.trials or harness.DEFAULT_TRIALS,
        seed=0 if args.seed is None else args.seed,
        tol=args.tol or DEFAULT_TOL,
        es_grid=args.grid,
        timing=args.timing,
    )
    _write(records, summary, args.out)
    return _status_exit(all(r.feasible for r in records), args.strict)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "solve-siso": _cmd_solve_siso,
        "solve-miso": _cmd_solve_miso,
        "sweep": _cmd_sweep,
        "reproduce": _cmd_reproduce,
    }[args.command]
    try:
        return handler(args, parser)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
