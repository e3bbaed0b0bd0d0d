"""Command line interface.

Subcommands: design (one scenario to a sequence JSON plus trace CSV),
sweep (Monte Carlo grid to CSV), verify (invariant suites), correlation
(lag correlation table plus the weighted sidelobe figure of merit).

Exit codes: 0 success, 1 invalid configuration or arguments, 2 numeric
failure. Human-readable messages go to stderr; machine output goes to
the path named by --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, mm_core, squarem, verify
from .criteria import Criterion, weighted_corr_objective
from .errors import InvalidArgumentError, NumericFailureError, TrainSeqError
from .model import Scenario, correlation_lag, load_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; keep 1 for bad input
        self.print_usage(sys.stderr)
        raise InvalidArgumentError(message)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise InvalidArgumentError(f"expected a boolean, got {text!r}")


def _parse_snr_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise InvalidArgumentError(f"bad --snr list {text!r}") from exc
    if not values:
        raise InvalidArgumentError("--snr list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trainseq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", help="design one sequence for a scenario")
    design.add_argument("--config", required=True, help="scenario JSON path")
    design.add_argument("--criterion", choices=["mmse", "cmi"], default="mmse")
    design.add_argument("--mode", choices=list(harness.MODES), default="unimodular")
    design.add_argument("--accelerate", type=_parse_bool, default=True,
                        metavar="BOOL")
    design.add_argument("--seed", type=int, default=0)
    design.add_argument("--tol", type=float, default=1e-6)
    design.add_argument("--max-iters", type=int, default=None)
    design.add_argument("--out", required=True, help="sequence JSON output path")
    design.add_argument("--trace-out", default=None,
                        help="trace CSV path (default: <out>.trace.csv)")

    swp = sub.add_parser("sweep", help="Monte Carlo sweep over SNRs")
    swp.add_argument("--config", required=True,
                     help="scenario JSON, or a plan JSON embedding one")
    swp.add_argument("--methods", default=None,
                     help="comma-separated subset of: " + ",".join(harness.METHODS)
                     + " (default mmse-optimal-accel,random-phase)")
    swp.add_argument("--snr", default=None, metavar="a,b,c",
                     help="dB values (default -10,-5,0)")
    swp.add_argument("--trials", type=int, default=None, help="default 50")
    swp.add_argument("--seed", type=int, default=None, help="default 0")
    swp.add_argument("--mode", choices=list(harness.MODES), default=None)
    swp.add_argument("--tol", type=float, default=None, help="default 1e-6")
    swp.add_argument("--max-iters", type=int, default=None)
    swp.add_argument("--out", required=True, help="results CSV output path")

    ver = sub.add_parser("verify", help="run the invariant suites")
    ver.add_argument("--seed", type=int, default=20_240_901)

    corr = sub.add_parser("correlation",
                          help="lag correlation table of a sequence")
    corr.add_argument("--config", required=True, help="scenario JSON path")
    corr.add_argument("--seq", required=True, help="sequence JSON path")
    corr.add_argument("--out", default=None,
                      help="JSON output path (stdout text summary if omitted)")

    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read {path}: {exc}") from exc


def _cmd_design(args) -> int:
    scenario = load_scenario(args.config)
    rng = np.random.default_rng(args.seed)
    criterion = Criterion(args.criterion)
    init = harness.baseline_random_phase(scenario.config, rng, args.mode)
    if args.accelerate:
        opts = squarem.AccelOptions(tol=args.tol,
                                    max_iters=args.max_iters or 10_000)
        sequence, trace = squarem.solve_accelerated(
            scenario, criterion, init, opts, mode=args.mode
        )
    else:
        opts = mm_core.SolveOptions(tol=args.tol,
                                    max_iters=args.max_iters or 100_000)
        if args.mode == "par":
            from . import par_projection

            sequence, trace = par_projection.solve_par(scenario, criterion, init, opts)
        else:
            sequence, trace = mm_core.solve(scenario, criterion, init, opts)

    label = f"{args.criterion}-{args.mode}" + ("-accel" if args.accelerate else "")
    meta = {
        "criterion": args.criterion,
        "mode": args.mode,
        "accelerated": args.accelerate,
        "seed": args.seed,
        "tol": args.tol,
        "iterations": trace.iterations,
        "update_evals": trace.update_evals,
        "termination": trace.termination,
        "objective": trace.objectives[-1] if trace.objectives else None,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(harness.sequence_to_json(sequence, meta), fh, indent=2)
        fh.write("\n")
    trace_path = args.trace_out or str(Path(args.out).with_suffix(".trace.csv"))
    with open(trace_path, "w", encoding="utf-8") as fh:
        harness.write_trace_csv(trace, label, fh)
    print(
        f"designed {args.criterion} sequence: {trace.iterations} iterations, "
        f"termination={trace.termination}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from dataclasses import replace

    from .model import scenario_from_json

    doc = _load_json(args.config)
    if "methods" in doc or "trials" in doc:
        plan = harness.plan_from_json(doc)
    else:
        plan = harness.ExperimentPlan(
            scenario=scenario_from_json(doc),
            methods=("mmse-optimal-accel", "random-phase"),
            snr_list=(-10.0, -5.0, 0.0),
            trials=50,
            seed=0,
            mode="unimodular",
        )
    # explicit flags override either source
    overrides = {}
    if args.methods is not None:
        overrides["methods"] = tuple(
            m.strip() for m in args.methods.split(",") if m.strip()
        )
    if args.snr is not None:
        overrides["snr_list"] = _parse_snr_list(args.snr)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.tol is not None:
        overrides["tol"] = args.tol
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    if overrides:
        plan = replace(plan, **overrides)
    result = harness.sweep(plan)
    with open(args.out, "w", encoding="utf-8") as fh:
        harness.write_sweep_csv(result, fh)
    print(f"wrote {len(result.rows)} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = verify.run_all(args.seed)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    if failed:
        print(f"{failed} invariant suite(s) failed", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _cmd_correlation(args) -> int:
    scenario = load_scenario(args.config)
    sequence = harness.sequence_from_json(_load_json(args.seq))
    cfg = scenario.config
    if sequence.U.shape != (cfg.N, cfg.Nt):
        raise InvalidArgumentError(
            f"sequence is {sequence.U.shape}, scenario expects ({cfg.N}, {cfg.Nt})"
        )
    lags = []
    for k in range(cfg.N):
        sig = correlation_lag(sequence.U, k)
        lags.append(
            {
                "k": k,
                "frobenius_norm": float(np.linalg.norm(sig)),
                "matrix": [
                    [[float(z.real), float(z.imag)] for z in row] for row in sig
                ],
            }
        )
    isl = weighted_corr_objective(sequence.U, cfg.alpha, cfg.K)
    doc = {"weighted_isl": isl, "lags": lags}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"weighted ISL {isl:.6g}; table written to {args.out}", file=sys.stderr)
    else:
        print(f"weighted ISL {isl:.6g}")
        for entry in lags:
            print(f"lag {entry['k']:3d}  |corr|_F = {entry['frobenius_norm']:.6g}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "design":
            return _cmd_design(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "correlation":
            return _cmd_correlation(args)
        raise InvalidArgumentError(f"unknown command {args.command!r}")
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TrainSeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
