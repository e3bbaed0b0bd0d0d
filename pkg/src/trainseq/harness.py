"""Seeded Monte Carlo experiments: trial evaluation, SNR sweeps, CSV output.

Every (method, snr, trial) cell derives its own random stream from the
plan's base seed, so sweeps are reproducible byte for byte regardless of
execution order; rows are emitted ordered by (method, snr, trial).
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from . import criteria, mm_core, par_projection, squarem
from .criteria import Criterion
from .errors import InvalidArgumentError, TrainSeqError
from .model import (
    NoiseModel,
    Scenario,
    Sequence,
    lift,
    sample_complex_gaussian,
    scale_noise_for_snr,
    scenario_from_json,
)

METHODS = (
    "mmse-optimal",
    "mmse-optimal-accel",
    "cmi-optimal",
    "cmi-optimal-accel",
    "random-phase",
)

MODES = ("unimodular", "par")

CSV_HEADER = "method,snr_db,trial,mse,cmi,iterations,update_evals,wall_time_ms"


@dataclass(frozen=True)
class ExperimentPlan:
    """A full sweep: which methods to run at which SNRs, how many trials."""

    scenario: Scenario
    methods: tuple[str, ...]
    snr_list: tuple[float, ...]
    trials: int
    seed: int
    mode: str = "unimodular"
    tol: float = 1e-6
    max_iters: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        if not self.methods:
            raise InvalidArgumentError("methods must be nonempty")
        for m in self.methods:
            if m not in METHODS:
                raise InvalidArgumentError(
                    f"unknown method {m!r}; choose from {', '.join(METHODS)}"
                )
        if not self.snr_list:
            raise InvalidArgumentError("snr_list must be nonempty")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}")
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")


@dataclass(frozen=True)
class SweepRow:
    method: str
    snr_db: float
    trial: int
    mse: float
    cmi: float
    iterations: int
    update_evals: int
    wall_time_ms: float


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def mean_mse(self, method: str, snr_db: float) -> float:
        vals = [
            r.mse for r in self.rows if r.method == method and r.snr_db == snr_db
        ]
        return float(np.mean(vals))

    def mean_cmi(self, method: str, snr_db: float) -> float:
        vals = [
            r.cmi for r in self.rows if r.method == method and r.snr_db == snr_db
        ]
        return float(np.mean(vals))


def trial_seed_sequence(
    base_seed: int, method: str, snr_index: int, trial: int
) -> np.random.SeedSequence:
    """Deterministic per-cell seed derivation from the base seed."""
    return np.random.SeedSequence(
        [int(base_seed), zlib.crc32(method.encode("utf-8")), snr_index, trial]
    )


def baseline_random_phase(
    config, rng: np.random.Generator, mode: str = "unimodular"
) -> Sequence:
    """Feasible sequence with i.i.d. uniform phases.

    Constant-modulus magnitudes in unimodular mode; in PAR mode each
    antenna transmits at its own constant magnitude sqrt(alpha_m / N),
    which satisfies any PAR bound >= 1.
    """
    phases = np.exp(2j * np.pi * rng.random((config.N, config.Nt)))
    if mode == "unimodular":
        return Sequence(U=config.unimodular_magnitude * phases)
    if mode == "par":
        mags = np.sqrt(np.asarray(config.antenna_energies) / config.N)
        return Sequence(U=phases * mags[None, :])
    raise InvalidArgumentError(f"unknown mode {mode!r}")


def run_trial(
    scenario: Scenario, sequence: Sequence, rng: np.random.Generator
) -> tuple[float, float]:
    """Draw one channel + noise realization and score the sequence.

    Returns (squared estimation error, information metric). The channel
    comes from the scenario's truth distribution while the estimator uses
    the (possibly mismatched) prior.
    """
    cfg = scenario.config
    S_tilde = lift(sequence.U, cfg.K, cfg.Nr)
    truth = scenario.effective_truth
    h_true = sample_complex_gaussian(truth.h0, truth.R0, rng)
    v = sample_complex_gaussian(
        np.zeros(scenario.noise.dim), scenario.noise.W, rng
    )
    y = S_tilde @ h_true + v
    h_hat = criteria.mmse_estimate(y, S_tilde, scenario.prior, scenario.noise)
    mse = float(np.sum(np.abs(h_hat - h_true) ** 2))
    cmi = criteria.cmi_eval_true(S_tilde, truth.R0, scenario.noise)
    return mse, cmi


def design_sequence(
    scenario: Scenario,
    method: str,
    mode: str,
    rng: np.random.Generator,
    tol: float = 1e-6,
    max_iters: Optional[int] = None,
) -> tuple[Sequence, Optional[mm_core.SolveTrace]]:
    """Design (or just draw) the sequence one method produces for a scenario."""
    init = baseline_random_phase(scenario.config, rng, mode)
    if method == "random-phase":
        return init, None
    criterion = Criterion.MMSE if method.startswith("mmse") else Criterion.CMI
    if method.endswith("-accel"):
        opts = squarem.AccelOptions(
            tol=tol, max_iters=max_iters or 10_000, record_trace=False
        )
        return squarem.solve_accelerated(scenario, criterion, init, opts, mode=mode)
    opts = mm_core.SolveOptions(
        tol=tol, max_iters=max_iters or 100_000, record_trace=False
    )
    if mode == "par":
        return par_projection.solve_par(scenario, criterion, init, opts)
    return mm_core.solve(scenario, criterion, init, opts)


def sweep(plan: ExperimentPlan) -> SweepResult:
    """Run the full Monte Carlo grid of a plan.

    Each cell redesigns its sequence from a fresh random start (local
    minima average out across trials) and then scores it on one channel
    realization. A failing cell contributes a NaN row instead of aborting
    the sweep.
    """
    base = plan.scenario
    result = SweepResult()
    for method in plan.methods:
        for snr_index, snr_db in enumerate(plan.snr_list):
            noise = scale_noise_for_snr(base.config, base.noise.W, snr_db)
            scenario = base.with_noise(noise)
            for trial in range(plan.trials):
                ss = trial_seed_sequence(plan.seed, method, snr_index, trial)
                rng_design, rng_trial = [
                    np.random.default_rng(child) for child in ss.spawn(2)
                ]
                started = time.perf_counter()
                try:
                    sequence, trace = design_sequence(
                        scenario, method, plan.mode, rng_design,
                        tol=plan.tol, max_iters=plan.max_iters,
                    )
                    mse, cmi = run_trial(scenario, sequence, rng_trial)
                    iterations = trace.iterations if trace else 0
                    update_evals = trace.update_evals if trace else 0
                except TrainSeqError:
                    mse = cmi = float("nan")
                    iterations = update_evals = 0
                elapsed_ms = (time.perf_counter() - started) * 1e3
                result.rows.append(
                    SweepRow(
                        method=method,
                        snr_db=float(snr_db),
                        trial=trial,
                        mse=mse,
                        cmi=cmi,
                        iterations=iterations,
                        update_evals=update_evals,
                        wall_time_ms=elapsed_ms,
                    )
                )
    return result


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_sweep_csv(result: SweepResult, out: TextIO) -> None:
    """Emit the sweep CSV; all columns but wall_time_ms are reproducible."""
    out.write(CSV_HEADER + "\n")
    for r in result.rows:
        out.write(
            ",".join(
                [
                    r.method,
                    _fmt(r.snr_db),
                    str(r.trial),
                    _fmt(r.mse),
                    _fmt(r.cmi),
                    str(r.iterations),
                    str(r.update_evals),
                    f"{r.wall_time_ms:.3f}",
                ]
            )
            + "\n"
        )


TRACE_CSV_HEADER = "method,iteration,update_evals,objective,step_norm"


def write_trace_csv(trace: mm_core.SolveTrace, label: str, out: TextIO) -> None:
    """Objective-versus-work table of one solve, for convergence figures."""
    out.write(TRACE_CSV_HEADER + "\n")
    for i, obj in enumerate(trace.objectives):
        step = trace.step_norms[i - 1] if i >= 1 else 0.0
        out.write(
            ",".join(
                [label, str(i), str(trace.update_evals_at[i]), _fmt(obj), _fmt(step)]
            )
            + "\n"
        )


def sequence_to_json(sequence: Sequence, meta: Optional[dict] = None) -> dict:
    doc = {
        "N": sequence.N,
        "Nt": sequence.Nt,
        "entries": [
            [float(np.real(z)), float(np.imag(z))] for z in sequence.U.reshape(-1)
        ],
    }
    if meta:
        doc["meta"] = meta
    return doc


def sequence_from_json(doc: dict) -> Sequence:
    try:
        N, Nt = int(doc["N"]), int(doc["Nt"])
        entries = np.asarray(doc["entries"], dtype=float)
        if entries.shape != (N * Nt, 2):
            raise ValueError
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(
            "sequence JSON must carry N, Nt and N*Nt [re, im] entries"
        ) from exc
    U = (entries[:, 0] + 1j * entries[:, 1]).reshape(N, Nt)
    return Sequence(U=U)


def plan_from_json(doc: dict, scenario: Optional[Scenario] = None) -> ExperimentPlan:
    """Assemble a plan from its JSON document.

    The document either embeds the scenario under "scenario" or the
    caller passes one loaded separately.
    """
    if scenario is None:
        if "scenario" not in doc:
            raise InvalidArgumentError("plan needs an embedded 'scenario' object")
        scenario = scenario_from_json(doc["scenario"])
    try:
        methods = tuple(doc["methods"])
        snr_list = tuple(float(s) for s in doc["snr_db"])
        trials = int(doc["trials"])
    except KeyError as exc:
        raise InvalidArgumentError(f"plan is missing key {exc.args[0]!r}") from exc
    return ExperimentPlan(
        scenario=scenario,
        methods=methods,
        snr_list=snr_list,
        trials=trials,
        seed=int(doc.get("seed", 0)),
        mode=doc.get("mode", "unimodular"),
        tol=float(doc.get("tol", 1e-6)),
        max_iters=int(doc["max_iters"]) if "max_iters" in doc else None,
    )
