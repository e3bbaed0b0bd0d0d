"""Squared-extrapolation acceleration wrapped around any MM update.

Each outer iteration runs the base update twice, extrapolates along the
squared step with the Cauchy-Barzilai-Borwein length, projects back onto
the feasible set, and falls back toward the plain double step whenever the
extrapolated point worsens the objective. Halving the step length drives
it to -1, where the candidate coincides with the double MM step, so that
limit is taken explicitly instead of iterated toward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import mm_core, par_projection
from .criteria import Criterion
from .errors import InvalidArgumentError
from .mm_core import SolveTrace, is_worse
from .model import Scenario, Sequence

_STEP_LIMIT_TOL = 1e-12


@dataclass
class AccelOptions:
    """Controls for the accelerated scheme.

    max_backtracks caps the step-halvings per outer iteration; 0 disables
    extrapolation entirely and reproduces plain double-MM stepping.
    """

    tol: float = 1e-6
    max_iters: int = 10_000
    max_backtracks: int = 30
    record_trace: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.max_backtracks < 0:
            raise InvalidArgumentError("max_backtracks must be >= 0")


def accelerate(
    update: Callable[[np.ndarray], np.ndarray],
    objective: Callable[[np.ndarray], float],
    direction: str,
    project: Callable[[np.ndarray], np.ndarray],
    U0: np.ndarray | Sequence,
    opts: Optional[AccelOptions] = None,
) -> tuple[Sequence, SolveTrace]:
    """Accelerated fixed-point iteration of an arbitrary monotone update.

    update maps a feasible iterate to the next one, objective scores an
    iterate, direction is "minimize" or "maximize", and project restores
    feasibility of extrapolated points. Accepted iterates never worsen
    the objective: candidates that do are backtracked toward, and finally
    replaced by, the plain double update.
    """
    opts = opts or AccelOptions()
    if direction not in ("minimize", "maximize"):
        raise InvalidArgumentError(f"unknown direction {direction!r}")
    U = np.array(U0.U if isinstance(U0, Sequence) else U0, dtype=complex)
    trace = SolveTrace()
    f_current = objective(U)
    trace.objective_evals += 1
    if opts.record_trace:
        trace.objectives.append(f_current)
        trace.update_evals_at.append(0)

    for t in range(1, opts.max_iters + 1):
        U1 = update(U)
        U2 = update(U1)
        trace.update_evals += 2
        trace.iterations = t
        L1 = U1 - U
        L2 = U2 - U1 - L1
        n1 = float(np.linalg.norm(L1))
        n2 = float(np.linalg.norm(L2))

        if n1 == 0.0:
            # exact fixed point of the update map
            candidate, f_candidate = U1, f_current
        elif n2 == 0.0 or opts.max_backtracks == 0:
            candidate = U2
            f_candidate = objective(candidate)
            trace.objective_evals += 1
        else:
            step = -n1 / n2
            candidate = project(U - 2.0 * step * L1 + step**2 * L2)
            f_candidate = objective(candidate)
            trace.objective_evals += 1
            backtracks = 0
            while is_worse(f_candidate, f_current, direction):
                if abs(step + 1.0) <= _STEP_LIMIT_TOL or backtracks >= opts.max_backtracks:
                    candidate = U2
                    f_candidate = objective(candidate)
                    trace.objective_evals += 1
                    break
                step = (step - 1.0) / 2.0
                candidate = project(U - 2.0 * step * L1 + step**2 * L2)
                f_candidate = objective(candidate)
                trace.objective_evals += 1
                backtracks += 1

        move = float(np.linalg.norm(candidate - U))
        trace.step_norms.append(move)
        U, f_current = candidate, f_candidate
        if opts.record_trace:
            trace.objectives.append(f_current)
            trace.update_evals_at.append(trace.update_evals)
        if move <= opts.tol:
            trace.termination = "tolerance"
            break

    return Sequence(U=U), trace


def solve_accelerated(
    scenario: Scenario,
    criterion: Criterion,
    init: Sequence,
    opts: Optional[AccelOptions] = None,
    mode: str = "unimodular",
) -> tuple[Sequence, SolveTrace]:
    """Accelerated design under either feasible set.

    mode "unimodular" pairs the constant-modulus update with the complex
    circle projection; mode "par" pairs the low-PAR update with the
    column-wise energy + peak projection.
    """
    opts = opts or AccelOptions()
    cfg = scenario.config
    if mode == "unimodular":
        init.validate_unimodular(cfg)
        engine = mm_core.StepEngine(scenario, criterion)
    elif mode == "par":
        init.validate_par(cfg)
        engine = par_projection.par_engine(scenario, criterion)
    else:
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    return accelerate(
        engine.update, engine.objective, criterion.direction, engine.project,
        init, opts,
    )
