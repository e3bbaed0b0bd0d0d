"""Majorization-minimization iteration for constant-modulus sequence design.

One update majorizes the criterion twice around the current iterate: first
by the tangent plane of the criterion seen as a jointly concave (convex,
for the information criterion) function of the lifted sequence and the
received-signal covariance, then by a quadratic upper bound whose
curvature constant comes from a cheap norm product instead of an exact
largest eigenvalue. The resulting subproblem is linear in the sequence
and is solved in closed form by projecting onto the complex circle.

The surrogate evaluators at the bottom exist so the two majorization
layers can be checked numerically (tangency and domination); they are
diagnostics, not part of the update path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from . import criteria
from ._linalg import max_column_sum_norm, solve_hermitian_pd
from .criteria import Criterion, error_covariance
from .errors import InvalidArgumentError, NumericFailureError
from .model import ChannelPrior, NoiseModel, Scenario, Sequence, adjoint_sum, lift

LAMBDA_FLOOR = 1e-300
MONOTONE_SLACK = 1e-10


@dataclass
class SolveOptions:
    """Iteration control: stop when the Frobenius step drops below tol."""

    tol: float = 1e-6
    max_iters: int = 100_000
    record_trace: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")


@dataclass
class SolveTrace:
    """Per-iteration diagnostics of one solver run.

    objectives[i] is the criterion value of the i-th iterate (index 0 is
    the start point) and update_evals_at[i] the cumulative number of MM
    updates spent to reach it; both lists are empty when tracing is off.
    """

    objectives: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    update_evals_at: list = field(default_factory=list)
    termination: str = "iteration-cap"
    iterations: int = 0
    update_evals: int = 0
    objective_evals: int = 0


def is_worse(candidate: float, reference: float, direction: str,
             slack: float = MONOTONE_SLACK) -> bool:
    """Whether a candidate objective value loses to a reference one.

    Comparison carries a small relative slack so exact numerical ties do
    not count as regressions.
    """
    margin = slack * max(1.0, abs(reference))
    if direction == "minimize":
        return candidate > reference + margin
    if direction == "maximize":
        return candidate < reference - margin
    raise InvalidArgumentError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# Surrogate building blocks (the documented op surface)
# ---------------------------------------------------------------------------


def compute_A(S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel) -> np.ndarray:
    """Estimator gain (S R0 S^H + W)^{-1} S R0, computed as a Hermitian solve."""
    S_tilde = np.asarray(S_tilde, dtype=complex)
    SR = S_tilde @ prior.R0
    P = SR @ S_tilde.conj().T + noise.W
    return solve_hermitian_pd(P, SR, "received-signal covariance")


def compute_V(
    criterion: Criterion,
    S_tilde: np.ndarray,
    prior: ChannelPrior,
    noise: NoiseModel,
) -> np.ndarray:
    """Surrogate weight: identity for MMSE, inverse error covariance for CMI."""
    if criterion is Criterion.MMSE:
        return np.eye(prior.dim)
    ec = error_covariance(S_tilde, prior, noise)
    return _inverse_error_covariance(ec.R)


def _inverse_error_covariance(R: np.ndarray) -> np.ndarray:
    try:
        return solve_hermitian_pd(R, np.eye(R.shape[0]), "error covariance")
    except NumericFailureError as exc:
        raise NumericFailureError(
            "error covariance is numerically singular; add diagonal jitter "
            "to the prior covariance or use the MMSE criterion"
        ) from exc


def lambda_bound(R0: np.ndarray, A: np.ndarray, V: np.ndarray) -> float:
    """Curvature constant: product of maximum-column-sum norms.

    Upper-bounds the largest eigenvalue of R0^T (x) (A V A^H), which is
    what the quadratic majorization step actually needs; the product of
    induced 1-norms is cheap and always at least as large.
    """
    Z = A @ V @ A.conj().T
    lam = max_column_sum_norm(np.asarray(R0)) * max_column_sum_norm(Z)
    return max(lam, LAMBDA_FLOOR)


def compute_B(
    lam: float,
    S_tilde: np.ndarray,
    A: np.ndarray,
    V: np.ndarray,
    prior: ChannelPrior,
) -> np.ndarray:
    """Linear-surrogate coefficient lam*S - A V A^H S R0 + A V R0."""
    S_tilde = np.asarray(S_tilde, dtype=complex)
    AV = A @ V
    return lam * S_tilde - AV @ (A.conj().T @ (S_tilde @ prior.R0)) + AV @ prior.R0


@dataclass(frozen=True)
class MMState:
    """Cached quantities of one iterate: gain, weight, curvature, coefficient."""

    U: np.ndarray
    S_tilde: np.ndarray
    A: np.ndarray
    V: np.ndarray
    lam: float
    B: np.ndarray
    objective: float


def _surrogate_parts(S_tilde, prior, noise, criterion):
    """(error_covariance, V, lam, B) for one surrogate center."""
    ec = error_covariance(S_tilde, prior, noise)
    if criterion is Criterion.MMSE:
        V = np.eye(prior.dim)
    else:
        V = _inverse_error_covariance(ec.R)
    lam = lambda_bound(prior.R0, ec.A, V)
    B = compute_B(lam, S_tilde, ec.A, V, prior)
    return ec, V, lam, B


def mm_state(U: np.ndarray, scenario: Scenario, criterion: Criterion) -> MMState:
    """Assemble the full surrogate state (including the objective) at U."""
    cfg = scenario.config
    S_tilde = lift(np.asarray(U, dtype=complex), cfg.K, cfg.Nr)
    ec, V, lam, B = _surrogate_parts(S_tilde, scenario.prior, scenario.noise, criterion)
    if criterion is Criterion.MMSE:
        obj = ec.trace
    else:
        obj = criteria.cmi_objective(S_tilde, scenario.prior, scenario.noise)
    return MMState(
        U=np.array(U, dtype=complex),
        S_tilde=S_tilde,
        A=ec.A,
        V=V,
        lam=lam,
        B=B,
        objective=obj,
    )


# ---------------------------------------------------------------------------
# Projection, fused step engine, solve loop
# ---------------------------------------------------------------------------


def project_unimodular(C: np.ndarray, magnitude: float) -> np.ndarray:
    """Nearest constant-modulus matrix: keep phases, fix the magnitude.

    Zero entries have no preferred phase; they map to the positive real
    point on the circle so the projection stays deterministic.
    """
    if not magnitude > 0:
        raise InvalidArgumentError("magnitude must be positive")
    C = np.asarray(C, dtype=complex)
    out = magnitude * np.exp(1j * np.angle(C))
    out[C == 0] = magnitude
    return out


class StepEngine:
    """Fused per-scenario MM step shared by all solver loops.

    Folds two exact simplifications into the surrogate coefficient: with
    the identity weight it is lam*S - (A A^H)(S R0) + A R0, and with the
    inverse-error-covariance weight the last two terms collapse to A
    itself, so B = lam*S + A. Scenario constants (the prior's column-sum
    norm, its log determinant) are computed once.
    """

    def __init__(self, scenario: Scenario, criterion: Criterion,
                 project: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.scenario = scenario
        self.criterion = criterion
        cfg = scenario.config
        self.cfg = cfg
        self.R0 = np.asarray(scenario.prior.R0)
        self.W = np.asarray(scenario.noise.W)
        self.trace_R0 = float(np.real(np.trace(self.R0)))
        self.norm1_R0 = max_column_sum_norm(self.R0)
        self._logdet_R0: Optional[float] = None
        if project is None:
            magnitude = cfg.unimodular_magnitude
            project = lambda C: project_unimodular(C, magnitude)  # noqa: E731
        self.project = project

    def _logdet_prior(self) -> float:
        if self._logdet_R0 is None:
            try:
                L = sla.cho_factor(self.R0, lower=True, check_finite=False)
            except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
                raise NumericFailureError(
                    "information criterion needs a positive definite prior "
                    "covariance; add diagonal jitter or use the MMSE criterion"
                ) from exc
            self._logdet_R0 = 2.0 * float(
                np.sum(np.log(np.real(np.diag(L[0]))))
            )
        return self._logdet_R0

    def _factor_P(self, SR, S_tilde):
        P = SR @ S_tilde.conj().T + self.W
        try:
            return sla.cho_factor(P, lower=True, check_finite=False)
        except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
            raise NumericFailureError(
                "received-signal covariance factorization failed"
            ) from exc

    def step(self, U: np.ndarray) -> tuple[np.ndarray, float]:
        """One MM update; returns (next iterate, objective at the input)."""
        cfg = self.cfg
        S_tilde = lift(U, cfg.K, cfg.Nr)
        SR = S_tilde @ self.R0
        chol_P = self._factor_P(SR, S_tilde)
        A = sla.cho_solve(chol_P, SR, check_finite=False)
        if self.criterion is Criterion.MMSE:
            obj = self.trace_R0 - float(np.real(np.sum(SR.conj() * A)))
            Z = A @ A.conj().T
            lam = max(self.norm1_R0 * max_column_sum_norm(Z), LAMBDA_FLOOR)
            B = lam * S_tilde - Z @ SR + A @ self.R0
        else:
            R = self.R0 - SR.conj().T @ A
            try:
                chol_R = sla.cho_factor(R, lower=True, check_finite=False)
            except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
                raise NumericFailureError(
                    "error covariance is numerically singular; add diagonal "
                    "jitter to the prior covariance or use the MMSE criterion"
                ) from exc
            obj = 0.5 * (
                self._logdet_prior()
                - 2.0 * float(np.sum(np.log(np.real(np.diag(chol_R[0])))))
            )
            Z = A @ sla.cho_solve(chol_R, A.conj().T, check_finite=False)
            lam = max(self.norm1_R0 * max_column_sum_norm(Z), LAMBDA_FLOOR)
            B = lam * S_tilde + A
        C = adjoint_sum(B, cfg)
        return self.project(C), obj

    def update(self, U: np.ndarray) -> np.ndarray:
        """The bare update map (objective discarded)."""
        return self.step(U)[0]

    def objective(self, U: np.ndarray) -> float:
        """Criterion value at U, on the same numerical path as step()."""
        cfg = self.cfg
        S_tilde = lift(U, cfg.K, cfg.Nr)
        SR = S_tilde @ self.R0
        chol_P = self._factor_P(SR, S_tilde)
        A = sla.cho_solve(chol_P, SR, check_finite=False)
        if self.criterion is Criterion.MMSE:
            return self.trace_R0 - float(np.real(np.sum(SR.conj() * A)))
        R = self.R0 - SR.conj().T @ A
        try:
            chol_R = sla.cho_factor(R, lower=True, check_finite=False)
        except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
            raise NumericFailureError(
                "error covariance is numerically singular; add diagonal "
                "jitter to the prior covariance or use the MMSE criterion"
            ) from exc
        return 0.5 * (
            self._logdet_prior()
            - 2.0 * float(np.sum(np.log(np.real(np.diag(chol_R[0])))))
        )


def mm_update(U: np.ndarray, scenario: Scenario, criterion: Criterion) -> np.ndarray:
    """One MM step: build the linear surrogate at U and project its minimizer."""
    engine = StepEngine(scenario, criterion)
    return engine.update(np.asarray(U, dtype=complex))


def run_mm_loop(
    engine: StepEngine,
    U0: np.ndarray,
    opts: SolveOptions,
) -> tuple[np.ndarray, SolveTrace]:
    """Fixed-point loop shared by the constant-modulus and PAR solvers."""
    U = np.array(U0, dtype=complex)
    trace = SolveTrace()
    for t in range(1, opts.max_iters + 1):
        U_next, f_current = engine.step(U)
        trace.iterations = t
        trace.update_evals = t
        if opts.record_trace:
            trace.objectives.append(f_current)
            trace.update_evals_at.append(t - 1)
            trace.objective_evals += 1
        step = float(np.linalg.norm(U_next - U))
        trace.step_norms.append(step)
        U = U_next
        if step <= opts.tol:
            trace.termination = "tolerance"
            break
    if opts.record_trace:
        trace.objectives.append(engine.objective(U))
        trace.update_evals_at.append(trace.iterations)
        trace.objective_evals += 1
    return U, trace


def solve(
    scenario: Scenario,
    criterion: Criterion,
    init: Sequence,
    opts: Optional[SolveOptions] = None,
) -> tuple[Sequence, SolveTrace]:
    """Run the MM iteration from a feasible constant-modulus start point.

    Stops when consecutive iterates differ by at most opts.tol in
    Frobenius norm, or at the iteration cap (recorded in the trace, not
    an error). The objective trace is monotone in the criterion's
    direction.
    """
    opts = opts or SolveOptions()
    init.validate_unimodular(scenario.config)
    engine = StepEngine(scenario, criterion)
    U, trace = run_mm_loop(engine, init.U, opts)
    return Sequence(U=U), trace


# ---------------------------------------------------------------------------
# Surrogate evaluators (diagnostics for the two majorization layers)
# ---------------------------------------------------------------------------


def unified_surrogate(
    S_new: np.ndarray,
    S_center: np.ndarray,
    criterion: Criterion,
    prior: ChannelPrior,
    noise: NoiseModel,
) -> float:
    """Shared quadratic core Tr(V A^H S R0 S^H A) - 2 Re Tr(R0 V A^H S).

    A and V are frozen at the center iterate; minimizing this over the
    feasible set drives both criteria in their respective directions.
    """
    ec, V, _, _ = _surrogate_parts(S_center, prior, noise, criterion)
    return _unified_value(S_new, ec.A, V, prior.R0)


def _unified_value(S_new, A, V, R0) -> float:
    M = A.conj().T @ S_new
    quad = float(np.real(np.trace(V @ M @ R0 @ M.conj().T)))
    linear = float(np.real(np.trace(R0 @ V @ M)))
    return quad - 2.0 * linear


def first_surrogate(
    S_new: np.ndarray,
    S_center: np.ndarray,
    criterion: Criterion,
    prior: ChannelPrior,
    noise: NoiseModel,
) -> float:
    """Tangent-plane surrogate of the criterion around the center iterate.

    Upper bound for MMSE (the criterion is jointly concave in the lifted
    sequence and the received-signal covariance), lower bound for CMI
    (jointly convex); exact at the center.
    """
    ec, V, _, _ = _surrogate_parts(S_center, prior, noise, criterion)
    g_new = _unified_value(S_new, ec.A, V, prior.R0)
    g_center = _unified_value(S_center, ec.A, V, prior.R0)
    if criterion is Criterion.MMSE:
        return ec.trace + (g_new - g_center)
    cmi_center = criteria.cmi_objective(S_center, prior, noise)
    return cmi_center - 0.5 * (g_new - g_center)


def linear_surrogate(
    S_new: np.ndarray,
    S_center: np.ndarray,
    criterion: Criterion,
    prior: ChannelPrior,
    noise: NoiseModel,
) -> float:
    """Second-layer linear majorizer -2 Re Tr(B^H S) + const of the unified core.

    The constant is pinned by tangency at the center; domination holds on
    the equal-energy feasible set where the quadratic's norm term is
    constant.
    """
    ec, V, _, B = _surrogate_parts(S_center, prior, noise, criterion)
    g_center = _unified_value(S_center, ec.A, V, prior.R0)
    const = g_center + 2.0 * float(np.real(np.trace(B.conj().T @ S_center)))
    return -2.0 * float(np.real(np.trace(B.conj().T @ S_new))) + const
