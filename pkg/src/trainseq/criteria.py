"""Estimation criteria: Bayesian error covariance, MMSE and CMI objectives,
the Bayesian and least-squares estimators, and correlation diagnostics.

Every inverse-bearing formula is evaluated as a Hermitian solve against
P = S R0 S^H + W (size (N+K)*Nr), never against the channel covariance,
so positive semidefinite priors are handled without special casing.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._linalg import (
    chol_psd,
    hermitize,
    logdet_hermitian_pd,
    psd_sqrt_factor,
    solve_hermitian_pd,
)
from .errors import InvalidArgumentError, SingularModelError
from .model import ChannelPrior, NoiseModel, correlation_lag

_RANK_RTOL = 1e-10


class Criterion(enum.Enum):
    """Which scalar figure of merit the design optimizes."""

    MMSE = "mmse"
    CMI = "cmi"

    @property
    def direction(self) -> str:
        """'minimize' for the error criterion, 'maximize' for the information one."""
        return "minimize" if self is Criterion.MMSE else "maximize"


@dataclass(frozen=True)
class ErrorCovariance:
    """Posterior error covariance R plus the cached solve products.

    P is the received-signal covariance S R0 S^H + W and A = P^{-1} S R0
    is the estimator gain; both are reused by the iterative solvers.
    """

    R: np.ndarray
    P: np.ndarray
    A: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.R)))


def error_covariance(
    S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel
) -> ErrorCovariance:
    """Error covariance R0 - R0 S^H (S R0 S^H + W)^{-1} S R0 of the Bayes estimator."""
    S_tilde = np.asarray(S_tilde, dtype=complex)
    if S_tilde.shape != (noise.dim, prior.dim):
        raise InvalidArgumentError(
            f"lifted matrix has shape {S_tilde.shape}, expected {(noise.dim, prior.dim)}"
        )
    SR = S_tilde @ prior.R0
    P = hermitize(SR @ S_tilde.conj().T + noise.W)
    A = solve_hermitian_pd(P, SR, "received-signal covariance")
    R = hermitize(prior.R0 - SR.conj().T @ A)
    return ErrorCovariance(R=R, P=P, A=A)


def mmse_objective(
    S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel
) -> float:
    """Trace of the Bayesian error covariance (mean square estimation error)."""
    return error_covariance(S_tilde, prior, noise).trace


def cmi_objective(S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel) -> float:
    """Mutual information between channel and received signal for this sequence.

    Evaluated as (1/2) logdet(I + R0 S^H W^{-1} S), which agrees with
    (1/2) logdet(R0 R^{-1}) whenever the latter is defined and stays
    meaningful for singular priors.
    """
    return cmi_eval_true(S_tilde, prior.R0, noise)


def cmi_eval_true(S_tilde: np.ndarray, R_true: np.ndarray, noise: NoiseModel) -> float:
    """(1/2) logdet(I + R_true S^H W^{-1} S), the evaluation-time information metric."""
    S_tilde = np.asarray(S_tilde, dtype=complex)
    R_true = np.asarray(R_true, dtype=complex)
    if S_tilde.shape != (noise.dim, R_true.shape[0]):
        raise InvalidArgumentError("lifted matrix shape does not match covariance/noise")
    Q = S_tilde.conj().T @ solve_hermitian_pd(noise.W, S_tilde, "noise covariance")
    # det(I + R Q) = det(I + F^H Q F) for any F with F F^H = R.
    F = psd_sqrt_factor(R_true, "channel covariance")
    dim = R_true.shape[0]
    M = np.eye(dim) + F.conj().T @ hermitize(Q) @ F
    return 0.5 * logdet_hermitian_pd(M, "information Gram matrix")


def objective(
    criterion: Criterion, S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel
) -> float:
    """Evaluate the chosen criterion at a lifted sequence matrix."""
    if criterion is Criterion.MMSE:
        return mmse_objective(S_tilde, prior, noise)
    return cmi_objective(S_tilde, prior, noise)


def mmse_estimate(
    y: np.ndarray, S_tilde: np.ndarray, prior: ChannelPrior, noise: NoiseModel
) -> np.ndarray:
    """Posterior-mean channel estimate h0 + R0 S^H P^{-1} (y - S h0)."""
    y = np.asarray(y, dtype=complex).reshape(-1)
    S_tilde = np.asarray(S_tilde, dtype=complex)
    if y.shape[0] != S_tilde.shape[0]:
        raise InvalidArgumentError("received vector length does not match the lift")
    SR = S_tilde @ prior.R0
    P = hermitize(SR @ S_tilde.conj().T + noise.W)
    innovation = y - S_tilde @ prior.h0
    return prior.h0 + SR.conj().T @ solve_hermitian_pd(
        P, innovation, "received-signal covariance"
    )


def ml_estimate(y: np.ndarray, S_tilde: np.ndarray) -> np.ndarray:
    """Least-squares channel estimate; requires a full column rank lift."""
    y = np.asarray(y, dtype=complex).reshape(-1)
    S_tilde = np.asarray(S_tilde, dtype=complex)
    rows, cols = S_tilde.shape
    if rows < cols:
        raise SingularModelError(
            f"lift is {rows}x{cols}: fewer received samples than channel unknowns"
        )
    est, _, rank, _ = np.linalg.lstsq(S_tilde, y, rcond=_RANK_RTOL)
    if rank < cols:
        raise SingularModelError(
            f"lift is rank {rank} < {cols} columns; Gram matrix is singular"
        )
    return est


def ml_error(S: np.ndarray, Nr: int) -> float:
    """Nr * Tr((S^H S)^{-1}), the least-squares mean square error."""
    S = np.asarray(S, dtype=complex)
    G = hermitize(S.conj().T @ S)
    try:
        L = chol_psd(G, "sequence Gram matrix")
    except Exception as exc:
        rows, cols = S.shape
        raise SingularModelError(
            f"S^H S singular for S of shape {rows}x{cols}"
        ) from exc
    Linv = np.linalg.inv(L)
    return float(Nr * np.sum(np.abs(Linv) ** 2))


def weighted_corr_objective(U: np.ndarray, alpha: float, K: int) -> float:
    """Lag-weighted distance of the sequence correlations from the impulse ideal.

    (K+1) * ||lag0 - (alpha/Nt) I||_F^2 + 2 * sum_{k=1..K} (K+1-k) * ||lagk||_F^2.
    Diagnostic only; zero exactly for perfectly uncorrelated sequences.
    """
    U = np.asarray(U, dtype=complex)
    Nt = U.shape[1]
    sig0 = correlation_lag(U, 0) - (alpha / Nt) * np.eye(Nt)
    total = (K + 1) * float(np.sum(np.abs(sig0) ** 2))
    for k in range(1, K + 1):
        total += 2.0 * (K + 1 - k) * float(np.sum(np.abs(correlation_lag(U, k)) ** 2))
    return total
