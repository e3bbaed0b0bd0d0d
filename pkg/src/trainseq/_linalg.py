"""Hermitian factorization helpers used by the model and criteria modules.

All public entry points in the package funnel their positive-(semi)definite
factorizations through here so the jitter policy lives in one place: on a
failed Cholesky, add ``1e-12 * trace/dim`` to the diagonal once and retry;
a second failure raises :class:`NumericFailureError`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import NumericFailureError

JITTER_SCALE = 1e-12


def hermitize(M: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (M + M^H)/2."""
    return 0.5 * (M + M.conj().T)


def chol_psd(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor with a single jitter retry.

    Raises NumericFailureError if the matrix is indefinite beyond the
    jitter tolerance.
    """
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    dim = M.shape[0]
    jitter = JITTER_SCALE * float(np.real(np.trace(M))) / dim
    if jitter > 0.0:
        try:
            return np.linalg.cholesky(M + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            pass
    raise NumericFailureError(
        f"{what} is not positive definite within jitter tolerance"
    )


def psd_sqrt_factor(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """A factor F with F F^H = M for Hermitian PSD M.

    Fast path is the jittered Cholesky; genuinely singular matrices fall
    back to a symmetric eigendecomposition with negative eigenvalues
    clipped at zero.
    """
    try:
        return chol_psd(M, what)
    except NumericFailureError:
        w, Q = np.linalg.eigh(hermitize(M))
        return Q * np.sqrt(np.clip(w, 0.0, None))


def solve_hermitian_pd(M: np.ndarray, B: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Solve M X = B for Hermitian positive definite M via Cholesky."""
    try:
        factor = sla.cho_factor(hermitize(M), lower=True)
    except (sla.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericFailureError(f"solve against {what} failed: {exc}") from exc
    return sla.cho_solve(factor, B)


def logdet_hermitian_pd(M: np.ndarray, what: str = "matrix") -> float:
    """log det of a Hermitian positive definite matrix via Cholesky."""
    L = chol_psd(hermitize(M), what)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def max_column_sum_norm(M: np.ndarray) -> float:
    """Maximum absolute column sum (the induced 1-norm)."""
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=0)))
