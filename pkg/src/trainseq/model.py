"""Channel model primitives: domain types, convolution lifts, covariances.

Conventions
-----------
All indices are 0-based internally. Formulas transcribed from 1-based
sources note the shift where it matters.

The channel vector ``h`` stacks the (K+1) matrix taps ``H_0..H_K`` of a
MIMO impulse response: with ``H`` of shape ((K+1)*Nt, Nr) holding the
transposed taps, ``h = vec(H)`` (column stacking). A flat index therefore
decomposes as receive antenna (outermost), then delay tap, then transmit
antenna (innermost), which matches the Kronecker covariance order
``R_receive (x) R_delay (x) R_transmit``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ._linalg import chol_psd, hermitize
from .errors import InvalidArgumentError

HERMITIAN_TOL = 1e-12
EIGENVALUE_TOL = 1e-10


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceConfig:
    """Dimensions and energy budget of one training-sequence design problem.

    Attributes
    ----------
    N : training length in samples.
    Nt, Nr : transmit / receive antenna counts.
    K : channel order; the impulse response has K+1 taps.
    alpha : total training energy across all antennas.
    antenna_energies : per-antenna energies, summing to alpha.
    par_limits : per-antenna peak-to-average power bounds, each in [1, N].
    """

    N: int
    Nt: int
    Nr: int
    K: int
    alpha: float
    antenna_energies: tuple[float, ...]
    par_limits: tuple[float, ...]

    def __post_init__(self):
        if self.N < 1 or self.Nt < 1 or self.Nr < 1:
            raise InvalidArgumentError("N, Nt and Nr must all be >= 1")
        if self.K < 0:
            raise InvalidArgumentError("channel order K must be >= 0")
        if not self.alpha > 0:
            raise InvalidArgumentError("training energy alpha must be > 0")
        if len(self.antenna_energies) != self.Nt:
            raise InvalidArgumentError("need one antenna energy per transmit antenna")
        if len(self.par_limits) != self.Nt:
            raise InvalidArgumentError("need one PAR limit per transmit antenna")
        total = float(sum(self.antenna_energies))
        if abs(total - self.alpha) > 1e-12 * self.alpha:
            raise InvalidArgumentError(
                f"antenna energies sum to {total!r}, expected alpha={self.alpha!r}"
            )
        for m, (am, xi) in enumerate(zip(self.antenna_energies, self.par_limits)):
            if not am > 0:
                raise InvalidArgumentError(f"antenna energy {m} must be positive")
            if not (1.0 <= xi <= self.N):
                raise InvalidArgumentError(
                    f"PAR limit {m} is {xi!r}, must lie in [1, N={self.N}]"
                )

    @classmethod
    def unimodular(
        cls, N: int, Nt: int, Nr: int, K: int, alpha: Optional[float] = None
    ) -> "SequenceConfig":
        """Config for the constant-modulus design problem (all PAR limits 1)."""
        a = float(N * Nt) if alpha is None else float(alpha)
        return cls(
            N=N,
            Nt=Nt,
            Nr=Nr,
            K=K,
            alpha=a,
            antenna_energies=tuple([a / Nt] * Nt),
            par_limits=tuple([1.0] * Nt),
        )

    @property
    def unimodular_magnitude(self) -> float:
        """Entry magnitude sqrt(alpha / (N * Nt)) of a feasible constant-modulus matrix."""
        return math.sqrt(self.alpha / (self.N * self.Nt))

    @property
    def is_unimodular(self) -> bool:
        eq_energy = all(
            abs(am - self.alpha / self.Nt) <= 1e-12 * self.alpha
            for am in self.antenna_energies
        )
        return eq_energy and all(xi == 1.0 for xi in self.par_limits)

    @property
    def channel_dim(self) -> int:
        return (self.K + 1) * self.Nt * self.Nr

    @property
    def received_dim(self) -> int:
        return (self.N + self.K) * self.Nr


@dataclass(frozen=True)
class Sequence:
    """An N x Nt training matrix of complex amplitudes."""

    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        if U.ndim != 2:
            raise InvalidArgumentError("sequence matrix must be 2-D (N x Nt)")
        object.__setattr__(self, "U", _freeze(U))

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def Nt(self) -> int:
        return self.U.shape[1]

    def validate_unimodular(self, config: SequenceConfig) -> None:
        mag = config.unimodular_magnitude
        if self.U.shape != (config.N, config.Nt):
            raise InvalidArgumentError("sequence shape does not match config")
        err = np.max(np.abs(np.abs(self.U) - mag))
        if err > 1e-12 * mag:
            raise InvalidArgumentError(
                f"entries deviate from constant modulus by {err:.3e}"
            )

    def validate_par(self, config: SequenceConfig) -> None:
        if self.U.shape != (config.N, config.Nt):
            raise InvalidArgumentError("sequence shape does not match config")
        for m in range(config.Nt):
            am = config.antenna_energies[m]
            peak = math.sqrt(am * config.par_limits[m] / config.N)
            col = self.U[:, m]
            energy = float(np.sum(np.abs(col) ** 2))
            if abs(energy - am) > 1e-9 * am:
                raise InvalidArgumentError(
                    f"antenna {m} energy {energy!r} != required {am!r}"
                )
            if np.max(np.abs(col)) > peak * (1.0 + 1e-9):
                raise InvalidArgumentError(f"antenna {m} exceeds its amplitude ceiling")


@dataclass(frozen=True)
class ChannelPrior:
    """Gaussian prior (mean, covariance) on the stacked channel vector."""

    h0: np.ndarray
    R0: np.ndarray

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex).reshape(-1)
        R0 = np.asarray(self.R0, dtype=complex)
        if R0.ndim != 2 or R0.shape[0] != R0.shape[1]:
            raise InvalidArgumentError("covariance must be square")
        if h0.shape[0] != R0.shape[0]:
            raise InvalidArgumentError("mean length does not match covariance size")
        scale = max(float(np.max(np.abs(R0))), 1.0)
        if np.max(np.abs(R0 - R0.conj().T)) > HERMITIAN_TOL * scale:
            raise InvalidArgumentError("covariance is not Hermitian")
        dim = R0.shape[0]
        trace = float(np.real(np.trace(R0)))
        min_eig = float(np.min(np.linalg.eigvalsh(hermitize(R0)))) if dim else 0.0
        if min_eig < -EIGENVALUE_TOL * max(trace, 0.0) / max(dim, 1):
            raise InvalidArgumentError(
                f"covariance has eigenvalue {min_eig:.3e} below the PSD tolerance"
            )
        object.__setattr__(self, "h0", _freeze(h0))
        object.__setattr__(self, "R0", _freeze(hermitize(R0)))

    @property
    def dim(self) -> int:
        return self.R0.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Hermitian positive definite covariance of the stacked noise vector."""

    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise InvalidArgumentError("noise covariance must be square")
        scale = max(float(np.max(np.abs(W))), 1.0)
        if np.max(np.abs(W - W.conj().T)) > HERMITIAN_TOL * scale:
            raise InvalidArgumentError("noise covariance is not Hermitian")
        W = hermitize(W)
        try:
            np.linalg.cholesky(W)
        except np.linalg.LinAlgError as exc:
            raise InvalidArgumentError(
                "noise covariance must be strictly positive definite"
            ) from exc
        object.__setattr__(self, "W", _freeze(W))

    @property
    def dim(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class Scenario:
    """One full design problem: dimensions, prior, noise and (optional) truth.

    ``truth`` carries the distribution the Monte Carlo harness draws real
    channels from; when absent the prior doubles as the truth.
    """

    config: SequenceConfig
    prior: ChannelPrior
    noise: NoiseModel
    truth: Optional[ChannelPrior] = None

    def __post_init__(self):
        cfg = self.config
        if self.prior.dim != cfg.channel_dim:
            raise InvalidArgumentError(
                f"prior covariance is {self.prior.dim}x{self.prior.dim}, "
                f"expected {cfg.channel_dim} for (K+1)*Nt*Nr"
            )
        if self.noise.dim != cfg.received_dim:
            raise InvalidArgumentError(
                f"noise covariance is {self.noise.dim}x{self.noise.dim}, "
                f"expected {cfg.received_dim} for (N+K)*Nr"
            )
        if self.truth is not None and self.truth.dim != cfg.channel_dim:
            raise InvalidArgumentError("truth covariance size does not match channel")

    @property
    def effective_truth(self) -> ChannelPrior:
        return self.truth if self.truth is not None else self.prior

    def with_noise(self, noise: NoiseModel) -> "Scenario":
        return replace(self, noise=noise)


# ---------------------------------------------------------------------------
# Lifts and correlations
# ---------------------------------------------------------------------------


def toeplitz_lift(U: np.ndarray, K: int) -> np.ndarray:
    """Block Toeplitz convolution matrix of a training matrix.

    Block column j (j = 0..K) holds U in rows j..j+N-1 and zeros
    elsewhere, so the result maps stacked channel taps to the noiseless
    received samples. Shape (N+K, (K+1)*Nt).
    """
    if K < 0:
        raise InvalidArgumentError("channel order K must be >= 0")
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] < 1:
        raise InvalidArgumentError("U must be a 2-D matrix with at least one row")
    N, Nt = U.shape
    S = np.zeros((N + K, (K + 1) * Nt), dtype=complex)
    for j in range(K + 1):
        S[j : j + N, j * Nt : (j + 1) * Nt] = U
    return S


def kron_lift(S: np.ndarray, Nr: int) -> np.ndarray:
    """Block diagonal I_Nr (x) S, one copy of S per receive antenna."""
    if Nr < 1:
        raise InvalidArgumentError("Nr must be >= 1")
    S = np.asarray(S, dtype=complex)
    return np.kron(np.eye(Nr), S)


def lift(U: np.ndarray, K: int, Nr: int) -> np.ndarray:
    """Full measurement matrix kron_lift(toeplitz_lift(U, K), Nr)."""
    return kron_lift(toeplitz_lift(U, K), Nr)


def adjoint_sum(B: np.ndarray, config: SequenceConfig) -> np.ndarray:
    """Adjoint of the composed lift: sum of the (Nr*(K+1)) U-shaped submatrices.

    B must have the shape of the lifted measurement matrix. Submatrix
    (i, j) spans rows (N+K)*i + j .. +N-1 and columns Nt*(K+1)*i + Nt*j
    .. +Nt-1 for i = 0..Nr-1, j = 0..K; these are exactly the positions
    the lift writes U into, so Re Tr(B^H lift(U)) = Re Tr(adjoint_sum(B)^H U).
    """
    B = np.asarray(B, dtype=complex)
    N, Nt, Nr, K = config.N, config.Nt, config.Nr, config.K
    expected = ((N + K) * Nr, (K + 1) * Nt * Nr)
    if B.shape != expected:
        raise InvalidArgumentError(
            f"B has shape {B.shape}, expected {expected} for this config"
        )
    out = np.zeros((N, Nt), dtype=complex)
    for i in range(Nr):
        row0 = (N + K) * i
        col0 = Nt * (K + 1) * i
        for j in range(K + 1):
            out += B[row0 + j : row0 + j + N, col0 + Nt * j : col0 + Nt * (j + 1)]
    return out


def correlation_lag(U: np.ndarray, k: int) -> np.ndarray:
    """Aperiodic cross-correlation matrix of the antenna sequences at lag k.

    Entry (m1, m2) sums u[n, m1] * conj(u[n-k, m2]) over the overlap.
    Negative lags return the Hermitian transpose of the positive lag;
    |k| >= N returns the zero matrix (empty overlap).
    """
    U = np.asarray(U, dtype=complex)
    N, Nt = U.shape
    if k < 0:
        return correlation_lag(U, -k).conj().T
    if k >= N:
        return np.zeros((Nt, Nt), dtype=complex)
    return U[k:].T @ U[: N - k].conj()


def correlation_block_matrix(U: np.ndarray, K: int) -> np.ndarray:
    """Assemble S^H S from the lag correlation matrices.

    Block (a, b) of the Gram matrix of the Toeplitz lift equals the
    transpose of the lag-(a-b) correlation matrix; the transpose is an
    exact consequence of the lift layout (it vanishes for one transmit
    antenna).
    """
    U = np.asarray(U, dtype=complex)
    Nt = U.shape[1]
    out = np.zeros(((K + 1) * Nt, (K + 1) * Nt), dtype=complex)
    for a in range(K + 1):
        for b in range(K + 1):
            out[a * Nt : (a + 1) * Nt, b * Nt : (b + 1) * Nt] = correlation_lag(
                U, a - b
            ).T
    return out


# ---------------------------------------------------------------------------
# Covariance constructors
# ---------------------------------------------------------------------------


def siso_exp_covariance(size: int, rho: float, decay: float) -> np.ndarray:
    """Exponentially correlated taps with exponentially decaying power.

    Entry (i, j), 1-based, is rho^|i-j| * decay^((i-1)/2) * decay^((j-1)/2).
    """
    if not (0.0 <= rho < 1.0):
        raise InvalidArgumentError("rho must lie in [0, 1)")
    if not (0.0 < decay <= 1.0):
        raise InvalidArgumentError("decay must lie in (0, 1]")
    idx = np.arange(size)
    base = rho ** np.abs(idx[:, None] - idx[None, :])
    d = decay ** (idx / 2.0)
    return base * d[:, None] * d[None, :]


def toeplitz_noise_covariance(size: int, rho: float) -> np.ndarray:
    """Toeplitz covariance with entry rho^|i-j|; positive definite for |rho| < 1."""
    if not (0.0 <= rho < 1.0):
        raise InvalidArgumentError("rho must lie in [0, 1)")
    idx = np.arange(size)
    return np.asarray(rho ** np.abs(idx[:, None] - idx[None, :]), dtype=float)


def kron3_covariance(Rr: np.ndarray, Rd: np.ndarray, Rt: np.ndarray) -> np.ndarray:
    """Separable channel covariance R_receive (x) R_delay (x) R_transmit."""
    return np.kron(np.kron(np.asarray(Rr), np.asarray(Rd)), np.asarray(Rt))


# ---------------------------------------------------------------------------
# Sampling and SNR
# ---------------------------------------------------------------------------


def sample_complex_gaussian(
    mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One draw of a circular complex Gaussian vector.

    The latent vector has independent entries with real and imaginary
    parts of variance 1/2 each, colored by a Cholesky-like factor of the
    covariance. Deterministic for a given generator state.
    """
    mean = np.asarray(mean, dtype=complex).reshape(-1)
    cov = np.asarray(cov, dtype=complex)
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise InvalidArgumentError("mean and covariance dimensions disagree")
    if not cov.any():
        return mean.copy()
    L = chol_psd(cov, "sampling covariance")
    n = mean.shape[0]
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(0.5)
    return mean + L @ z


def snr_db_of(config: SequenceConfig, noise: NoiseModel) -> float:
    """Signal-to-noise ratio in dB implied by the energy budget and noise.

    Ratio of average per-sample signal power alpha/(N*Nt) to average
    per-sample noise power Tr(W)/((N+K)*Nr).
    """
    signal = config.alpha / (config.N * config.Nt)
    noise_power = float(np.real(np.trace(noise.W))) / config.received_dim
    return 10.0 * math.log10(signal / noise_power)


def scale_noise_for_snr(
    config: SequenceConfig, W_base: np.ndarray, snr_db: float
) -> NoiseModel:
    """Rescale a base noise covariance so the scenario sits at the requested SNR.

    The sequence energy is never touched; only the noise floor moves.
    """
    W_base = np.asarray(W_base, dtype=complex)
    base_trace = float(np.real(np.trace(W_base)))
    if base_trace <= 0:
        raise InvalidArgumentError("base noise covariance must have positive trace")
    signal = config.alpha / (config.N * config.Nt)
    target_noise_power = signal * 10.0 ** (-snr_db / 10.0)
    c = target_noise_power * config.received_dim / base_trace
    return NoiseModel(W=c * W_base)


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------


def _complex_vector(data, what: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(
            f"{what} must be a list of [re, im] pairs"
        ) from exc
    return arr[:, 0] + 1j * arr[:, 1]


def _complex_matrix(data, what: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(
            f"{what} must be a row-major matrix of [re, im] pairs"
        ) from exc
    return arr[:, :, 0] + 1j * arr[:, :, 1]


def _build_prior(spec: dict, config: SequenceConfig, what: str) -> ChannelPrior:
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidArgumentError(f"{what} must be an object with a 'type' key")
    kind = spec["type"]
    params = spec.get("parameters", {})
    dim = config.channel_dim
    if kind == "siso_exp":
        if config.Nt != 1 or config.Nr != 1:
            raise InvalidArgumentError(
                f"{what}: siso_exp requires Nt = Nr = 1 (got Nt={config.Nt}, Nr={config.Nr})"
            )
        R = siso_exp_covariance(dim, float(params["rho"]), float(params["decay"]))
    elif kind == "kron3":
        Rr = toeplitz_noise_covariance(config.Nr, float(params["rho_r"]))
        Rd = toeplitz_noise_covariance(config.K + 1, float(params["rho_d"]))
        Rt = toeplitz_noise_covariance(config.Nt, float(params["rho_t"]))
        R = kron3_covariance(Rr, Rd, Rt)
    elif kind == "explicit":
        R = _complex_matrix(params["matrix"], f"{what}.parameters.matrix")
        if R.shape != (dim, dim):
            raise InvalidArgumentError(
                f"{what}: explicit matrix is {R.shape}, expected ({dim}, {dim})"
            )
    else:
        raise InvalidArgumentError(f"{what}: unknown type {kind!r}")
    if "mean" in params:
        mean = _complex_vector(params["mean"], f"{what}.parameters.mean")
    else:
        mean = np.zeros(dim, dtype=complex)
    return ChannelPrior(h0=mean, R0=R)


def _build_noise(spec: dict, config: SequenceConfig) -> NoiseModel:
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidArgumentError("noise must be an object with a 'type' key")
    kind = spec["type"]
    params = spec.get("parameters", {})
    dim = config.received_dim
    if kind == "toeplitz":
        rho = float(params["rho"] if "rho" in params else spec["rho"])
        W = toeplitz_noise_covariance(dim, rho)
    elif kind == "explicit":
        W = _complex_matrix(params["matrix"], "noise.parameters.matrix")
        if W.shape != (dim, dim):
            raise InvalidArgumentError(
                f"noise: explicit matrix is {W.shape}, expected ({dim}, {dim})"
            )
    else:
        raise InvalidArgumentError(f"noise: unknown type {kind!r}")
    return NoiseModel(W=W)


def scenario_from_json(doc: dict) -> Scenario:
    """Build a Scenario from its JSON document (already parsed to a dict)."""
    if not isinstance(doc, dict):
        raise InvalidArgumentError("scenario document must be a JSON object")
    try:
        N = int(doc["N"])
        Nt = int(doc["Nt"])
        Nr = int(doc["Nr"])
        K = int(doc["K"])
    except KeyError as exc:
        raise InvalidArgumentError(f"scenario is missing key {exc.args[0]!r}") from exc
    alpha = float(doc.get("alpha", N * Nt))
    if "antenna_energy_proportions" in doc:
        props = [float(p) for p in doc["antenna_energy_proportions"]]
        if len(props) != Nt or any(p <= 0 for p in props):
            raise InvalidArgumentError(
                "antenna_energy_proportions needs Nt positive entries"
            )
        total = sum(props)
        energies = tuple(alpha * p / total for p in props)
    else:
        energies = tuple([alpha / Nt] * Nt)
    if "par_limits" in doc:
        par_limits = tuple(float(x) for x in doc["par_limits"])
    else:
        par_limits = tuple([1.0] * Nt)
    config = SequenceConfig(
        N=N,
        Nt=Nt,
        Nr=Nr,
        K=K,
        alpha=alpha,
        antenna_energies=energies,
        par_limits=par_limits,
    )
    if "prior" not in doc or "noise" not in doc:
        raise InvalidArgumentError("scenario must define 'prior' and 'noise'")
    prior = _build_prior(doc["prior"], config, "prior")
    noise = _build_noise(doc["noise"], config)
    truth = _build_prior(doc["truth"], config, "truth") if "truth" in doc else None
    return Scenario(config=config, prior=prior, noise=noise, truth=truth)


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON file from disk."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_json(doc)
