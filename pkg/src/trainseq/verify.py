"""Self-contained invariant suites behind the `verify` CLI subcommand.

Each suite draws its own seeded instances, checks one family of
identities, and reports pass/fail with the worst observed deviation.
These overlap with the test suite on purpose: they run without pytest in
deployed environments.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from . import criteria, harness, mm_core, par_projection, squarem
from .criteria import Criterion
from .model import (
    ChannelPrior,
    NoiseModel,
    Scenario,
    SequenceConfig,
    Sequence,
    adjoint_sum,
    correlation_block_matrix,
    kron3_covariance,
    lift,
    sample_complex_gaussian,
    scale_noise_for_snr,
    siso_exp_covariance,
    snr_db_of,
    toeplitz_lift,
    toeplitz_noise_covariance,
)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _random_psd(rng, n, ridge=0.2):
    G = _random_complex(rng, (n, n))
    return G @ G.conj().T / n + ridge * np.eye(n)


def _random_scenario(rng, N=6, Nt=2, Nr=2, K=3) -> Scenario:
    cfg = SequenceConfig.unimodular(N=N, Nt=Nt, Nr=Nr, K=K)
    prior = ChannelPrior(
        h0=np.zeros(cfg.channel_dim), R0=_random_psd(rng, cfg.channel_dim)
    )
    noise = NoiseModel(W=_random_psd(rng, cfg.received_dim, ridge=0.4))
    return Scenario(config=cfg, prior=prior, noise=noise)


def _random_unimodular(cfg: SequenceConfig, rng) -> Sequence:
    return Sequence(
        U=cfg.unimodular_magnitude * np.exp(2j * np.pi * rng.random((cfg.N, cfg.Nt)))
    )


def check_lift_identities(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        N, Nt, Nr, K = rng.integers(2, 8), rng.integers(1, 4), rng.integers(1, 4), rng.integers(0, 5)
        cfg = SequenceConfig.unimodular(N=int(N), Nt=int(Nt), Nr=int(Nr), K=int(K))
        U = _random_complex(rng, (cfg.N, cfg.Nt))
        S = toeplitz_lift(U, cfg.K)
        lhs = np.trace(S.conj().T @ S)
        rhs = (cfg.K + 1) * np.trace(U.conj().T @ U)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
        B = _random_complex(rng, (cfg.received_dim, cfg.channel_dim))
        a = np.real(np.trace(B.conj().T @ lift(U, cfg.K, cfg.Nr)))
        b = np.real(np.trace(adjoint_sum(B, cfg).conj().T @ U))
        worst = max(worst, abs(a - b) / max(abs(a), 1.0))
    return CheckResult("lift energy + adjoint identity", worst <= 1e-10,
                       f"worst relative error {worst:.2e}")


def check_correlation_layout(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        U = _random_complex(rng, (7, 3))
        K = int(rng.integers(0, 5))
        S = toeplitz_lift(U, K)
        worst = max(
            worst,
            float(np.max(np.abs(S.conj().T @ S - correlation_block_matrix(U, K)))),
        )
    return CheckResult("correlation block layout", worst <= 1e-12,
                       f"worst entry deviation {worst:.2e}")


def check_covariance_constructors(seed: int) -> CheckResult:
    R = siso_exp_covariance(20, 0.9, 0.9)
    W = toeplitz_noise_covariance(29, 0.2)
    Kr = kron3_covariance(
        toeplitz_noise_covariance(3, 0.9),
        toeplitz_noise_covariance(20, 0.7),
        toeplitz_noise_covariance(3, 0.9),
    )
    ok = True
    details = []
    for name, Mx in (("siso_exp", R), ("toeplitz", W), ("kron3", Kr)):
        herm = float(np.max(np.abs(Mx - Mx.conj().T)))
        min_eig = float(np.min(np.linalg.eigvalsh(Mx)))
        floor = -1e-10 * float(np.real(np.trace(Mx))) / Mx.shape[0]
        if herm > 1e-12 or min_eig < floor:
            ok = False
            details.append(f"{name}: herm={herm:.1e} min_eig={min_eig:.1e}")
    np.linalg.cholesky(W)
    return CheckResult("covariance constructors Hermitian PSD", ok,
                       "; ".join(details) or "all within tolerance")


def check_sampling_determinism(seed: int) -> CheckResult:
    cov = siso_exp_covariance(10, 0.8, 0.8)
    mean = np.zeros(10)
    a = sample_complex_gaussian(mean, cov, np.random.default_rng(seed))
    b = sample_complex_gaussian(mean, cov, np.random.default_rng(seed))
    ok = np.array_equal(a, b)
    return CheckResult("sampling determinism", ok, "bitwise equal" if ok else "mismatch")


def check_criteria_equivalences(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        n, m = 8, 5
        S = _random_complex(rng, (n, m))
        prior = ChannelPrior(h0=np.zeros(m), R0=_random_psd(rng, m))
        noise = NoiseModel(W=_random_psd(rng, n, ridge=0.4))
        R = criteria.error_covariance(S, prior, noise).R
        R_mil = np.linalg.inv(
            np.linalg.inv(prior.R0) + S.conj().T @ np.linalg.inv(noise.W) @ S
        )
        worst = max(worst, float(np.max(np.abs(R - R_mil)) / np.max(np.abs(R_mil))))
        cmi_a = criteria.cmi_objective(S, prior, noise)
        cmi_b = 0.5 * np.linalg.slogdet(prior.R0 @ np.linalg.inv(R))[1]
        worst = max(worst, abs(cmi_a - cmi_b) / max(abs(cmi_b), 1.0))
    return CheckResult("error-covariance and information two-form equivalence",
                       worst <= 1e-8, f"worst relative error {worst:.2e}")


def check_lambda_bound(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(10):
        n, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        R0 = _random_psd(rng, n)
        A = _random_complex(rng, (m, n))
        V = _random_psd(rng, n)
        lam = mm_core.lambda_bound(R0, A, V)
        Z = A @ V @ A.conj().T
        lam_exact = float(np.max(np.linalg.eigvalsh(np.kron(R0.T, Z))))
        if lam < lam_exact * (1 - 1e-12):
            violations += 1
    return CheckResult("curvature bound dominates exact eigenvalue",
                       violations == 0, f"{violations} violations")


def check_projections(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    ok = True
    details = []
    for _ in range(20):
        C = _random_complex(rng, (6, 2))
        P = mm_core.project_unimodular(C, 1.5)
        if np.max(np.abs(np.abs(P) - 1.5)) > 1e-12:
            ok = False
            details.append("unimodular magnitude drift")
        spec = par_projection.ParSpec(alpha_m=4.0, xi_m=2.5, N=6)
        u = par_projection.project_par(C[:, 0], spec)
        energy = float(np.sum(np.abs(u) ** 2))
        if abs(energy - spec.alpha_m) > 1e-9 * spec.alpha_m:
            ok = False
            details.append(f"energy {energy}")
        if np.max(np.abs(u)) > spec.peak * (1 + 1e-12):
            ok = False
            details.append("peak exceeded")
    return CheckResult("projection feasibility", ok, "; ".join(details) or "feasible")


def check_monotone_solves(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    scenario = _random_scenario(rng)
    init = _random_unimodular(scenario.config, rng)
    ok = True
    details = []
    for criterion in (Criterion.MMSE, Criterion.CMI):
        _, trace = mm_core.solve(
            scenario, criterion, init, mm_core.SolveOptions(tol=1e-8, max_iters=200)
        )
        obj = np.asarray(trace.objectives)
        slack = 1e-10 * np.maximum(1.0, np.abs(obj[:-1]))
        diffs = np.diff(obj)
        mono = np.all(diffs <= slack) if criterion is Criterion.MMSE else np.all(diffs >= -slack)
        if not mono:
            ok = False
            details.append(f"{criterion.value} trace not monotone")
        _, atrace = squarem.solve_accelerated(
            scenario, criterion, init, squarem.AccelOptions(tol=1e-8, max_iters=200)
        )
        aobj = np.asarray(atrace.objectives)
        aslack = 1e-10 * np.maximum(1.0, np.abs(aobj[:-1]))
        adiffs = np.diff(aobj)
        amono = np.all(adiffs <= aslack) if criterion is Criterion.MMSE else np.all(adiffs >= -aslack)
        if not amono:
            ok = False
            details.append(f"{criterion.value} accelerated trace not monotone")
    return CheckResult("monotone objective traces", ok, "; ".join(details) or "monotone")


def check_snr_round_trip(seed: int) -> CheckResult:
    cfg = SequenceConfig.unimodular(N=10, Nt=1, Nr=1, K=19)
    W_base = toeplitz_noise_covariance(cfg.received_dim, 0.2)
    worst = 0.0
    for snr in (-10.0, -5.0, 0.0, 7.5):
        noise = scale_noise_for_snr(cfg, W_base, snr)
        worst = max(worst, abs(snr_db_of(cfg, noise) - snr))
    return CheckResult("noise scaling round trip", worst <= 1e-9,
                       f"worst dB error {worst:.2e}")


ALL_CHECKS: list[Callable[[int], CheckResult]] = [
    check_lift_identities,
    check_correlation_layout,
    check_covariance_constructors,
    check_sampling_determinism,
    check_criteria_equivalences,
    check_lambda_bound,
    check_projections,
    check_monotone_solves,
    check_snr_round_trip,
]


def run_all(seed: int = 20_240_901) -> list[CheckResult]:
    return [check(seed) for check in ALL_CHECKS]
