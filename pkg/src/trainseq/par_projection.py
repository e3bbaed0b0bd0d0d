"""Per-antenna projection under energy + peak constraints, and the MM solver
for low peak-to-average power ratio design built on the same surrogate.

The projection solves: minimize ||u - c||^2 subject to ||u||^2 = energy and
max |u_n| <= peak. Phases copy c entrywise; magnitudes are min(beta*|c_n|,
peak) with beta fixed by the energy constraint, located exactly by scanning
the sorted breakpoints where successive entries hit the ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .criteria import Criterion
from .errors import InvalidArgumentError
from .mm_core import (
    SolveOptions,
    SolveTrace,
    StepEngine,
    project_unimodular,
    run_mm_loop,
)
from .model import Scenario, Sequence, SequenceConfig


@dataclass(frozen=True)
class ParSpec:
    """Energy and peak budget of one antenna's length-N sequence."""

    alpha_m: float
    xi_m: float
    N: int

    def __post_init__(self):
        if not self.alpha_m > 0:
            raise InvalidArgumentError("antenna energy must be positive")
        if not (1.0 <= self.xi_m <= self.N):
            raise InvalidArgumentError(
                f"PAR bound {self.xi_m!r} must lie in [1, N={self.N}]"
            )

    @property
    def peak(self) -> float:
        """Amplitude ceiling sqrt(alpha_m * xi_m / N)."""
        return math.sqrt(self.alpha_m * self.xi_m / self.N)


def par_specs(config: SequenceConfig) -> list[ParSpec]:
    """One ParSpec per transmit antenna of a configuration."""
    return [
        ParSpec(alpha_m=am, xi_m=xi, N=config.N)
        for am, xi in zip(config.antenna_energies, config.par_limits)
    ]


def project_par(c: np.ndarray, spec: ParSpec) -> np.ndarray:
    """Nearest vector to c with exact energy and a per-sample amplitude cap.

    A PAR bound of 1 collapses to the constant-modulus projection. When c
    has too little mass outside its zeros to reach the energy target even
    with every nonzero entry clipped, the leftover energy spreads equally
    over the zero positions (always representable under the cap because
    N * peak^2 >= energy).
    """
    c = np.asarray(c, dtype=complex).reshape(-1)
    if c.shape[0] != spec.N:
        raise InvalidArgumentError(f"vector length {c.shape[0]} != N={spec.N}")
    if spec.xi_m == 1.0:
        return project_unimodular(c, math.sqrt(spec.alpha_m / spec.N)).reshape(-1)

    peak = spec.peak
    target = spec.alpha_m
    mags = np.abs(c)
    phases = np.exp(1j * np.angle(c))
    phases[c == 0] = 1.0

    if not mags.any():
        return np.full(spec.N, math.sqrt(target / spec.N), dtype=complex)

    order = np.argsort(-mags, kind="stable")
    sorted_mags = mags[order]
    p = int(np.count_nonzero(sorted_mags))
    # tail_sq[k] = sum of squared magnitudes of the unclipped entries when
    # the k largest are clipped at the ceiling
    sq = sorted_mags**2
    tail_sq = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])

    amp_sorted = None
    for k in range(p + 1):
        remaining = target - k * peak**2
        if remaining < -1e-12 * target:
            break
        if tail_sq[k] <= 0.0:
            continue
        beta = math.sqrt(max(remaining, 0.0) / tail_sq[k])
        lo = peak / sorted_mags[k - 1] if k >= 1 else 0.0
        hi = peak / sorted_mags[k] if k < p else math.inf
        if lo * (1.0 - 1e-12) <= beta <= hi * (1.0 + 1e-12):
            amp_sorted = np.minimum(beta * sorted_mags, peak)
            break

    if amp_sorted is None:
        # every nonzero entry rides the ceiling; park the leftover energy
        # on the zero entries
        amp_sorted = np.where(sorted_mags > 0, peak, 0.0)
        residual = target - p * peak**2
        if residual > 0:
            n_zero = spec.N - p
            amp_sorted[p:] = math.sqrt(residual / n_zero)

    amplitudes = np.empty(spec.N)
    amplitudes[order] = amp_sorted
    return phases * amplitudes


def project_par_columns(C: np.ndarray, config: SequenceConfig) -> np.ndarray:
    """Column-wise PAR projection of an N x Nt matrix."""
    C = np.asarray(C, dtype=complex)
    out = np.empty_like(C)
    for m, spec in enumerate(par_specs(config)):
        out[:, m] = project_par(C[:, m], spec)
    return out


def par_engine(scenario: Scenario, criterion: Criterion) -> StepEngine:
    """Step engine whose closing projection is the column-wise PAR one.

    The surrogate pipeline is the constant-modulus one verbatim; only the
    projection changes.
    """
    cfg = scenario.config
    return StepEngine(
        scenario, criterion, project=lambda C: project_par_columns(C, cfg)
    )


def mm_update_par(U: np.ndarray, scenario: Scenario, criterion: Criterion) -> np.ndarray:
    """One MM step with the per-antenna energy + peak feasible set."""
    return par_engine(scenario, criterion).update(np.asarray(U, dtype=complex))


def solve_par(
    scenario: Scenario,
    criterion: Criterion,
    init: Sequence,
    opts: Optional[SolveOptions] = None,
) -> tuple[Sequence, SolveTrace]:
    """MM iteration over the low-PAR feasible set; mirrors the unimodular solve."""
    opts = opts or SolveOptions()
    init.validate_par(scenario.config)
    U, trace = run_mm_loop(par_engine(scenario, criterion), init.U, opts)
    return Sequence(U=U), trace
