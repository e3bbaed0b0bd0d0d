"""Training sequence design for MIMO channel estimation.

Designs unimodular and low peak-to-average power ratio training matrices
by majorization-minimization under the mean-square-error and mutual
information criteria, with squared-extrapolation acceleration and a
seeded Monte Carlo evaluation harness.
"""

from .criteria import (
    Criterion,
    ErrorCovariance,
    cmi_eval_true,
    cmi_objective,
    error_covariance,
    ml_error,
    ml_estimate,
    mmse_estimate,
    mmse_objective,
    weighted_corr_objective,
)
from .errors import (
    InvalidArgumentError,
    NumericFailureError,
    SingularModelError,
    TrainSeqError,
)
from .harness import (
    ExperimentPlan,
    SweepResult,
    SweepRow,
    baseline_random_phase,
    run_trial,
    sweep,
)
from .mm_core import (
    MMState,
    SolveOptions,
    SolveTrace,
    mm_update,
    project_unimodular,
    solve,
)
from .model import (
    ChannelPrior,
    NoiseModel,
    Scenario,
    Sequence,
    SequenceConfig,
    adjoint_sum,
    correlation_lag,
    kron3_covariance,
    kron_lift,
    lift,
    load_scenario,
    sample_complex_gaussian,
    scale_noise_for_snr,
    scenario_from_json,
    siso_exp_covariance,
    snr_db_of,
    toeplitz_lift,
    toeplitz_noise_covariance,
)
from .par_projection import ParSpec, mm_update_par, project_par, solve_par
from .squarem import AccelOptions, accelerate, solve_accelerated

__version__ = "0.1.0"

__all__ = [
    "AccelOptions",
    "ChannelPrior",
    "Criterion",
    "ErrorCovariance",
    "ExperimentPlan",
    "InvalidArgumentError",
    "MMState",
    "NoiseModel",
    "NumericFailureError",
    "ParSpec",
    "Scenario",
    "Sequence",
    "SequenceConfig",
    "SingularModelError",
    "SolveOptions",
    "SolveTrace",
    "SweepResult",
    "SweepRow",
    "TrainSeqError",
    "accelerate",
    "adjoint_sum",
    "baseline_random_phase",
    "cmi_eval_true",
    "cmi_objective",
    "correlation_lag",
    "error_covariance",
    "kron3_covariance",
    "kron_lift",
    "lift",
    "load_scenario",
    "ml_error",
    "ml_estimate",
    "mm_update",
    "mm_update_par",
    "mmse_estimate",
    "mmse_objective",
    "project_par",
    "project_unimodular",
    "run_trial",
    "sample_complex_gaussian",
    "scale_noise_for_snr",
    "scenario_from_json",
    "siso_exp_covariance",
    "snr_db_of",
    "solve",
    "solve_accelerated",
    "solve_par",
    "sweep",
    "toeplitz_lift",
    "toeplitz_noise_covariance",
    "weighted_corr_objective",
]
