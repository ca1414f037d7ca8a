"""Adaptive Kalman filtering with online innovations whitening.

A state-estimation library for plants driven by colored process noise.  A
second-order shaping filter is appended to the plant state so a standard KF
can treat the combined system as white-noise driven; when the shaping
dynamics are unknown, the adaptive filter learns them online by minimizing
the empirical autocorrelation of the innovations.
"""

from .errors import (
    DimensionMismatch,
    InsufficientData,
    IwakfError,
    NoConvergence,
    PoleEvaluation,
    RankDeficient,
    SingularInnovationCovariance,
    UnstableClosedLoop,
    UnstableFilter,
)
from .adapt import (
    AdaptationConfig,
    AdaptationState,
    adapt_run,
    adapt_step,
    init_adaptation,
)
from .kalman import FilterState, StepRecord, assimilate, forecast, kf_step, steady_state
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    AugmentedSystem,
    ColoringFilter,
    LtiSystem,
    NoiseSpec,
    augment,
    discretize_pendulum,
    driving_variance,
    evaluate_transfer,
    filter_from_poles_zero,
    make_coloring_filter,
    shaping_filter,
    spectral_radius,
)
from .whiteness import (
    AutocorrEstimate,
    InnovationsLog,
    PsdCurve,
    empirical_autocorrelation,
    innovations_psd_theoretical,
    recover_phi_v,
    welch_psd,
    whiteness_bound,
    whiteness_cost,
)
from .sim import (
    ExperimentConfig,
    ExperimentResult,
    TrialResult,
    generate_colored_noise,
    rmse,
    run_experiment,
    simulate_truth,
)

__version__ = "0.1.0"
