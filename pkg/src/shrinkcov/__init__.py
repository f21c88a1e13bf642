"""Regularized Tyler-type shrinkage covariance estimation and its large-dimensional limits."""

from .measure import (
    PopulationModel,
    SpectralMeasure,
    ar_toeplitz,
    explicit_model,
    identity_model,
    model_from_json,
    model_to_json,
    moment,
    spectral_measure,
    two_atom,
)
from .sampling import SampleSet, TauLaw, constant_tau, inverse_gamma_tau, log_normal_tau, sample
from .estimators import (
    CovEstimate,
    EstimatorConvergenceError,
    SolverConfig,
    abramovich_pascal,
    chen,
    clairvoyant,
    linear_combine,
    loss_check,
    loss_hat,
    minimize_loss,
)
from .asymptotics import (
    AsymptoticParams,
    ShrinkageTheory,
    big_F,
    f_check,
    f_check_inverse,
    f_hat,
    f_hat_inverse,
    first_moment_hat,
    gamma_check,
    gamma_hat,
    hat_lower_bound,
    rho_star_dstar,
    s_check_equivalent,
    s_hat_equivalent,
)
from .spectrum import (
    DeltaConvergenceError,
    DensityCurve,
    StieltjesEval,
    density_curve,
    limit_moment,
    stieltjes,
    support_window,
)
from .shrinkage import (
    DegenerateTraceError,
    ShrinkageSelection,
    plug_in_rhs,
    select_rho_check,
    select_rho_hat,
)
from .sweep import SweepConfig, SweepResult, SweepRow, run_sweep, trial_seed

__version__ = "0.1.0"
