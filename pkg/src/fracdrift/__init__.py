"""fracdrift: drift estimation for SDEs driven by fractional Brownian motion.

Simulates ensembles of additive-noise fractional SDE paths and estimates
the drift function nonparametrically: a projection estimator defined
through Skorokhod integrals is made computable by a fixed-point iteration
on its pathwise representation, with certification events guarding the
contraction regime, plus a Monte Carlo risk harness and CLI.
"""

from .basis import (
    C1Function,
    CoefficientVector,
    IntervalSupport,
    TrigBasis,
    basis_constants,
    project_function,
    trig_basis,
)
from .estimator import (
    DensityModel,
    DensityProjectionEstimator,
    EstimateResult,
    EstimatorConfig,
    FixedPointDriftEstimator,
    OracleDriftEstimator,
    F_m_apply,
    F_m_jacobian,
    delta_event_check,
    density_projection,
    fixed_point_solve,
    oracle_hat_b,
    pathwise_coefficients,
    phi_m_step,
    phi_m_step_with_drift,
    practical_estimate,
    weighted_l2_error,
)
from .fbm import (
    CholeskySampler,
    CirculantSampler,
    EmbeddingError,
    FactorizationError,
    GaussianPath,
    TimeGrid,
    fbm_covariance,
    sample_fbm,
    sample_fbm_cholesky,
    sample_fbm_circulant,
)
from .harness import ExperimentConfig, RiskRow, risk_sweep, run_estimate, v_rate
from .integrals import (
    ExponentOverflowError,
    KernelGrid,
    exp_weighted_correction,
    kernel_double_integral,
    skorokhod_integral,
    variance_bound_skorokhod,
    young_integral,
)
from .sde import (
    BlowUpError,
    DriftSpec,
    SdeConfig,
    SdeEnsemble,
    SdePath,
    burn_in_stationary,
    euler_solve,
    fou_stationary_density,
    fou_stationary_variance,
    get_drift,
    linear_drift,
    linear_plus_sine_drift,
    load_ensemble,
    save_ensemble,
    simulate_ensemble,
)

__version__ = "0.1.0"
