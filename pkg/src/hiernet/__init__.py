"""Simulation and statistical inference for interacting reinforced stochastic
processes on hierarchical (block upper-triangular) directed networks."""

from .model import (
    HierarchicalNetwork,
    NetworkValidationError,
    StepSizeSchedule,
    irreducibility_check,
    load_config,
    step_size,
    validate_network,
)
from .spectral import (
    Regime,
    SpectralDecomposition,
    build_example1,
    build_example2,
    build_sim_network,
    classify_regime,
    from_user_spectral,
    pairwise_projection,
    spectral_from_json,
    spectral_to_json,
)
from .simulate import (
    ProcessState,
    ProjectedSeries,
    Trajectory,
    initial_state,
    project,
    run_trajectory,
    spread,
    step,
    trajectory_to_csv,
)
from .asymptotics import (
    CovarianceReport,
    RegimeError,
    assemble_joint,
    covariance_report,
    gamma_hat_sq,
    limit_sum_analytic,
    limit_sum_oracle,
    pairwise_sync_cov,
    s_gamma,
    s_nn,
    s_starred,
    s_zn,
    s_zz,
    sigma_tilde_sq,
)
from .inference import (
    ConfidenceInterval,
    TestOutcome,
    chi2_quantile,
    chi2_tail,
    ci_z_infinity,
    confidence_region,
    normal_quantile,
    pseudo_inverse,
    test_statistic,
)
from .montecarlo import (
    EnsembleConfig,
    EnsembleSummary,
    InitialCondition,
    calibration_run,
    clt_check,
    coupling_check,
    density_report,
    run_ensemble,
    table1,
)

__version__ = "0.1.0"
