"""Loss-based performance of a prediction model in a shifted target
population.

Given data from a source population with observed outcomes and a
target population with covariates only, this package estimates the
target-population mean loss (risk) of an externally fitted prediction
model. It provides conditional-loss, inverse-odds-weighting, and
doubly robust estimators (with survey-weighted variants), influence-
function and bootstrap uncertainty, cross-fitting, and a Monte Carlo
benchmark harness. The ``shiftrisk`` console script exposes the same
functionality over CSV files.
"""

from .core import (
    ABSOLUTE,
    Dataset,
    LOSSES,
    LoadedData,
    PredictionModel,
    SQUARED,
    Violation,
    expit,
    loss_eval,
    read_dataset_csv,
    require_valid,
    select_model_inputs,
    validate_dataset,
)
from .errors import (
    BootstrapError,
    DataValidationError,
    FitError,
    FoldError,
    InvalidArgumentError,
    NuisanceMissingError,
    OracleUnavailableError,
    PositivityError,
    ReplicationError,
    SchemaError,
    SeparationError,
    ShiftRiskError,
    SingularDesignError,
)
from .estimators import (
    CL,
    DR,
    ESTIMATORS,
    EstimateReport,
    IW,
    NAIVE,
    ORACLE,
    estimate,
    estimate_cl,
    estimate_dr,
    estimate_iw,
    estimate_naive,
    estimate_oracle,
    estimate_risk,
    losses_from_predictions,
)
from .inference import (
    BootstrapPlan,
    BootstrapResult,
    InfluenceValues,
    bootstrap,
    eif_values,
    sandwich_se,
)
from .nuisance import (
    BINARY,
    DIRECT,
    DesignInfo,
    FEATURE_MAPS,
    FittedLogisticModel,
    LINEAR,
    LogisticFit,
    NuisanceConfig,
    NuisanceEstimates,
    QUADRATIC,
    SPLINE,
    assign_folds,
    bspline_basis,
    build_design,
    design_info,
    estimate_nuisances,
    fit_h,
    fit_logistic_irls,
    fit_p,
    fit_prediction_model,
    h_from_outcome_prob,
)
from .rng import stream
from .simulation import (
    ARM_LABELS,
    ARMS,
    ReplicationSummary,
    ScenarioSpec,
    SimulationResult,
    SplitEvalResult,
    ar1_covariance,
    compute_truth,
    dgp_draw,
    run_split_eval,
    run_table_s1,
    sample_mvn,
    semi_synthetic_split,
    summarize,
    true_prob,
)

__all__ = [name for name in dir() if not name.startswith("_")]
