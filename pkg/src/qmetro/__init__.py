"""Quantum Fisher information and sub shot-noise phase estimation with multiqubit probes."""
from .errors import (
    ConfigError,
    EstimationError,
    FitError,
    FormatError,
    InconsistencyError,
    ParameterError,
    QMetroError,
    ValidationError,
)
from .estimation import (
    BayesPosterior,
    CampaignReport,
    LikelihoodTable,
    MlEstimate,
    OutcomeSample,
    bayes_campaign,
    bayes_posterior,
    bias_corrected_crlb,
    crlb,
    ml_campaign,
    ml_estimate,
    rescaled_limits,
    sample_outcomes,
)
from .interferometer import (
    CalibrationData,
    MeasurementModel,
    NoiseModel,
    ProbabilityModel,
    apply_noise,
    cond_prob,
    fisher_information,
    fit_calibration,
    prob_derivative,
    probability_model,
    projectors,
    simulate_calibration,
)
from .qfi import (
    DepthClassification,
    QfiResult,
    classify_depth,
    optimize_axes,
    producibility_bound,
    qfi,
    qfi_pure,
    witness_value,
)
from .states import (
    CollectiveGenerator,
    LocalAxis,
    PureState,
    QuantumState,
    collective_generator,
    dicke,
    evolve,
    fidelity,
    ghz,
    product,
    state_factory,
)

__version__ = "0.1.0"
