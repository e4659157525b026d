"""Invariant measures of class-C two-state probabilistic cellular automata via duality."""

__version__ = "0.1.0"

from .analysis import (
    CorrelationPoint,
    DecayConstants,
    DobrushinReport,
    correlation_curve,
    curve_csv,
    decay_constants,
    dobrushin_report,
)
from .cylinder import CylinderCombination, Pattern, couple, decompose, measure
from .dual import (
    SINK,
    AutoProvider,
    ClosedFormProvider,
    DualKernel,
    ExactProvider,
    MeasureEstimate,
    MonteCarloProvider,
    PointMass,
    SiteSet,
    absorption_runs,
    closed_form_measure,
    dual_kernel,
    mu_hat_exact,
    mu_hat_mc,
    step_dual,
    step_extended,
)
from .errors import (
    CertificationError,
    ConfigurationError,
    DegenerateModelError,
    ParseError,
    PreconditionError,
    ResourceError,
)
from .lattice import FrequencyEstimate, Torus, estimate_frequency, step_pca
from .model import (
    ClassReport,
    LambdaTable,
    Neighborhood,
    TransitionTable,
    binomial2d,
    build_neighborhood,
    check_class,
    constant_table,
    dobrushin_gamma,
    domany_kinzel,
    mobius_lambda,
)
from .modelfile import ModelFile, load_model, parse_model
from .rng import CounterStream

__all__ = [
    "absorption_runs",
    "AutoProvider",
    "binomial2d",
    "build_neighborhood",
    "CertificationError",
    "check_class",
    "ClassReport",
    "closed_form_measure",
    "ClosedFormProvider",
    "ConfigurationError",
    "constant_table",
    "correlation_curve",
    "CorrelationPoint",
    "CounterStream",
    "couple",
    "curve_csv",
    "CylinderCombination",
    "decay_constants",
    "DecayConstants",
    "decompose",
    "DegenerateModelError",
    "dobrushin_gamma",
    "dobrushin_report",
    "DobrushinReport",
    "domany_kinzel",
    "dual_kernel",
    "DualKernel",
    "estimate_frequency",
    "ExactProvider",
    "FrequencyEstimate",
    "LambdaTable",
    "load_model",
    "measure",
    "MeasureEstimate",
    "mobius_lambda",
    "ModelFile",
    "MonteCarloProvider",
    "mu_hat_exact",
    "mu_hat_mc",
    "Neighborhood",
    "parse_model",
    "ParseError",
    "Pattern",
    "PointMass",
    "PreconditionError",
    "ResourceError",
    "SINK",
    "SiteSet",
    "step_dual",
    "step_extended",
    "step_pca",
    "Torus",
    "TransitionTable",
]
