"""Model fitting for two-block missing-data mechanisms.

Estimation for bivariate categorical data observed as a complete-case table
plus supplemental margins, under missingness mechanisms where the second
variable's missingness may depend on the (possibly missing) first variable:
closed-form factored estimation with feasibility checking, EM for full
maximum likelihood in three mechanism variants, reduced-likelihood fits,
likelihood-ratio tests, bootstrap standard errors, a categorical-by-
exponential-family extension, and mechanism simulators.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .em import (
    EmConfig,
    EmState,
    e_step_allocations,
    em_restricted,
    em_restricted_mar,
    em_unrestricted,
    fit_table,
    reduced_fit,
)
from .errors import (
    BcmarError,
    BootstrapFailureError,
    DegenerateLikelihoodError,
    DimensionMismatchError,
    InvalidProbabilityError,
    NegativeCountError,
    NotNestedError,
    SingularInformationError,
    TableValidationError,
    UndefinedConditionalError,
    ZeroTotalError,
)
from .factored import (
    FeasibilityResult,
    FeasibilityStatus,
    closed_form_mechanism,
    closed_form_theta,
    fit_unrestricted_closed_form,
    pattern_mixture_mle,
    solve_phi1,
)
from .inference import (
    BootstrapResult,
    LrtResult,
    bootstrap_se,
    lrt,
    reduced_information_se,
)
from .table import (
    CellProbs,
    EstimatorKind,
    Feasibility,
    FitReport,
    MarginTable,
    Mechanism,
    ModelKind,
    PatternMixtureParams,
    loglik,
    loglik_components,
    loglik_reduced,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BcmarError",
    "BootstrapFailureError",
    "BootstrapResult",
    "CellProbs",
    "DegenerateLikelihoodError",
    "DimensionMismatchError",
    "EmConfig",
    "EmState",
    "EstimatorKind",
    "Feasibility",
    "FeasibilityResult",
    "FeasibilityStatus",
    "FitReport",
    "InvalidProbabilityError",
    "KERNEL_BACKEND",
    "LrtResult",
    "MarginTable",
    "Mechanism",
    "ModelKind",
    "NegativeCountError",
    "NotNestedError",
    "PatternMixtureParams",
    "SingularInformationError",
    "TableValidationError",
    "UndefinedConditionalError",
    "ZeroTotalError",
    "bootstrap_se",
    "closed_form_mechanism",
    "closed_form_theta",
    "e_step_allocations",
    "em_restricted",
    "em_restricted_mar",
    "em_unrestricted",
    "fit_table",
    "fit_unrestricted_closed_form",
    "loglik",
    "loglik_components",
    "loglik_reduced",
    "lrt",
    "pattern_mixture_mle",
    "reduced_fit",
    "reduced_information_se",
    "solve_phi1",
    "validate",
]
