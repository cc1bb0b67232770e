"""Prevalence estimation for crosswise-format surveys.

The package fits a ladder of response laws to two-arm crosswise survey
data — honest answering, always-DIFFERENT evasion, and coin-flip random
answering — calibrates the random-answering share from a control item,
down-weights implausibly fast respondents, and wraps the whole pipeline
in a percentile bootstrap.  See the README for the survey design and
the CLI.
"""

from .errors import (
    ConfigError,
    ConsistencyError,
    CrosswiseError,
    DataError,
    DesignError,
    NumericalError,
    ParameterError,
)
from .models import (
    DIFFERENT,
    SAME,
    DesignParams,
    ModelKind,
    ModelParams,
    ModelSpec,
    ResponseProbs,
    reduce_check,
    response_probs,
)
from .records import RecordSet, Respondent
from .estimation import (
    FitResult,
    ResponseCounts,
    expected_bias,
    fit_mle,
    gof_g2,
    moment_ecwm_ra,
    moment_onesayers_ra,
    moment_theta,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CrosswiseError",
    "ConfigError",
    "DesignError",
    "ParameterError",
    "DataError",
    "NumericalError",
    "ConsistencyError",
    "DIFFERENT",
    "SAME",
    "DesignParams",
    "ModelKind",
    "ModelParams",
    "ModelSpec",
    "ResponseProbs",
    "response_probs",
    "reduce_check",
    "RecordSet",
    "Respondent",
    "ResponseCounts",
    "FitResult",
    "moment_theta",
    "moment_ecwm_ra",
    "moment_onesayers_ra",
    "fit_mle",
    "gof_g2",
    "expected_bias",
]
