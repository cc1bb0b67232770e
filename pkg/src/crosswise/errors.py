"""Exception hierarchy for the crosswise package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data validation problems with 3, and numerical failures with 4.
"""

from __future__ import annotations


class CrosswiseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CrosswiseError):
    """Invalid configuration, CLI arguments, or parameter values (exit 2)."""


class DesignError(ConfigError):
    """Invalid randomization design, e.g. an innocuous-yes rate of 0.5."""


class ParameterError(ConfigError):
    """Model parameters outside their admissible region."""


class DataError(CrosswiseError):
    """Malformed or degenerate survey data (exit 3)."""


class NumericalError(CrosswiseError):
    """Estimation or resampling failed numerically (exit 4)."""


class ConsistencyError(NumericalError):
    """An internal cross-check (e.g. a model nesting identity) failed."""
