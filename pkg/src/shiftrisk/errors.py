"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: configuration/usage problems
exit 1, data validation problems exit 2, numerical failures exit 3.
"""


class ShiftRiskError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ShiftRiskError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class SchemaError(ShiftRiskError):
    """A file or dataset does not have the expected structure (e.g. a
    referenced column is missing)."""


class DataValidationError(ShiftRiskError):
    """One or more dataset rows violate the rules for the requested
    estimation mode. Carries the full violation list, not just the first."""

    _SHOWN = 8

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[: self._SHOWN])
        extra = len(self.violations) - self._SHOWN
        if extra > 0:
            lines += f"; ... ({extra} more)"
        super().__init__(f"{len(self.violations)} validation error(s): {lines}")


class FitError(ShiftRiskError):
    """A numerical fitting procedure failed."""


class SingularDesignError(FitError):
    """The (weighted) normal equations are numerically singular; a ridge
    penalty > 0 usually resolves this."""


class SeparationError(FitError):
    """Logistic regression diverged (separated or degenerate labels);
    only raised for unpenalized fits."""


class FoldError(ShiftRiskError):
    """A cross-fitting fold would contain only one source/target class."""


class NuisanceMissingError(ShiftRiskError):
    """An estimator was called without the nuisance values it requires."""


class PositivityError(ShiftRiskError):
    """A source-membership probability of zero appeared on a source row."""


class OracleUnavailableError(ShiftRiskError):
    """The oracle estimator needs outcomes on target rows and they are
    absent."""


class BootstrapError(ShiftRiskError):
    """Too many bootstrap replicates failed to produce an estimate."""


class ReplicationError(ShiftRiskError):
    """Too many simulation replicates failed."""
