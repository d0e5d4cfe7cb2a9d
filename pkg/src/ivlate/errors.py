"""Exception types shared across the package."""


class IdentificationError(Exception):
    """An in-sample identification condition failed.

    Resampling code treats subclasses as droppable: a bootstrap or Monte
    Carlo replicate that raises one is counted and skipped instead of
    aborting the whole run.
    """


class RankDeficientError(IdentificationError):
    """A regression design lost full column rank."""


class NoCompliersError(IdentificationError):
    """The estimated complier share fell below the detectable floor."""


class NoOverlapCellError(IdentificationError):
    """A saturated propensity cell contains only one instrument arm."""


class DegenerateStratumError(IdentificationError):
    """A stratum lacks both instrument arms or first-stage variation."""


class UnpartitionableError(IdentificationError):
    """No valid propensity stratification exists, even after merging."""


class NonFiniteError(ValueError):
    """Numeric input contains NaN or infinity."""


class InvalidSpecError(ValueError):
    """A data-generating specification is internally inconsistent."""


class InfiniteSupportError(ValueError):
    """Exact enumeration was requested for a continuous-support design."""


class TooManyFailuresError(RuntimeError):
    """More than half of the bootstrap replicates failed identification."""


class SchemaError(ValueError):
    """An input CSV does not match the expected column schema."""
