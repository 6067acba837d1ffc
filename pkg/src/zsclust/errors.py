"""Exception taxonomy shared by every module.

The CLI maps these onto exit codes: parameter/usage problems exit 1,
data/format/validation problems exit 2, numeric failures exit 3.
"""


class ZsclustError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ZsclustError):
    """A file does not conform to its documented layout (bad magic,
    wrong version, truncation, trailing bytes, unparseable line)."""


class ValidationError(ZsclustError):
    """Data violates a declared invariant (non-finite values, length
    mismatches, duplicate ids)."""


class ScenarioError(ZsclustError):
    """A sampling scenario cannot be satisfied by the given bank."""


class ParameterError(ZsclustError):
    """An algorithm parameter is out of its valid range."""


class NumericError(ZsclustError):
    """A numeric procedure failed (non-convergent eigensolver,
    singular covariance)."""


class DegenerateInputError(ZsclustError):
    """Input is degenerate for the requested computation
    (e.g. every point is an outlier)."""


class UndefinedMetricError(ZsclustError):
    """The requested metric is undefined on this input
    (e.g. silhouette with fewer than two clusters)."""
