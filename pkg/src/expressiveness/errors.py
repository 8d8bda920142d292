"""Exception and warning types shared across the package."""


class ExpressivenessError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVarianceError(ExpressivenessError):
    """A vector or column that must vary is constant."""


class TooShortError(ExpressivenessError):
    """Input has fewer elements than the operation requires."""


class ParseError(ExpressivenessError):
    """A file could not be parsed; carries path and line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class MissingColumnError(ParseError):
    """A required column is absent from a file header."""

    def __init__(self, column, path=None):
        self.column = column
        super().__init__(f"missing required column {column!r}", path=path)


class MissingParticipantError(ExpressivenessError):
    """A participant appears in one dataset member but not another."""

    def __init__(self, participant_id, where=""):
        self.participant_id = participant_id
        msg = f"participant {participant_id!r} missing"
        if where:
            msg += f" from {where}"
        super().__init__(msg)


class NonFiniteValueError(ExpressivenessError):
    """A NaN or infinity appeared where finite values are required."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class DegenerateRatingsError(ExpressivenessError):
    """All subjects have identical mean ratings; ICC is undefined."""


class OutOfRangeError(ExpressivenessError):
    """A value lies outside its documented domain."""


class DegenerateInputError(ExpressivenessError):
    """An input column has zero variance where variation is required."""


class SingularCovarianceError(ExpressivenessError):
    """A covariance matrix is singular or not positive definite."""


class EmptyInputError(ExpressivenessError):
    """A collection that must be non-empty is empty."""


class DegenerateConfigurationError(ExpressivenessError):
    """Landmark configuration is degenerate; affine fit is underdetermined."""


class InvalidPatternError(ExpressivenessError):
    """A lexicon pattern is malformed (e.g. interior wildcard)."""


class EmptyTokenListError(ExpressivenessError):
    """Token stream is empty; percentages are undefined."""


class EmptyTranscriptError(ExpressivenessError):
    """Transcript contains no countable words."""


class LengthMismatchError(ExpressivenessError):
    """Paired vectors have different lengths."""


class UnpairedRecordsError(ExpressivenessError):
    """Evaluation records cannot be paired by (repetition, fold)."""


class MixedFeatureSetsError(ExpressivenessError):
    """Records carry models with differing feature name sets."""


class TooFewGroupsError(ExpressivenessError):
    """Not enough groups to form the requested number of folds."""


class DimensionMismatchError(ExpressivenessError):
    """Feature count at prediction time differs from training time."""


class DivergedError(ExpressivenessError):
    """Training loss became non-finite."""


class ConfigError(ExpressivenessError):
    """A run configuration is invalid."""


class NotConvergedWarning(UserWarning):
    """An iterative fit stopped before reaching its convergence criterion."""


class DegenerateLabelsWarning(UserWarning):
    """Labels are constant; quartile binning collapsed to a single bin."""
