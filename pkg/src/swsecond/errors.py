"""Exception hierarchy.

Every error raised by the library derives from :class:`SWError`.  The three
intermediate classes map onto the CLI exit codes: input problems (2), budget
guards (3) and degenerate sources (4).
"""


class SWError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(SWError, ValueError):
    exit_code = 2


class BudgetExceeded(SWError):
    """A computation would exceed its enumeration or memory budget."""

    exit_code = 3


class DegenerateSigma(SWError):
    """The dispersion matrix (or a needed marginal of it) is singular."""

    exit_code = 4


class DegenerateComponentSigma(DegenerateSigma):
    """A mixture component has a singular marginal where one is required."""


# source_model
class NegativeEntry(InputError):
    pass


class SumNotOne(InputError):
    pass


class ZeroMarginal(InputError):
    pass


class WeightSumNotOne(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class EmptyMixture(InputError):
    pass


# gaussian
class NegativeVariance(InputError):
    pass


class NotPSD(InputError):
    pass


class OutOfRange(InputError):
    pass


# region / bounds
class NoSolution(InputError):
    """No boundary point exists for the requested grid abscissa."""


class UnsupportedCase(InputError):
    pass


class SignConstraintViolated(InputError):
    pass


# simulator
class InvalidTrials(InputError):
    pass


class EmptyBinPair(SWError):
    """No sequence pair is mapped to the requested pair of bin indices."""


# io
class ParseError(InputError):
    """Malformed input file; the message carries the line and column."""
