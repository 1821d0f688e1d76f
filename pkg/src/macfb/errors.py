"""Exception and warning types raised across the package."""


class MacfbError(Exception):
    """Base class for all package errors."""


class InputError(MacfbError):
    """Malformed or inconsistent input data."""


class NonStochasticRow(InputError):
    pass


class NegativeEntry(InputError):
    pass


class LengthMismatch(InputError):
    pass


class AlphabetMismatch(InputError):
    pass


class InvalidNoise(InputError):
    pass


class InvalidStoppingTime(InputError):
    pass


class InconsistentLabels(InputError):
    pass


class NonConvergence(MacfbError):
    pass


class DegenerateTest(MacfbError):
    pass


class SupportOverflow(MacfbError):
    pass


class InsufficientData(MacfbError):
    pass


class NoQualifyingNodes(MacfbError):
    pass


class TooLarge(MacfbError):
    pass


class HypothesisViolated(MacfbError):
    pass


class NotSupermartingale(MacfbError):
    pass


class ConfigInfeasible(UserWarning):
    """Rate split looks larger than the data phase can support."""
