"""Exception and warning types shared by every solver."""


class HiddenSplitError(Exception):
    """Base class for all package errors."""


class ZeroMarginal(HiddenSplitError):
    """The conditioning exit side has zero probability (impossible observation)."""


class MissingTable(HiddenSplitError):
    """A prior support point has no joint splitting table."""


class NoExitPossible(HiddenSplitError):
    """Both boundaries are reflecting, so the process never exits."""


class OutOfDomain(HiddenSplitError, ValueError):
    """Initial position outside the interval."""


class DegenerateRates(HiddenSplitError, ValueError):
    """Ripening and spoiling rates coincide; the eigenvectors do not span."""


class GridTooNarrow(HiddenSplitError, ValueError):
    pass


class ZeroBarrier(HiddenSplitError, ValueError):
    """Barrier height vanishes; the coupled ratchet solution degenerates."""


class IllConditioned(HiddenSplitError):
    pass


class NearDegenerateRoots(HiddenSplitError):
    """Two characteristic roots (nearly) coincide; perturb the parameters."""


class MaxStepsExceeded(HiddenSplitError):
    pass


class AllZeroLikelihood(HiddenSplitError):
    """Every hypothesis assigns zero likelihood to the observed event."""


class UnknownFigure(HiddenSplitError, KeyError):
    pass


class ConfigError(HiddenSplitError, ValueError):
    """Invalid run configuration.  ``field`` names the offending key path."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class TruncationWarning(UserWarning):
    """The last retained eigenmode still contributes noticeably to a mode sum."""
