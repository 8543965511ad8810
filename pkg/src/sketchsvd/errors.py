"""Exception types raised by sketchsvd."""


class SketchSvdError(Exception):
    """Base class for all numerical failures in this package."""


class RankDeficient(SketchSvdError):
    pass


class ConvergenceFailure(SketchSvdError):
    pass


class NotPositiveSemiDefinite(SketchSvdError):
    pass


class DimensionTooLarge(SketchSvdError):
    pass


class MaxIterationsExceeded(SketchSvdError):
    """The KN iteration hit its cap.

    ``result`` holds whatever partial output the raiser had (the last
    iterate, or a full ``IsvdResult`` from the pipeline) and ``trace``
    the iteration record.
    """

    def __init__(self, message, result=None, trace=None):
        super().__init__(message)
        self.result = result
        self.trace = trace
