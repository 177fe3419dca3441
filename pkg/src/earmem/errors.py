"""Exception hierarchy for the earmem pipeline."""


class EarmemError(Exception):
    """Base class for every error raised by this package."""


class DesignError(EarmemError, ValueError):
    pass


class SignalTooShort(EarmemError, ValueError):
    pass


class ResampleError(EarmemError, ValueError):
    pass


class EpochOutOfBounds(EarmemError, IndexError):
    """An event lacks the sample margin needed to cut a full epoch."""

    def __init__(self, event_index, sample, message=None):
        self.event_index = event_index
        self.sample = sample
        super().__init__(
            message or f"event {event_index} at sample {sample} has insufficient margin"
        )


class MissingCondition(EarmemError, ValueError):
    """One of the two classes (remembered/forgotten) is absent."""


class DegenerateTrial(EarmemError, ValueError):
    pass


class SingularCovariance(EarmemError, ValueError):
    pass


class ShapeError(EarmemError, ValueError):
    pass


class UninitializedStats(EarmemError, RuntimeError):
    pass


class TooFewTrials(EarmemError, ValueError):
    pass


class SpecError(EarmemError, ValueError):
    pass


class CorruptContainer(EarmemError, ValueError):
    pass


class VersionError(EarmemError, ValueError):
    pass
