"""Exception hierarchy shared by all modules."""


class ReverbSepError(ValueError):
    """Base class for every error raised by reverbsep."""


class DimensionError(ReverbSepError):
    pass


class SampleRateError(ReverbSepError):
    pass


class PlacementError(ReverbSepError):
    pass


class DegenerateSignalError(ReverbSepError):
    """A norm or ratio was requested on a zero-energy or empty signal."""


class GeometryError(ReverbSepError):
    pass


class ArityError(ReverbSepError):
    pass


class ComplexityError(ReverbSepError):
    pass


class GradientUndefinedError(ReverbSepError):
    pass


class TrainingDivergenceError(ReverbSepError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(ReverbSepError):
    pass
