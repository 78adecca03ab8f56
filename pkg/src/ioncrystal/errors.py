"""Exception hierarchy.

The CLI maps the three top-level families onto distinct exit codes.
"""


class IonCrystalError(Exception):
    pass


class ConfigParseError(IonCrystalError):
    pass


class ValidationError(IonCrystalError, ValueError):
    pass


class NumericalFailure(IonCrystalError):
    pass


class UnstableTrap(NumericalFailure):
    pass


class UnstableParameters(NumericalFailure):
    pass


class CoincidentIons(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoTransitionFound(NumericalFailure):
    pass


class NegativeEigenvalue(NumericalFailure):
    def __init__(self, message, mode_index=None, eigenvalue=None):
        super().__init__(message)
        self.mode_index = mode_index
        self.eigenvalue = eigenvalue


class ResonantDetuning(NumericalFailure):
    pass


class StepTooLarge(NumericalFailure):
    pass


class WindowTooShort(ValidationError):
    pass


class FitDiverged(NumericalFailure):
    pass


class InvalidRatio(ValidationError):
    pass
