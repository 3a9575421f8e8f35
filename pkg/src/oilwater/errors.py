class OilWaterError(Exception):
    pass


class IllegalFiring(OilWaterError):
    """A site was fired without holding both species."""


class InsufficientPairs(OilWaterError):
    pass


class SupportViolation(OilWaterError):
    """A pair-count increment fell outside the support of its class."""


class EngineAnomaly(OilWaterError):
    """Base for runs that could not be completed as requested."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class WindowCapExceeded(EngineAnomaly):
    pass


class BudgetExhausted(EngineAnomaly):
    pass


class NonConvergence(OilWaterError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
