"""Exception hierarchy shared by every module."""


class MevsimError(Exception):
    """Base class."""


class ReservesDepleted(MevsimError):
    pass


class NonPositiveReserves(MevsimError):
    pass


class DomainViolation(MevsimError):
    pass


class OutputExceedsReserves(MevsimError):
    pass


class NoSolution(MevsimError):
    pass


class BracketExhausted(MevsimError):
    pass


class InvalidCurvature(MevsimError):
    pass


class BetaZero(MevsimError):
    pass


class TooManyTrades(MevsimError):
    pass


class CyclicGraph(MevsimError):
    pass


class NoPath(MevsimError):
    pass


class ConvergenceFailure(MevsimError):
    pass


class DegenerateConstants(MevsimError):
    pass


class DegenerateDenominator(MevsimError):
    pass


class InvalidConstants(MevsimError):
    pass


class AssumptionViolated(MevsimError):
    pass


class ScenarioError(MevsimError):
    pass
