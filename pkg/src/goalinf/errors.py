"""Exception hierarchy shared by every module."""


class GoalInfError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GoalInfError, ValueError):
    pass


class NotSymmetric(GoalInfError, ValueError):
    pass


class DimensionMismatch(GoalInfError, ValueError):
    pass


class RankDeficient(GoalInfError, ValueError):
    pass


class RankTooLarge(GoalInfError, ValueError):
    pass


class DegenerateEigenvalue(GoalInfError, ValueError):
    """A retained eigenvalue sits numerically at 1, so ln(1 - lambda) diverges."""


class DegenerateSample(GoalInfError, ValueError):
    pass


class BetaOutOfRange(GoalInfError, ValueError):
    pass


class SingularNoise(GoalInfError, ValueError):
    pass


class ConfigInvalid(GoalInfError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class EmptyMask(GoalInfError, ValueError):
    pass
