"""Exception hierarchy shared across the toolkit."""


class LowRankOTError(Exception):
    """Base class for all library errors."""


class EmptyMeasure(LowRankOTError):
    pass


class NonPositiveWeight(LowRankOTError):
    pass


class WeightSumMismatch(LowRankOTError):
    pass


class DimensionMismatch(LowRankOTError):
    pass


class SizeCapExceeded(LowRankOTError):
    pass


class NonFiniteKernel(LowRankOTError):
    """Kernel entries became NaN/Inf, usually a too-large fixed step size."""


class ZeroRowSum(LowRankOTError):
    pass


class ZeroColumnSum(LowRankOTError):
    pass


class InfeasibleInit(LowRankOTError):
    pass


class RankTooSmall(LowRankOTError):
    pass


class AsymmetricCost(LowRankOTError):
    pass


class NonPositiveBandwidth(LowRankOTError):
    pass


class NonFiniteGradient(LowRankOTError):
    pass


class DegenerateFit(LowRankOTError):
    pass


class ParseError(LowRankOTError):
    pass


class UsageError(LowRankOTError):
    pass
