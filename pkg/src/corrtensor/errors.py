"""Exception hierarchy shared by every module."""


class CorrTensorError(Exception):
    """Base class for all errors raised by corrtensor."""


class DimensionMismatch(CorrTensorError, ValueError):
    pass


class NotNormalized(CorrTensorError, ValueError):
    pass


class NegativeProbability(CorrTensorError, ValueError):
    pass


class EmptySubset(CorrTensorError, ValueError):
    pass


class IndexOutOfRange(CorrTensorError, IndexError):
    pass


class ZeroProbabilityEvent(CorrTensorError, ValueError):
    pass


class SizeCapExceeded(CorrTensorError, ValueError):
    pass


class CardinalityMismatch(CorrTensorError, ValueError):
    pass


class OverlappingSets(CorrTensorError, ValueError):
    pass


class LambdaOutOfRange(CorrTensorError, ValueError):
    pass


class UnknownMethod(CorrTensorError, ValueError):
    pass


class UnboundedObjective(CorrTensorError):
    """The dual objective is +inf: a positive coefficient multiplies an unbounded rate."""


class AlternativeFormInvalid(CorrTensorError, ValueError):
    pass


class GZeroViolated(CorrTensorError, ValueError):
    pass


class InvalidPerturbation(CorrTensorError, ValueError):
    pass


class EtaOutOfRange(CorrTensorError, ValueError):
    pass


class PreconditionNotZeroCapacity(CorrTensorError, ValueError):
    pass


class AlphabetTooLarge(CorrTensorError, ValueError):
    pass


class OracleUnavailable(CorrTensorError):
    pass
