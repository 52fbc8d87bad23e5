"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, range, mode)."""


class NumericFailure(ArithmeticError):
    """A computation produced NaN or Inf.

    ``where`` names the layer or tensor that failed.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class AmbiguityConditionError(ContractError):
    """The small ambiguity degree condition (gamma < 1) does not hold."""


class FormatError(ValueError):
    """Malformed dataset file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingDiverged(NumericFailure):
    """Numeric failure during training, tagged with the epoch and batch index."""

    def __init__(self, cause, epoch, batch):
        super().__init__(f"epoch {epoch}, batch {batch}: {cause}", where=getattr(cause, "where", None))
        self.epoch = epoch
        self.batch = batch
