# pcpolab/errors.py
from __future__ import annotations
from typing import Optional


class PcpoError(Exception):
    """Base class for every error raised by pcpolab."""


class ContractViolation(PcpoError, ValueError):
    """Caller broke a precondition: wrong shape, non-finite input, empty batch."""


class NumericalError(PcpoError, ArithmeticError):
    def __init__(self, message: str, layer: Optional[int] = None):
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
        self.layer = layer


class SolverError(PcpoError):
    pass


class UpdateRejected(PcpoError):
    """The policy update was refused; parameters must stay unchanged."""


class RolloutError(PcpoError):
    def __init__(self, learner_id: int, cause: BaseException):
        super().__init__(f"learner {learner_id} failed: {cause!r}")
        self.learner_id = learner_id
        self.cause = cause


class ConfigError(PcpoError):
    pass


class CheckpointError(PcpoError):
    pass
