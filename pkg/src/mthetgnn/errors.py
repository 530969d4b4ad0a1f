"""Exception hierarchy.

``InputError`` subclasses describe bad data or configuration and map to exit
code 2 on the command line; ``RuntimeFailure`` subclasses map to exit code 3.
"""


class MTHetGNNError(Exception):
    pass


class InputError(MTHetGNNError):
    pass


class FormatError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, row: int, column: int, field: str):
        super().__init__(f"cannot parse field {field!r} at row {row}, column {column}")
        self.row = row
        self.column = column


class DimensionError(InputError, ValueError):
    pass


class ConfigError(InputError, ValueError):
    pass


class CheckpointError(InputError):
    pass


class UndefinedMetricError(InputError, ValueError):
    pass


class ContractError(MTHetGNNError, RuntimeError):
    """A caller broke an API precondition (e.g. backward on a non-scalar)."""


class RuntimeFailure(MTHetGNNError, RuntimeError):
    pass


class TrainingDivergedError(RuntimeFailure):
    def __init__(self, epoch: int, lr: float, loss_name: str = ""):
        tag = f" ({loss_name} loss)" if loss_name else ""
        super().__init__(
            f"training diverged{tag}: non-finite loss at epoch {epoch} with lr={lr:g}"
        )
        self.epoch = epoch
        self.lr = lr
