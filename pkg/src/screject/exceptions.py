"""Exception hierarchy shared by every screject module."""


class ScrejectError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ScrejectError, ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


class DegenerateInputError(InvalidInputError):
    """Input is well-formed but degenerate, e.g. a zero vector to be normalised."""


class ConfigError(ScrejectError, ValueError):
    """A configuration object holds values outside its domain."""


class LogitFormatError(ScrejectError, ValueError):
    """A logit-record file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class TrainingDivergedError(ScrejectError, RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
