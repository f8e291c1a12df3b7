"""Exception hierarchy shared by all morpipe modules."""


class MorpipeError(Exception):
    """Base class for every error raised by morpipe."""


class ArgumentError(MorpipeError, ValueError):
    """An argument is out of range or has inconsistent dimensions."""


class InputError(MorpipeError, ValueError):
    """Input data violates a precondition (non-finite, asymmetric, ...)."""


class NumericalError(MorpipeError, ArithmeticError):
    """A numerical procedure failed (singular system, no convergence)."""


class STLParseError(MorpipeError, ValueError):
    """An STL payload could not be decoded."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(MorpipeError, ValueError):
    """A configuration document is malformed or violates a constraint."""


class DatabaseError(MorpipeError, OSError):
    """A snapshot database directory is missing files or inconsistent."""


class PipelineError(MorpipeError, RuntimeError):
    """The offline phase could not produce any usable evaluation."""


class OptimizationError(MorpipeError, RuntimeError):
    """Every optimizer start failed to evaluate the objective."""
