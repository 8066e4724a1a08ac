"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: usage/validation errors
exit 2, IO errors exit 1, numerical aborts exit 3.
"""


class PrefoptError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PrefoptError, ValueError):
    """Non-finite or otherwise malformed numeric input."""


class InvalidSpecError(PrefoptError, ValueError):
    """Loss/dataset/train specification violates its invariants."""


class InvalidConfigError(PrefoptError, ValueError):
    """Model or sampling configuration out of range."""


class TokenRangeError(PrefoptError, ValueError):
    """A token id falls outside the model vocabulary."""


class SequenceLengthError(PrefoptError, ValueError):
    """Prompt plus completion exceeds the model context length."""


class ParseError(PrefoptError, ValueError):
    """Malformed record in a dataset file."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ProbeFailure(PrefoptError, RuntimeError):
    """Finite differencing hit a non-finite loss while probing."""

    def __init__(self, message: str, coordinate: int):
        self.coordinate = coordinate
        super().__init__(f"{message} (coordinate {coordinate})")


class NumericalAbort(PrefoptError, RuntimeError):
    """Training produced a non-finite loss, gradient or parameter.

    Carries the step, the offending example index (-1 when the batch as a
    whole is at fault) and whatever metrics rows were logged before the
    abort, so a crashed run can still persist partial output.
    """

    def __init__(self, message: str, step: int, example_index: int = -1, metrics=None):
        self.step = step
        self.example_index = example_index
        self.metrics = list(metrics) if metrics is not None else []
        super().__init__(f"{message} (step {step}, example {example_index})")
