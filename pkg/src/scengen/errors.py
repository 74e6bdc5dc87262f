"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class ScengenError(Exception):
    exit_code = 1


class InputError(ScengenError, ValueError):
    """Malformed or inconsistent input data/configuration."""

    exit_code = 2


class MissingCell(InputError):
    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"missing value at data row {row}, column {column!r}")


class NonMonotoneDates(InputError):
    pass


class UnknownColumn(InputError):
    pass


class MissingColumn(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class LengthMismatch(InputError):
    pass


class IndexMismatch(InputError):
    pass


class WindowTooLong(InputError):
    pass


class NegativeTime(InputError):
    pass


class LoadingCountMismatch(InputError):
    pass


class MaturityOutOfRange(InputError):
    pass


class InsufficientHistory(InputError):
    pass


class EmptyPanel(InputError):
    pass


class InvalidCorrelation(InputError):
    pass


class EmptyJumpMeasure(InputError):
    pass


class InvalidConfig(InputError):
    pass


class AllReturnsExtreme(ScengenError):
    """Every filtered return was classified extreme; no diffusive drivers remain."""

    exit_code = 3


class ModelFileError(ScengenError):
    exit_code = 4


class ValidationFailure(ScengenError):
    exit_code = 5


class NonFiniteState(ScengenError):
    def __init__(self, scenarios, step: int):
        self.scenarios = list(scenarios)
        self.step = step
        head = self.scenarios[:10]
        super().__init__(
            f"non-finite state in {len(self.scenarios)} scenario(s) at substep {step}: {head}"
        )


class TooFewSamplesWarning(UserWarning):
    pass
