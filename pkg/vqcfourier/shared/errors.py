from typing import Optional


class VQCFourierError(Exception):
    """Base error; exit_code is what the CLI returns for it"""

    exit_code = 1


class ConfigError(VQCFourierError):
    """Bad input, bad config, bad request"""

    exit_code = 1


class InvalidSpec(ConfigError):
    pass


class NotHermitian(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


class InsufficientPopulation(ConfigError):
    pass


class ShannonViolation(ConfigError):
    pass


class StepTooCoarse(ConfigError):
    pass


class ParseError(ConfigError):
    """Malformed table input; row is 1-based and counts the header line"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(VQCFourierError):
    """The inputs were fine but the numbers did not cooperate"""

    exit_code = 2


class SpectrumTooLarge(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class DivergedTraining(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass
