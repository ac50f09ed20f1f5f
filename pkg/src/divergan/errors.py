"""Exception types shared across the package."""


class DiverganError(Exception):
    """Base class for all package errors."""


class DimensionError(DiverganError):
    """Shapes or axes incompatible with the requested operation."""


class ConfigError(DiverganError):
    """Invalid or inconsistent configuration value."""


class UsageError(DiverganError):
    """API used outside its contract (e.g. backward on a non-scalar)."""


class VocabularyError(DiverganError):
    """Token not present in a closed vocabulary."""


class LengthError(DiverganError):
    """Caption length outside the supported range."""


class EnumError(DiverganError):
    """Value not a member of the expected attribute set."""


class ValidationError(DiverganError):
    """Numeric input failed a validity check (e.g. rows not a distribution)."""


class TrainingDiverged(DiverganError):
    """Training aborted because a loss became non-finite."""

    def __init__(self, step: int, term: str, value: float):
        self.step = step
        self.term = term
        self.value = value
        super().__init__(f"non-finite {term} ({value!r}) at step {step}")
