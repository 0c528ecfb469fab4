"""
Error types and exit codes for the cavity-Rydberg gate lab
Every error carries a machine-readable code and the process exit code it maps to
"""

from enum import Enum


class ExitCode(Enum):
    """Process exit codes used by the command line"""
    OK = 0
    VALIDATION = 2
    NUMERICAL = 3


class LabError(Exception):
    """Base class for all lab errors"""

    code = "lab_error"
    exit_code = ExitCode.VALIDATION

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def diagnostic(self) -> str:
        """Single-line diagnostic written to stderr"""
        return f"error[{self.code}]: {self.message}"


class ValidationError(LabError):
    """Input violates a precondition; exit code 2"""
    code = "validation"
    exit_code = ExitCode.VALIDATION


class NumericalError(LabError):
    """A computation failed numerically; exit code 3"""
    code = "numerical"
    exit_code = ExitCode.NUMERICAL


# Validation errors

class MissingSettingError(ValidationError):
    code = "missing_setting"


class WrongSettingsError(ValidationError):
    code = "wrong_settings"


class EmptyCountsError(ValidationError):
    code = "empty_counts"


class UnderdeterminedParamsError(ValidationError):
    code = "underdetermined"


class OverdeterminedParamsError(ValidationError):
    code = "overdetermined"


class InconsistentParamsError(ValidationError):
    code = "inconsistent_params"


class NonOrthonormalBasisError(ValidationError):
    code = "non_orthonormal_basis"


class BasisMismatchError(ValidationError):
    code = "basis_mismatch"


class DimensionMismatchError(ValidationError):
    code = "dimension_mismatch"


class FitPreconditionError(ValidationError):
    code = "fit_precondition"


class DegenerateDataError(ValidationError):
    code = "degenerate_data"


class PresetNotFoundError(ValidationError):
    code = "preset_not_found"


class ConfigError(ValidationError):
    code = "config"


class AlreadyPostselectedError(ValidationError):
    code = "already_postselected"


# Numerical errors

class SingularMetricError(NumericalError):
    code = "singular_metric"


class SingularInputError(NumericalError):
    code = "singular_input"


class SingularDenominatorError(NumericalError):
    code = "singular_denominator"


class FitConvergenceError(NumericalError):
    code = "fit_convergence"


class ZeroTraceError(NumericalError):
    code = "zero_trace"


class ZeroEfficiencyError(NumericalError):
    code = "zero_efficiency"


class ModelConsistencyError(NumericalError):
    code = "model_consistency"
