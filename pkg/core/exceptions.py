"""
Moduł zawierający niestandardowe wyjątki używane w aplikacji.

Every exception carries the process exit code the CLI maps it to:
2 for configuration problems, 3 for data problems, 4 for provider problems.
"""

from typing import Any, List, Optional


class TaxonomyError(Exception):
    """Bazowy wyjątek dla całego potoku eksperymentów."""
    exit_code: int = 1


class ConfigError(TaxonomyError):
    """Wyjątek występujący podczas obsługi konfiguracji."""
    exit_code = 2


class RunDirectoryError(ConfigError):
    """Raised when a command would overwrite artifacts in an existing run directory."""
    pass


class MissingArtifactError(ConfigError):
    """Raised when an upstream artifact is missing; names the command that produces it."""

    def __init__(self, artifact: str, command: str):
        self.artifact = artifact
        self.command = command
        super().__init__(f"Missing artifact '{artifact}'. Run '{command}' first.")


class PlanError(ConfigError):
    """Wyjątek występujący podczas budowania planu treningu."""
    pass


class UnknownStrategyError(PlanError):
    def __init__(self, strategy: str, valid: List[str]):
        self.strategy = strategy
        self.valid = valid
        super().__init__(f"Unknown strategy '{strategy}'. Valid strategies: {', '.join(valid)}")


class MissingDatasetError(PlanError):
    def __init__(self, handle: str, strategy: str):
        self.handle = handle
        super().__init__(f"Strategy '{strategy}' requires dataset handle '{handle}'")


class ReportFormatError(ConfigError):
    def __init__(self, fmt: str, valid: List[str]):
        super().__init__(f"Unknown report format '{fmt}'. Valid formats: {', '.join(valid)}")


class ParameterError(ConfigError):
    """Raised when model parameters are incompatible with the data (e.g. knn with n < k)."""
    pass


class DataError(TaxonomyError):
    """Wyjątek występujący przy niepoprawnych danych wejściowych."""
    exit_code = 3


class SchemaError(DataError):
    def __init__(self, column: str, detail: str = ""):
        self.column = column
        message = f"Missing or invalid column '{column}'"
        super().__init__(f"{message}: {detail}" if detail else message)


class ValueRangeError(DataError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"Row {row}: {message}")


class PreconditionError(DataError):
    pass


class ExtractionError(DataError):
    """Raised when fewer than two low-df tokens qualify as nouns."""

    def __init__(self, count: int, example_id: Optional[str] = None):
        self.count = count
        self.example_id = example_id
        super().__init__(
            f"Expected at least 2 noun candidates, found {count}"
            + (f" in example '{example_id}'" if example_id else "")
        )


class PatternInvariantError(DataError):
    pass


class InfeasibleSplitError(DataError):
    pass


class ShapeError(DataError):
    pass


class DegenerateDataError(DataError):
    pass


class UndefinedCorrelationError(DataError):
    pass


class ContractViolationError(DataError):
    pass


class ProviderError(TaxonomyError):
    """Wyjątek występujący podczas komunikacji z zewnętrznym dostawcą."""
    exit_code = 4


class CredentialsError(ProviderError):
    pass


class TranslationError(ProviderError):
    pass


class CircuitOpenError(ProviderError):
    """Wyjątek rzucany, gdy circuit jest otwarty."""
    pass


class BackendError(ProviderError):
    pass


class BackendStateError(BackendError):
    pass


class StageFailedError(BackendError):
    """Raised when a fine-tuning stage fails; carries the trace recorded so far."""

    def __init__(self, stage_index: int, trace: Any, cause: Exception):
        self.stage_index = stage_index
        self.trace = trace
        self.cause = cause
        super().__init__(f"Stage {stage_index + 1} failed: {cause}")
