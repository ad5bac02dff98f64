"""
Exceptions raised by the fair graph data preparation package.
"""

from typing import Dict, Optional


class FairGraphError(ValueError):
    """Base class for every domain error."""


class DatasetError(FairGraphError):
    """The input dataset cannot be read or does not meet its schema."""


class SchemaError(FairGraphError):
    """The column-role map is inconsistent with the dataset."""


class GraphError(FairGraphError):
    """Invalid graph operation (bad k, unknown node id)."""


class SamplingError(FairGraphError):
    """A sampling target cannot be met by the available nodes."""


class BalanceError(FairGraphError):
    """A rebalancing count formula is applied outside its preconditions."""


class TrainingError(FairGraphError):
    """Model training failed."""

    def __init__(self, message: str, epoch: Optional[int] = None) -> None:
        super().__init__(message)
        self.epoch = epoch


class GenerationError(FairGraphError):
    """Synthetic rows could not be produced."""


class MetricError(FairGraphError):
    """A metric cannot be computed on the given predictions."""


class ReportError(FairGraphError):
    """A report cannot be emitted."""


class ConfigError(FairGraphError):
    """Configuration failed validation.

    ``errors`` maps the offending config path to a message.
    """

    def __init__(self, errors: Dict[str, str]) -> None:
        self.errors = dict(errors)
        details = "; ".join(f"{key}: {msg}" for key, msg in sorted(self.errors.items()))
        super().__init__(f"Invalid configuration: {details}")
