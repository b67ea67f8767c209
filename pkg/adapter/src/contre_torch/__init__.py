"""Bridge from PyTorch checkpoints to the prediction interchange format."""

from .export import (AdapterConfig, AdapterError, ConfigError, DataError,
                     ExportResult, ManifestEntry, ModelLoadError,
                     export_predictions, load_model, read_entries)

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "ConfigError",
    "DataError",
    "ExportResult",
    "ManifestEntry",
    "ModelLoadError",
    "export_predictions",
    "load_model",
    "read_entries",
]
