"""Exception hierarchy for level-synth.

Anything deriving from ``ValidationError`` is a problem with the caller's
inputs (files, parameters, artifacts) and maps to CLI exit code 1. Every
other exception is treated as a runtime failure (exit code 2).
"""


class LevelSynthError(Exception):
    """Base class for all level-synth errors."""


class ValidationError(LevelSynthError):
    """Input data or parameters violate a documented invariant."""


class TraceFormatError(ValidationError):
    """A trace, section, or model file could not be parsed."""


class SchemaVersionError(ValidationError):
    """A versioned document has an unsupported schema version."""


class MissingArtifactError(ValidationError):
    """A pipeline stage could not find the artifact it consumes."""

    def __init__(self, path, stage: str = ""):
        self.path = path
        where = f" for stage '{stage}'" if stage else ""
        super().__init__(f"Missing input artifact{where}: expected {path}")


class ClusteringError(ValidationError):
    """Clustering called with an impossible configuration (e.g. k > n)."""


class ShapeTypeMismatchError(ValidationError):
    """Two shapes of different sprite types were compared."""


class CorpusError(ValidationError):
    """A synthetic corpus specification cannot produce a consistent trace."""


class IngestError(ValidationError):
    """Raster frames could not be turned into a trace."""
