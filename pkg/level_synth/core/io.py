"""Trace file reading and writing.

Trace files are JSON documents::

    {"version": 1,
     "meta": {"tile_size_px": 16, "width": 16, "height": 14, "fps": 30.0},
     "catalog": [{"id": 0, "name": "bark", "w": 1, "h": 1}, ...],
     "frames": [{"i": 0, "instances": [[0, 3, 10], ...]}, ...]}

Generated sections use the same schema with a single frame.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Tuple

import pydantic
from pydantic import BaseModel, ConfigDict, Field

from level_synth.core.sprites import SpriteCatalog, SpriteType
from level_synth.core.trace import Frame, Trace, TraceMeta, frame_from_triples
from level_synth.errors import SchemaVersionError, TraceFormatError, ValidationError

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1


class FrameRecord(BaseModel):
    """A frame as stored on disk."""

    model_config = ConfigDict(extra="forbid")

    i: int = Field(description="Frame ordinal", ge=0)
    instances: List[Tuple[int, int, int]] = Field(default_factory=list)


class TraceDocument(BaseModel):
    """On-disk trace schema, version 1."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1]
    trace_id: str = Field(default="trace")
    meta: TraceMeta
    catalog: List[SpriteType]
    frames: List[FrameRecord] = Field(default_factory=list)

    def to_trace(self) -> Trace:
        catalog = SpriteCatalog(entries=tuple(self.catalog), tile_size_px=self.meta.tile_size_px)
        frames = tuple(
            frame_from_triples(rec.i, rec.instances, self.meta.width, self.meta.height)
            for rec in self.frames
        )
        return Trace(trace_id=self.trace_id, meta=self.meta, catalog=catalog, frames=frames)

    @classmethod
    def from_trace(cls, trace: Trace) -> "TraceDocument":
        return cls(
            version=TRACE_SCHEMA_VERSION,
            trace_id=trace.trace_id,
            meta=trace.meta,
            catalog=list(trace.catalog.entries),
            frames=[
                FrameRecord(i=frame.index, instances=[tuple(inst) for inst in frame.instances])
                for frame in trace.frames
            ],
        )


def read_json_document(path: Path) -> Dict[str, Any]:
    """Read a JSON file, reporting syntax errors with line and column.

    Raises:
        TraceFormatError: file is not valid JSON
        SchemaVersionError: ``version`` present but unsupported
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise TraceFormatError(f"{path}: top-level value must be an object")
    version = data.get("version")
    if version is not None and version != TRACE_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: schema version {version!r} not supported (expected {TRACE_SCHEMA_VERSION})"
        )
    return data


def describe_validation_error(path: Path, error: pydantic.ValidationError) -> str:
    """Render a pydantic error as 'path: field.path: message' lines."""
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: field {loc}: {item['msg']}")
    return "; ".join(lines)


def load_trace(path: Path) -> Trace:
    """Load and validate a trace file.

    Args:
        path: JSON trace file

    Returns:
        Validated Trace

    Raises:
        TraceFormatError: malformed JSON or schema violation
        ValidationError: trace invariants violated (unknown type id,
            decreasing frame indices, out-of-bounds instances)
    """
    path = Path(path)
    data = read_json_document(path)
    try:
        document = TraceDocument.model_validate(data)
    except pydantic.ValidationError as e:
        raise TraceFormatError(describe_validation_error(path, e)) from e
    try:
        trace = document.to_trace()
    except pydantic.ValidationError as e:
        raise TraceFormatError(describe_validation_error(path, e)) from e
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from e
    logger.debug(f"Loaded trace {trace.trace_id} with {len(trace)} frames from {path}")
    return trace


def save_trace(trace: Trace, path: Path) -> None:
    """Write a trace file (parent directories are created)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = TraceDocument.from_trace(trace)
    with open(path, "w") as f:
        json.dump(document.model_dump(mode="json"), f, indent=1)
        f.write("\n")


def single_frame_trace(
    trace_id: str, frame: Frame, meta: TraceMeta, catalog: SpriteCatalog
) -> Trace:
    """Wrap one frame (e.g. a generated section) as a one-frame trace."""
    return Trace(trace_id=trace_id, meta=meta, catalog=catalog, frames=(frame,))
