"""Frames, traces, level sections and the frame-difference metric."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import FrozenSet, Iterable, Tuple

from pydantic import BaseModel, ConfigDict, Field

from level_synth.core.sprites import SpriteCatalog, SpriteInstance
from level_synth.errors import ValidationError


class TraceMeta(BaseModel):
    """Capture metadata shared by every frame of a trace."""

    model_config = ConfigDict(frozen=True)

    tile_size_px: int = Field(default=16, description="Tile edge length (pixels)", ge=1)
    width: int = Field(default=16, description="Frame width (tiles)", ge=1)
    height: int = Field(default=14, description="Frame height (tiles)", ge=1)
    fps: float = Field(default=30.0, description="Frames per second of the capture", gt=0)


@dataclass(frozen=True)
class Frame:
    """One captured frame: a set of sprite instances on a tile grid.

    Instances are stored sorted by (y, x, type_id) so that equal frames
    compare equal regardless of the order they were detected in.
    """

    index: int
    instances: Tuple[SpriteInstance, ...]
    width: int
    height: int

    def __post_init__(self) -> None:
        ordered = tuple(
            sorted((SpriteInstance(*inst) for inst in self.instances), key=SpriteInstance.sort_key)
        )
        object.__setattr__(self, "instances", ordered)
        if len(set(ordered)) != len(ordered):
            raise ValidationError(f"Frame {self.index} has duplicate (type, x, y) instances")
        for inst in ordered:
            if not (0 <= inst.x < self.width and 0 <= inst.y < self.height):
                raise ValidationError(
                    f"Frame {self.index}: instance {tuple(inst)} outside {self.width}x{self.height}"
                )

    @cached_property
    def keys(self) -> FrozenSet[SpriteInstance]:
        return frozenset(self.instances)

    def __len__(self) -> int:
        return len(self.instances)

    def with_index(self, index: int) -> "Frame":
        return Frame(index=index, instances=self.instances, width=self.width, height=self.height)

    def translated(self, dx: int, dy: int) -> "Frame":
        """Shift every instance by whole tiles; the caller keeps them in bounds."""
        moved = tuple(SpriteInstance(i.type_id, i.x + dx, i.y + dy) for i in self.instances)
        return Frame(index=self.index, instances=moved, width=self.width, height=self.height)

    @classmethod
    def empty(cls, index: int, width: int, height: int) -> "Frame":
        return cls(index=index, instances=(), width=width, height=height)


@dataclass(frozen=True)
class Trace:
    """A play session: metadata, sprite catalog and ordered frames."""

    trace_id: str
    meta: TraceMeta
    catalog: SpriteCatalog
    frames: Tuple[Frame, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.catalog.tile_size_px != self.meta.tile_size_px:
            raise ValidationError(
                f"Catalog tile size {self.catalog.tile_size_px} != trace tile size "
                f"{self.meta.tile_size_px}"
            )
        previous = None
        for frame in self.frames:
            if previous is not None and frame.index <= previous:
                raise ValidationError(
                    f"Frame indices must strictly increase: {frame.index} after {previous}"
                )
            previous = frame.index
            if (frame.width, frame.height) != (self.meta.width, self.meta.height):
                raise ValidationError(
                    f"Frame {frame.index} is {frame.width}x{frame.height}, "
                    f"trace is {self.meta.width}x{self.meta.height}"
                )
            for inst in frame.instances:
                if inst.type_id not in self.catalog:
                    raise ValidationError(
                        f"Frame {frame.index}: unknown type_id {inst.type_id} "
                        f"(catalog has {len(self.catalog)} entries)"
                    )

    def __len__(self) -> int:
        return len(self.frames)

    def frame_at(self, index: int) -> Frame:
        for frame in self.frames:
            if frame.index == index:
                return frame
        raise KeyError(f"Trace {self.trace_id} has no frame {index}")


@dataclass(frozen=True)
class LevelSection:
    """A contiguous frame range of one trace, represented by its first frame."""

    trace_id: str
    start_frame: int
    end_frame: int
    representative: Frame

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise ValidationError(
                f"Section start {self.start_frame} is after end {self.end_frame}"
            )
        if self.representative.index != self.start_frame:
            raise ValidationError("Section representative must be the frame at start_frame")

    @property
    def interaction_value(self) -> int:
        return self.end_frame - self.start_frame + 1

    @property
    def section_id(self) -> str:
        return f"{self.trace_id}@{self.start_frame}"


def frame_difference(a: Frame, b: Frame) -> float:
    """Fraction of positioned sprites that differ between two frames.

    ``1 - |M| / max(|a|, |b|)`` with M the intersection of (type, x, y)
    triples; two empty frames are identical (0.0).
    """
    largest = max(len(a), len(b))
    if largest == 0:
        return 0.0
    return 1.0 - len(a.keys & b.keys) / largest


def is_duplicate(a: Frame, b: Frame, threshold: float = 0.9) -> bool:
    """True when at least ``threshold`` of the sprites sit at identical positions.

    Equivalent to ``1 - frame_difference(a, b) >= threshold``; the overlap
    is compared directly so that 9/10 against 0.9 is not lost to rounding.
    """
    largest = max(len(a), len(b))
    if largest == 0:
        return True
    return len(a.keys & b.keys) / largest >= threshold


def frame_from_triples(
    index: int, triples: Iterable[Tuple[int, int, int]], width: int, height: int
) -> Frame:
    return Frame(
        index=index,
        instances=tuple(SpriteInstance(*t) for t in triples),
        width=width,
        height=height,
    )
