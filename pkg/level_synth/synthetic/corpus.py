"""Synthetic gameplay corpora with ground truth.

A corpus plays a list of section blueprints in order, holding each one on
screen for its dwell count. An optional walker sprite advances along row 0
while the camera holds, so frames inside a section are not all identical.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
import pydantic
from pydantic import BaseModel, Field
from tqdm import tqdm

from level_synth.core.io import (
    FrameRecord,
    describe_validation_error,
    read_json_document,
    save_trace,
)
from level_synth.core.sprites import SpriteCatalog, SpriteInstance, default_catalog
from level_synth.core.trace import Frame, Trace, TraceMeta, frame_difference
from level_synth.errors import CorpusError, MissingArtifactError, TraceFormatError
from level_synth.pipeline.config import SegmentationParams
from level_synth.vision.atlas import (
    SpriteAtlas,
    render_raster,
    save_atlas,
    synthetic_atlas,
    write_raster,
)

logger = logging.getLogger(__name__)

Blueprint = Tuple[SpriteInstance, ...]
WALKER_NAME = "walker"
WALKER_ROW = 0


def footprint(inst: SpriteInstance, catalog: SpriteCatalog) -> List[Tuple[int, int]]:
    entry = catalog.entries[inst.type_id]
    return [(inst.x + dx, inst.y + dy) for dy in range(entry.h) for dx in range(entry.w)]


@dataclass(frozen=True)
class CorpusSpec:
    """Blueprints, how long each stays on screen, and the walker.

    Blueprint footprints must lie inside the frame and must not overlap,
    so that rendered rasters can be matched back exactly.
    """

    catalog: SpriteCatalog
    meta: TraceMeta
    blueprints: Tuple[Blueprint, ...]
    dwell: Tuple[int, ...]
    walker_speed: Optional[float] = None
    rng_seed: int = 0
    trace_id: str = "corpus"

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "blueprints",
            tuple(tuple(SpriteInstance(*i) for i in bp) for bp in self.blueprints),
        )
        object.__setattr__(self, "dwell", tuple(int(d) for d in self.dwell))
        if not self.blueprints:
            raise CorpusError("A corpus needs at least one blueprint")
        if len(self.dwell) != len(self.blueprints):
            raise CorpusError(
                f"{len(self.dwell)} dwell counts for {len(self.blueprints)} blueprints"
            )
        if any(d < 1 for d in self.dwell):
            raise CorpusError("Dwell counts must be at least 1")
        if self.walker_speed is not None:
            if self.walker_speed < 0:
                raise CorpusError("walker_speed must be non-negative")
            if WALKER_NAME not in self.catalog.names:
                raise CorpusError(f"Catalog has no '{WALKER_NAME}' sprite for the walker")
        for i, blueprint in enumerate(self.blueprints):
            self._check_blueprint(i, blueprint)

    def _check_blueprint(self, i: int, blueprint: Blueprint) -> None:
        if not blueprint:
            raise CorpusError(f"Blueprint {i} is empty")
        occupied: Set[Tuple[int, int]] = set()
        for inst in blueprint:
            if inst.type_id not in self.catalog:
                raise CorpusError(f"Blueprint {i}: unknown type id {inst.type_id}")
            for x, y in footprint(inst, self.catalog):
                if not 0 <= y < self.meta.height:
                    raise CorpusError(
                        f"Blueprint {i} exceeds frame height {self.meta.height} at {tuple(inst)}"
                    )
                if not 0 <= x < self.meta.width:
                    raise CorpusError(
                        f"Blueprint {i} exceeds frame width {self.meta.width} at {tuple(inst)}"
                    )
                if (x, y) in occupied:
                    raise CorpusError(f"Blueprint {i}: overlapping sprites at ({x}, {y})")
                occupied.add((x, y))
        if self.walker_speed is not None:
            if any(y == WALKER_ROW for _, y in occupied):
                raise CorpusError(f"Blueprint {i} uses row {WALKER_ROW}, reserved for the walker")
            if self.catalog.id_of(WALKER_NAME) in {inst.type_id for inst in blueprint}:
                raise CorpusError(f"Blueprint {i} places the walker sprite")

    @property
    def frame_count(self) -> int:
        return sum(self.dwell)

    def starts(self) -> List[int]:
        starts, total = [], 0
        for d in self.dwell:
            starts.append(total)
            total += d
        return starts


@dataclass(frozen=True)
class GroundTruth:
    """What segmentation and ingestion must recover from a corpus trace."""

    trace_id: str
    boundaries: Tuple[int, ...]
    interaction_values: Tuple[int, ...]
    high_interaction: Tuple[bool, ...]
    frames: Tuple[Frame, ...] = field(repr=False, default_factory=tuple)

    @property
    def section_ends(self) -> List[int]:
        return [start + value - 1 for start, value in zip(self.boundaries, self.interaction_values)]


@dataclass(frozen=True)
class CorpusArtifacts:
    trace: Trace
    truth: GroundTruth
    frames_dir: Optional[Path] = None
    atlas_manifest: Optional[Path] = None
    trace_path: Optional[Path] = None
    truth_path: Optional[Path] = None


def high_interaction_flags(values: Sequence[int]) -> List[bool]:
    """Sections strictly above the mean, in integer arithmetic."""
    total, n = sum(values), len(values)
    return [v * n > total for v in values]


def _walker(catalog: SpriteCatalog, ordinal: int, speed: float, width: int) -> SpriteInstance:
    return SpriteInstance(catalog.id_of(WALKER_NAME), int(ordinal * speed) % width, WALKER_ROW)


def corpus_frames(spec: CorpusSpec) -> List[Frame]:
    """Every frame of the corpus trace, indexed from 0."""
    frames = []
    ordinal = 0
    for blueprint, dwell in zip(spec.blueprints, spec.dwell):
        for _ in range(dwell):
            instances = blueprint
            if spec.walker_speed is not None:
                walker = _walker(spec.catalog, ordinal, spec.walker_speed, spec.meta.width)
                instances = blueprint + (walker,)
            frames.append(
                Frame(
                    index=ordinal,
                    instances=instances,
                    width=spec.meta.width,
                    height=spec.meta.height,
                )
            )
            ordinal += 1
    return frames


def _check_segmentable(spec: CorpusSpec, frames: List[Frame], threshold: float) -> None:
    """Boundaries must exceed the threshold and held frames must stay within it."""
    starts = set(spec.starts())
    representative = frames[0]
    for frame in frames[1:]:
        drift = frame_difference(frame, representative)
        if frame.index in starts:
            if not drift > threshold:
                raise CorpusError(
                    f"Section starting at frame {frame.index} differs from the previous "
                    f"section by only {drift:.3f} (needs > {threshold})"
                )
            representative = frame
        elif drift > threshold:
            raise CorpusError(
                f"Frame {frame.index} drifts {drift:.3f} from its section; "
                "the blueprint is too small for the walker"
            )


def build_corpus(
    spec: CorpusSpec,
    output_dir: Optional[Path] = None,
    atlas: Optional[SpriteAtlas] = None,
    render: bool = True,
    segmentation: Optional[SegmentationParams] = None,
    progress: bool = False,
) -> CorpusArtifacts:
    """Emit the corpus trace and its ground truth.

    When ``output_dir`` is given the trace, ground truth, atlas and (with
    ``render``) one PNG per frame are written there::

        output_dir/trace.json
        output_dir/ground_truth.json
        output_dir/atlas/atlas.yaml
        output_dir/frames/frame_00000.png

    Raises:
        CorpusError: consecutive blueprints are too similar to be told
            apart, or the walker pushes a held frame over the threshold
    """
    threshold = (segmentation or SegmentationParams()).boundary_threshold
    frames = corpus_frames(spec)
    _check_segmentable(spec, frames, threshold)

    trace = Trace(
        trace_id=spec.trace_id, meta=spec.meta, catalog=spec.catalog, frames=tuple(frames)
    )
    truth = GroundTruth(
        trace_id=spec.trace_id,
        boundaries=tuple(spec.starts()),
        interaction_values=spec.dwell,
        high_interaction=tuple(high_interaction_flags(spec.dwell)),
        frames=tuple(frames),
    )
    logger.info(
        f"Corpus {spec.trace_id}: {len(spec.blueprints)} sections, {len(frames)} frames, "
        f"{sum(truth.high_interaction)} high-interaction"
    )
    if output_dir is None:
        return CorpusArtifacts(trace=trace, truth=truth)

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    trace_path = output_dir / "trace.json"
    truth_path = output_dir / "ground_truth.json"
    save_trace(trace, trace_path)
    save_ground_truth(truth, truth_path)

    atlas = atlas or synthetic_atlas(spec.catalog)
    manifest = save_atlas(atlas, output_dir / "atlas")
    frames_dir = None
    if render:
        frames_dir = output_dir / "frames"
        for frame in tqdm(frames, desc="Rendering frames", disable=not progress):
            write_raster(render_raster(frame, atlas), frames_dir / f"frame_{frame.index:05d}.png")
    return CorpusArtifacts(
        trace=trace,
        truth=truth,
        frames_dir=frames_dir,
        atlas_manifest=manifest,
        trace_path=trace_path,
        truth_path=truth_path,
    )


class GroundTruthDocument(BaseModel):
    version: Literal[1]
    trace_id: str
    boundaries: List[int]
    interaction_values: List[int]
    high_interaction: List[bool]
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    frames: List[FrameRecord] = Field(default_factory=list)


def save_ground_truth(truth: GroundTruth, path: Path) -> None:
    first = truth.frames[0] if truth.frames else None
    document = GroundTruthDocument(
        version=1,
        trace_id=truth.trace_id,
        boundaries=list(truth.boundaries),
        interaction_values=list(truth.interaction_values),
        high_interaction=list(truth.high_interaction),
        width=first.width if first else 1,
        height=first.height if first else 1,
        frames=[
            FrameRecord(i=f.index, instances=[tuple(i) for i in f.instances]) for f in truth.frames
        ],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(document.model_dump(mode="json"), f, indent=1)
        f.write("\n")


def load_ground_truth(path: Path) -> GroundTruth:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, stage="segment")
    try:
        document = GroundTruthDocument.model_validate(read_json_document(path))
    except pydantic.ValidationError as e:
        raise TraceFormatError(describe_validation_error(path, e)) from e
    frames = tuple(
        Frame(
            index=rec.i,
            instances=tuple(SpriteInstance(*t) for t in rec.instances),
            width=document.width,
            height=document.height,
        )
        for rec in document.frames
    )
    return GroundTruth(
        trace_id=document.trace_id,
        boundaries=tuple(document.boundaries),
        interaction_values=tuple(document.interaction_values),
        high_interaction=tuple(document.high_interaction),
        frames=frames,
    )


def _random_blueprint(
    rng: np.random.Generator,
    catalog: SpriteCatalog,
    meta: TraceMeta,
    types: List[int],
    count: int,
    top_row: int,
) -> Blueprint:
    occupied: Set[Tuple[int, int]] = set()
    placed: List[SpriteInstance] = []
    attempts = 0
    while len(placed) < count and attempts < 50 * count:
        attempts += 1
        t = int(rng.choice(types))
        entry = catalog.entries[t]
        if meta.width < entry.w or meta.height - top_row < entry.h:
            continue
        x = int(rng.integers(0, meta.width - entry.w + 1))
        y = int(rng.integers(top_row, meta.height - entry.h + 1))
        inst = SpriteInstance(t, x, y)
        cells = footprint(inst, catalog)
        if any(c in occupied for c in cells):
            continue
        occupied.update(cells)
        placed.append(inst)
    return tuple(placed)


def random_corpus_spec(
    rng_seed: int,
    n_sections: int = 12,
    catalog: Optional[SpriteCatalog] = None,
    meta: Optional[TraceMeta] = None,
    min_sprites: int = 10,
    max_sprites: int = 30,
    max_dwell: int = 60,
    walker_speed: Optional[float] = None,
    threshold: float = 0.10,
) -> CorpusSpec:
    """Seeded random blueprints and dwell counts.

    Consecutive blueprints are redrawn until they differ by more than
    ``threshold``; every blueprint has at least ``min_sprites`` sprites so a
    walker stays within the threshold when ``min_sprites`` is 9 or more.
    """
    catalog = catalog or default_catalog()
    meta = meta or TraceMeta(tile_size_px=catalog.tile_size_px)
    if min_sprites < 1 or max_sprites < min_sprites:
        raise CorpusError("Need 1 <= min_sprites <= max_sprites")
    rng = np.random.default_rng(rng_seed)
    walker_id = catalog.id_of(WALKER_NAME) if WALKER_NAME in catalog.names else None
    types = [e.id for e in catalog.entries if e.id != walker_id]
    top_row = WALKER_ROW + 1 if walker_speed is not None else 0
    # a walker standing at the same column in both frames counts as overlap
    shared = 1 if walker_speed is not None else 0
    capacity = meta.width * (meta.height - top_row)
    if capacity < min_sprites:
        raise CorpusError(f"A {meta.width}x{meta.height} frame cannot hold {min_sprites} sprites")

    blueprints: List[Blueprint] = []
    for _ in range(n_sections):
        for _attempt in range(100):
            count = int(rng.integers(min_sprites, min(max_sprites, capacity) + 1))
            blueprint = _random_blueprint(rng, catalog, meta, types, count, top_row)
            if len(blueprint) < min_sprites:
                continue
            drift = _blueprint_difference(blueprint, blueprints[-1], shared) if blueprints else 1.0
            if drift > threshold:
                break
        else:
            raise CorpusError("Could not draw a blueprint distinct from its predecessor")
        blueprints.append(blueprint)
    dwell = tuple(int(d) for d in rng.integers(1, max_dwell + 1, size=n_sections))
    return CorpusSpec(
        catalog=catalog,
        meta=meta,
        blueprints=tuple(blueprints),
        dwell=dwell,
        walker_speed=walker_speed,
        rng_seed=rng_seed,
        trace_id=f"random_{rng_seed}",
    )


def _blueprint_difference(a: Blueprint, b: Blueprint, shared: int = 0) -> float:
    """Frame difference with ``shared`` extra sprites common to both sides."""
    overlap = len(set(a) & set(b)) + shared
    return 1.0 - overlap / (max(len(a), len(b)) + shared)
