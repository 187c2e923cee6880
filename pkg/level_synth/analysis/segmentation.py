"""Level-section segmentation, interaction values and section categorization.

A new section opens when a frame drifts more than ``boundary_threshold``
away from the current section's first frame. A boundary is also a level
endpoint when the frame differs from the one right before it by at least
``endpoint_threshold`` (a cut to black, a death screen, a level change).
"""

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pydantic
from pydantic import BaseModel, Field

from level_synth.analysis.clustering import kmeans_auto
from level_synth.core.io import describe_validation_error, read_json_document
from level_synth.core.sprites import SpriteCatalog, SpriteType
from level_synth.core.trace import (
    LevelSection,
    Trace,
    TraceMeta,
    frame_difference,
    frame_from_triples,
)
from level_synth.errors import (
    ClusteringError,
    MissingArtifactError,
    TraceFormatError,
    ValidationError,
)
from level_synth.pipeline.config import ClusteringParams, SegmentationParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SectionSet:
    """Sections of one trace plus the frame ordinals flagged as level endpoints."""

    trace_id: str
    meta: TraceMeta
    catalog: SpriteCatalog
    sections: Tuple[LevelSection, ...] = field(default_factory=tuple)
    endpoints: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sections", tuple(self.sections))
        object.__setattr__(self, "endpoints", tuple(self.endpoints))

    def __len__(self) -> int:
        return len(self.sections)

    def seconds(self, section: LevelSection) -> float:
        return section.interaction_value / self.meta.fps


def segment_trace(trace: Trace, params: Optional[SegmentationParams] = None) -> SectionSet:
    """Split a trace into level sections.

    Each section spans from its first frame to the frame before the next
    section opens, so interaction values add up to the frame span of the
    trace. Sections that open on an empty frame are dropped when
    ``params.drop_blank_sections`` is set.

    Raises:
        ValidationError: the trace has no frames
    """
    params = params or SegmentationParams()
    if not trace.frames:
        raise ValidationError("trace has no frames")

    starts = [0]
    endpoints = []
    representative = trace.frames[0]
    for pos in range(1, len(trace.frames)):
        frame = trace.frames[pos]
        if frame_difference(representative, frame) > params.boundary_threshold:
            starts.append(pos)
            if frame_difference(trace.frames[pos - 1], frame) >= params.endpoint_threshold:
                endpoints.append(frame.index)
            representative = frame

    sections = []
    for n, pos in enumerate(starts):
        first = trace.frames[pos]
        if n + 1 < len(starts):
            end = trace.frames[starts[n + 1]].index - 1
        else:
            end = trace.frames[-1].index
        if params.drop_blank_sections and len(first) == 0:
            logger.debug(f"Dropping blank section at frame {first.index}")
            continue
        sections.append(
            LevelSection(
                trace_id=trace.trace_id,
                start_frame=first.index,
                end_frame=end,
                representative=first,
            )
        )

    logger.info(
        f"Trace {trace.trace_id}: {len(sections)} sections, {len(endpoints)} endpoints "
        f"over {len(trace)} frames"
    )
    return SectionSet(
        trace_id=trace.trace_id,
        meta=trace.meta,
        catalog=trace.catalog,
        sections=tuple(sections),
        endpoints=tuple(endpoints),
    )


def interaction_values(section_set: SectionSet) -> List[Tuple[LevelSection, int]]:
    """Frames spent in each section."""
    return [(section, section.interaction_value) for section in section_set.sections]


def interaction_seconds(section: LevelSection, fps: float) -> float:
    return section.interaction_value / fps


def select_high_interaction(sections: Sequence[LevelSection]) -> List[LevelSection]:
    """Sections whose interaction value is strictly above their trace's mean.

    The mean is taken per trace_id; input order is preserved.
    """
    by_trace: Dict[str, List[int]] = defaultdict(list)
    for section in sections:
        by_trace[section.trace_id].append(section.interaction_value)
    # value > sum / n, kept in integers
    return [
        s
        for s in sections
        if s.interaction_value * len(by_trace[s.trace_id]) > sum(by_trace[s.trace_id])
    ]


def count_vector(section: LevelSection, catalog: SpriteCatalog) -> np.ndarray:
    """Per-type instance counts of the section's representative frame."""
    counts = np.zeros(len(catalog), dtype=np.int64)
    for inst in section.representative.instances:
        counts[inst.type_id] += 1
    return counts


@dataclass(frozen=True, eq=False)
class SectionCluster:
    """A category of high-interaction sections with similar sprite counts."""

    cluster_id: int
    sections: Tuple[LevelSection, ...]
    centroid: np.ndarray

    def __len__(self) -> int:
        return len(self.sections)


def categorize_sections(
    sections: Sequence[LevelSection],
    catalog: SpriteCatalog,
    params: Optional[ClusteringParams] = None,
    rng_seed: int = 0,
) -> List[SectionCluster]:
    """Cluster sections by their count vectors with k-means++.

    K is estimated with the distortion ratio up to ``params.k_max``.

    Raises:
        ClusteringError: no sections given
    """
    params = params or ClusteringParams()
    if not sections:
        raise ClusteringError("No sections to categorize")
    vectors = np.stack([count_vector(s, catalog) for s in sections]).astype(np.float64)
    seed = params.seed if params.seed is not None else rng_seed
    result = kmeans_auto(
        vectors,
        params.k_max,
        seed,
        fk_threshold=params.fk_threshold,
        n_init=params.n_init,
        max_iter=params.max_iter,
    )
    clusters = [
        SectionCluster(
            cluster_id=j,
            sections=tuple(sections[i] for i in result.members(j)),
            centroid=result.centers[j],
        )
        for j in range(result.k)
    ]
    logger.info(f"Categorized {len(sections)} sections into {len(clusters)} clusters")
    return clusters


def largest_cluster(clusters: Sequence[SectionCluster]) -> SectionCluster:
    """Largest cluster; ties go to the lowest cluster id."""
    return max(clusters, key=lambda c: (len(c), -c.cluster_id))


class SectionRecord(BaseModel):
    trace_id: str
    start_frame: int = Field(ge=0)
    end_frame: int = Field(ge=0)
    interaction_value: int = Field(ge=1)
    high_interaction: bool = False
    instances: List[Tuple[int, int, int]] = Field(default_factory=list)

    def to_section(self, meta: TraceMeta) -> LevelSection:
        frame = frame_from_triples(self.start_frame, self.instances, meta.width, meta.height)
        section = LevelSection(
            trace_id=self.trace_id,
            start_frame=self.start_frame,
            end_frame=self.end_frame,
            representative=frame,
        )
        if section.interaction_value != self.interaction_value:
            raise ValidationError(
                f"Section {section.section_id}: interaction_value {self.interaction_value} "
                f"!= end - start + 1"
            )
        return section

    @classmethod
    def from_section(cls, section: LevelSection, high: bool = False) -> "SectionRecord":
        return cls(
            trace_id=section.trace_id,
            start_frame=section.start_frame,
            end_frame=section.end_frame,
            interaction_value=section.interaction_value,
            high_interaction=high,
            instances=[tuple(i) for i in section.representative.instances],
        )


class SectionSetDocument(BaseModel):
    version: Literal[1]
    trace_id: str
    meta: TraceMeta
    catalog: List[SpriteType]
    endpoints: List[int] = Field(default_factory=list)
    sections: List[SectionRecord] = Field(default_factory=list)


class ClusterRecord(BaseModel):
    id: int
    centroid: List[float]
    sections: List[SectionRecord]


class ClusterDocument(BaseModel):
    version: Literal[1]
    meta: TraceMeta
    catalog: List[SpriteType]
    clusters: List[ClusterRecord]


def _load_document(path: Path, model: type, stage: str) -> BaseModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, stage=stage)
    data = read_json_document(path)
    try:
        return model.model_validate(data)
    except pydantic.ValidationError as e:
        raise TraceFormatError(describe_validation_error(path, e)) from e


def _write_json(document: BaseModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(document.model_dump(mode="json"), f, indent=1)
        f.write("\n")


def save_section_set(section_set: SectionSet, path: Path) -> None:
    """Write the section report: boundaries, interaction values, high flags."""
    high = {s.start_frame for s in select_high_interaction(section_set.sections)}
    document = SectionSetDocument(
        version=1,
        trace_id=section_set.trace_id,
        meta=section_set.meta,
        catalog=list(section_set.catalog.entries),
        endpoints=list(section_set.endpoints),
        sections=[
            SectionRecord.from_section(s, high=s.start_frame in high) for s in section_set.sections
        ],
    )
    _write_json(document, path)


def load_section_set(path: Path) -> SectionSet:
    document = _load_document(path, SectionSetDocument, stage="cluster")
    catalog = SpriteCatalog(
        entries=tuple(document.catalog), tile_size_px=document.meta.tile_size_px
    )
    return SectionSet(
        trace_id=document.trace_id,
        meta=document.meta,
        catalog=catalog,
        sections=tuple(r.to_section(document.meta) for r in document.sections),
        endpoints=tuple(document.endpoints),
    )


def write_interaction_csv(section_set: SectionSet, path: Path) -> None:
    """Per-section interaction values for plotting."""
    high = {s.start_frame for s in select_high_interaction(section_set.sections)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(
            f,
            fieldnames=[
                "section",
                "start_frame",
                "end_frame",
                "interaction_value",
                "seconds",
                "high_interaction",
            ],
        )
        writer.writeheader()
        for n, section in enumerate(section_set.sections):
            writer.writerow(
                {
                    "section": n,
                    "start_frame": section.start_frame,
                    "end_frame": section.end_frame,
                    "interaction_value": section.interaction_value,
                    "seconds": f"{section_set.seconds(section):.4f}",
                    "high_interaction": int(section.start_frame in high),
                }
            )


def save_clusters(
    clusters: Sequence[SectionCluster], meta: TraceMeta, catalog: SpriteCatalog, path: Path
) -> None:
    document = ClusterDocument(
        version=1,
        meta=meta,
        catalog=list(catalog.entries),
        clusters=[
            ClusterRecord(
                id=c.cluster_id,
                centroid=[float(v) for v in c.centroid],
                sections=[SectionRecord.from_section(s, high=True) for s in c.sections],
            )
            for c in clusters
        ],
    )
    _write_json(document, path)


def load_clusters(path: Path) -> Tuple[List[SectionCluster], TraceMeta, SpriteCatalog]:
    document = _load_document(path, ClusterDocument, stage="model")
    catalog = SpriteCatalog(
        entries=tuple(document.catalog), tile_size_px=document.meta.tile_size_px
    )
    clusters = [
        SectionCluster(
            cluster_id=record.id,
            sections=tuple(r.to_section(document.meta) for r in record.sections),
            centroid=np.asarray(record.centroid, dtype=np.float64),
        )
        for record in document.clusters
    ]
    return clusters, document.meta, catalog
