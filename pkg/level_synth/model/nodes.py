"""Node types of the probabilistic shape model.

Observed nodes:
    GNode  a shape, i.e. a 4-connected component of same-type sprites
    DNode  vectors from one shape to every other shape of its section
    NNode  per-section sprite count rows

Latent nodes:
    SNode  a cluster of interchangeable (G, D) pairs of one sprite type,
           with an edge-probability table
    LNode  a cluster of S nodes sharing level-design rules
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from level_synth.core.sprites import SpriteCatalog
from level_synth.core.trace import Frame, TraceMeta
from level_synth.errors import ValidationError

Vec = Tuple[int, int]
EdgeKey = Tuple[int, int, int]  # (source type, target type, bucket)


@dataclass(frozen=True)
class GNode:
    """Shape geometry: cells relative to the top-left corner at ``anchor``."""

    sprite_type: int
    cells: Tuple[Vec, ...]
    anchor: Vec
    source_section: str = ""

    def __post_init__(self) -> None:
        cells = tuple(sorted((int(dx), int(dy)) for dx, dy in self.cells))
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "anchor", (int(self.anchor[0]), int(self.anchor[1])))
        if not cells:
            raise ValidationError("A shape needs at least one cell")
        if len(set(cells)) != len(cells):
            raise ValidationError("Shape cells must be distinct")
        if min(dx for dx, _ in cells) != 0 or min(dy for _, dy in cells) != 0:
            raise ValidationError("Shape cells must be normalized to the top-left corner")

    @cached_property
    def cell_set(self) -> FrozenSet[Vec]:
        return frozenset(self.cells)

    @cached_property
    def centroid(self) -> Tuple[float, float]:
        n = len(self.cells)
        return (sum(dx for dx, _ in self.cells) / n, sum(dy for _, dy in self.cells) / n)

    @property
    def center(self) -> Tuple[float, float]:
        return (self.anchor[0] + self.centroid[0], self.anchor[1] + self.centroid[1])

    @cached_property
    def size(self) -> Vec:
        """(width, height) of the bounding box."""
        return (
            max(dx for dx, _ in self.cells) + 1,
            max(dy for _, dy in self.cells) + 1,
        )

    def absolute_cells(self, anchor: Optional[Vec] = None) -> List[Vec]:
        ax, ay = anchor if anchor is not None else self.anchor
        return [(ax + dx, ay + dy) for dx, dy in self.cells]


@dataclass(frozen=True)
class Relation:
    """Vectors from a shape's corner to another shape's corner and center."""

    target_type: int
    vec_corner: Vec
    vec_center: Tuple[float, float]

    @property
    def magnitude(self) -> float:
        return math.hypot(*self.vec_corner)

    def sort_key(self) -> Tuple[int, int, int]:
        return (self.vec_corner[0], self.vec_corner[1], self.target_type)


@dataclass(frozen=True)
class DNode:
    """Relations of one shape, sorted by (dx, dy, target_type) of vec_corner."""

    relations: Tuple[Relation, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "relations", tuple(sorted(self.relations, key=Relation.sort_key)))

    def __len__(self) -> int:
        return len(self.relations)


@dataclass(frozen=True)
class ShapePair:
    g: GNode
    d: DNode

    @property
    def sprite_type(self) -> int:
        return self.g.sprite_type


@dataclass(frozen=True)
class NNode:
    """Sprite count rows, one per source section."""

    rows: Tuple[Tuple[int, ...], ...]
    section_ids: Tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(tuple(int(v) for v in r) for r in self.rows))
        object.__setattr__(self, "section_ids", tuple(self.section_ids))
        if len(self.rows) != len(self.section_ids):
            raise ValidationError("NNode needs one section id per row")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=np.int64)

    def row_of(self, section_id: str) -> Tuple[int, ...]:
        return self.rows[self.section_ids.index(section_id)]


@dataclass(frozen=True)
class EdgeEntry:
    source_type: int
    target_type: int
    bucket: int
    count: int
    probability: float

    @property
    def key(self) -> EdgeKey:
        return (self.source_type, self.target_type, self.bucket)


@dataclass(frozen=True)
class EdgeProbabilityTable:
    """Frequency of (source type, target type, distance bucket) relations."""

    max_distance: float
    bucket_count: int = 100
    total: int = 0
    entries: Tuple[EdgeEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(sorted(self.entries, key=lambda e: e.key)))

    @cached_property
    def _lookup(self) -> Dict[EdgeKey, float]:
        return {entry.key: entry.probability for entry in self.entries}

    def bucket_of(self, magnitude: float) -> int:
        if self.max_distance <= 0:
            return 0
        bucket = int(math.floor(self.bucket_count * magnitude / self.max_distance))
        return min(bucket, self.bucket_count - 1)

    def probability(self, source_type: int, target_type: int, bucket: int) -> float:
        return self._lookup.get((source_type, target_type, bucket), 0.0)

    def probability_of(self, source_type: int, relation: Relation) -> float:
        bucket = self.bucket_of(relation.magnitude)
        return self.probability(source_type, relation.target_type, bucket)

    def nonzero_keys(self) -> FrozenSet[EdgeKey]:
        return frozenset(entry.key for entry in self.entries if entry.probability > 0)

    def min_probability(self) -> Optional[float]:
        values = [entry.probability for entry in self.entries if entry.probability > 0]
        return min(values) if values else None

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SNode:
    id: int
    sprite_type: int
    members: Tuple[ShapePair, ...]
    table: EdgeProbabilityTable

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError(f"SNode {self.id} has no members")
        if any(m.sprite_type != self.sprite_type for m in self.members):
            raise ValidationError(f"SNode {self.id} mixes sprite types")


@dataclass(frozen=True)
class LNode:
    id: int
    s_nodes: Tuple[int, ...]
    n_rows: Tuple[Tuple[int, ...], ...]
    section_ids: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "s_nodes", tuple(self.s_nodes))
        object.__setattr__(self, "n_rows", tuple(tuple(int(v) for v in r) for r in self.n_rows))
        object.__setattr__(self, "section_ids", tuple(self.section_ids))
        if not self.s_nodes:
            raise ValidationError(f"LNode {self.id} has no S nodes")
        if not self.n_rows:
            raise ValidationError(f"LNode {self.id} has no N rows")


@dataclass(frozen=True)
class ModelProvenance:
    section_ids: Tuple[str, ...]
    rng_seed: int
    params: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class StyleModel:
    """Assembled model plus the original sections it was learned from."""

    catalog: SpriteCatalog
    meta: TraceMeta
    s_nodes: Tuple[SNode, ...]
    l_nodes: Tuple[LNode, ...]
    n_node: NNode
    originals: Tuple[Frame, ...]
    max_distance: float
    provenance: ModelProvenance

    def __post_init__(self) -> None:
        for name in ("s_nodes", "l_nodes", "originals"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        ids = [s.id for s in self.s_nodes]
        if ids != list(range(len(ids))):
            raise ValidationError("SNode ids must be dense 0..n-1")
        owners: Dict[int, int] = {}
        for l_node in self.l_nodes:
            for s_id in l_node.s_nodes:
                if s_id in owners:
                    raise ValidationError(f"SNode {s_id} belongs to more than one LNode")
                if not 0 <= s_id < len(ids):
                    raise ValidationError(f"LNode {l_node.id} references unknown SNode {s_id}")
                owners[s_id] = l_node.id
        if len(owners) != len(ids):
            raise ValidationError("Every SNode must belong to exactly one LNode")

    @property
    def width(self) -> int:
        return self.meta.width

    @property
    def height(self) -> int:
        return self.meta.height

    def s_node(self, s_id: int) -> SNode:
        return self.s_nodes[s_id]

    def l_node(self, l_id: int) -> LNode:
        for l_node in self.l_nodes:
            if l_node.id == l_id:
                return l_node
        raise KeyError(f"Model has no LNode {l_id}")

    def s_nodes_of_type(self, sprite_type: int, l_node_id: Optional[int] = None) -> List[SNode]:
        allowed = None if l_node_id is None else set(self.l_node(l_node_id).s_nodes)
        return [
            s
            for s in self.s_nodes
            if s.sprite_type == sprite_type and (allowed is None or s.id in allowed)
        ]

    def n_rows(self, l_node_id: Optional[int] = None) -> np.ndarray:
        if l_node_id is None:
            return self.n_node.as_array()
        return np.asarray(self.l_node(l_node_id).n_rows, dtype=np.int64)

    def min_table_probability(self) -> Optional[float]:
        values = [p for s in self.s_nodes if (p := s.table.min_probability()) is not None]
        return min(values) if values else None
