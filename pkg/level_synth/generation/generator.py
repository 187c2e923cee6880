"""Exhaustive constraint-satisfaction generation of level sections.

Starting from every (G, D) member of every S node, shapes are added one at
a time. The next sprite type comes from the deficit against the nearest
N row; once counts are met, unsatisfied required edges (table entries with
probability >= p_E) pick the type instead. A candidate shape is only added
when more than p_C of its own relations find a matching placed shape.
A section is emitted when counts are met and no required edge is open.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

import numpy as np
from tqdm import tqdm

from level_synth.core.sprites import SpriteInstance
from level_synth.core.trace import Frame, is_duplicate
from level_synth.errors import ValidationError
from level_synth.model.nodes import ShapePair, StyleModel, Vec
from level_synth.pipeline.config import GenerationParams

logger = logging.getLogger(__name__)

PairRef = Tuple[int, int]  # (S node id, member index)
Edge = Tuple[int, int, int, float]  # (target type, dx, dy, table probability)


@dataclass(frozen=True)
class Placement:
    s_node: int
    member: int
    sprite_type: int
    anchor: Vec

    @property
    def ref(self) -> PairRef:
        return (self.s_node, self.member)


@dataclass(frozen=True)
class CandidateShape:
    """A (G, D) member with its relations weighted by its S node's table."""

    ref: PairRef
    pair: ShapePair
    edges: Tuple[Edge, ...]

    @classmethod
    def of(cls, model: StyleModel, ref: PairRef) -> "CandidateShape":
        s_node = model.s_node(ref[0])
        pair = s_node.members[ref[1]]
        edges = tuple(
            (
                r.target_type,
                r.vec_corner[0],
                r.vec_corner[1],
                s_node.table.probability_of(pair.sprite_type, r),
            )
            for r in pair.d.relations
        )
        return cls(ref=ref, pair=pair, edges=edges)

    @property
    def sprite_type(self) -> int:
        return self.pair.sprite_type

    @property
    def source(self) -> Vec:
        return self.pair.g.anchor


@dataclass(frozen=True)
class PartialSection:
    """Placements made so far, with their sprite counts and occupied cells."""

    width: int
    height: int
    counts: Tuple[int, ...]
    placements: Tuple[Placement, ...] = ()
    occupied: FrozenSet[Vec] = frozenset()

    @classmethod
    def empty(cls, model: StyleModel) -> "PartialSection":
        return cls(width=model.width, height=model.height, counts=(0,) * len(model.catalog))

    def __len__(self) -> int:
        return len(self.placements)

    @cached_property
    def key(self) -> FrozenSet[Tuple[int, int, Vec]]:
        return frozenset((p.s_node, p.member, p.anchor) for p in self.placements)

    @cached_property
    def by_type(self) -> Dict[int, Tuple[Tuple[int, Vec], ...]]:
        """Sprite type -> (placement index, anchor) of every placed shape."""
        index: Dict[int, List[Tuple[int, Vec]]] = {}
        for i, p in enumerate(self.placements):
            index.setdefault(p.sprite_type, []).append((i, p.anchor))
        return {t: tuple(v) for t, v in index.items()}

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def fits(self, pair: ShapePair, anchor: Vec) -> bool:
        """Cells in bounds and not overlapping any placed cell."""
        return self.fits_cells(pair.g.cells, anchor)

    def fits_cells(self, cells: Tuple[Vec, ...], anchor: Vec) -> bool:
        ax, ay = anchor
        for dx, dy in cells:
            x, y = ax + dx, ay + dy
            if not self.in_bounds(x, y) or (x, y) in self.occupied:
                return False
        return True

    def add(self, ref: PairRef, pair: ShapePair, anchor: Vec) -> "PartialSection":
        counts = list(self.counts)
        counts[pair.sprite_type] += len(pair.g.cells)
        return PartialSection(
            width=self.width,
            height=self.height,
            counts=tuple(counts),
            placements=self.placements + (Placement(ref[0], ref[1], pair.sprite_type, anchor),),
            occupied=self.occupied | frozenset(pair.g.absolute_cells(anchor)),
        )

    def instances(self, model: StyleModel) -> Tuple[SpriteInstance, ...]:
        out = []
        for p in self.placements:
            pair = model.s_node(p.s_node).members[p.member]
            cells = pair.g.absolute_cells(p.anchor)
            out.extend(SpriteInstance(p.sprite_type, x, y) for x, y in cells)
        return tuple(sorted(out, key=SpriteInstance.sort_key))

    def to_frame(self, model: StyleModel, index: int = 0) -> Frame:
        return Frame(
            index=index, instances=self.instances(model), width=self.width, height=self.height
        )


@dataclass(frozen=True, eq=False)
class GeneratedSection:
    frame: Frame
    placements: Tuple[Placement, ...]
    provenance: Dict[str, object] = field(default_factory=dict)

    @property
    def instances(self) -> Tuple[SpriteInstance, ...]:
        return self.frame.instances


@dataclass
class GenerationResult:
    sections: List[GeneratedSection]
    raw: List[GeneratedSection]
    expansions: int = 0
    depth_truncated: bool = False
    output_cap_hit: bool = False
    expansion_cap_hit: bool = False

    @property
    def raw_count(self) -> int:
        return len(self.raw)

    @property
    def truncated(self) -> bool:
        return self.depth_truncated or self.output_cap_hit or self.expansion_cap_hit


def _chebyshev(ax: int, ay: int, bx: int, by: int) -> int:
    return max(abs(ax - bx), abs(ay - by))


def _near(
    section: PartialSection, target_type: int, x: int, y: int, tolerance: int, skip: int = -1
) -> bool:
    """Whether a placed shape of ``target_type`` is anchored within ``tolerance`` of (x, y)."""
    return any(
        i != skip and _chebyshev(ax, ay, x, y) <= tolerance
        for i, (ax, ay) in section.by_type.get(target_type, ())
    )


def get_next_type_for_nearest_N(
    section: PartialSection, model: StyleModel, l_node_id: Optional[int] = None
) -> Tuple[Optional[int], int]:
    """Most deficient sprite type against the nearest N row.

    The nearest row minimizes the Euclidean distance to the section's
    counts (ties go to the first row). t_N is the type with the largest
    positive deficit (ties go to the lowest type id), or None when no type
    is short; d_N is the largest deficit.
    """
    rows = model.n_rows(l_node_id)
    counts = np.asarray(section.counts, dtype=np.int64)
    distances = np.sqrt(((rows - counts) ** 2).sum(axis=1))
    nearest = rows[int(np.argmin(distances))]
    deficits = nearest - counts
    t = int(np.argmax(deficits))
    d_n = int(deficits[t])
    return (t if d_n > 0 else None), d_n


def _open_edges(
    section: PartialSection, shapes: List[CandidateShape], p_E: float, tolerance: int
) -> Iterator[Tuple[float, int, int, int]]:
    """(probability, target type, x, y) of every unsatisfied required edge."""
    for i, (placed, shape) in enumerate(zip(section.placements, shapes)):
        ax, ay = placed.anchor
        for target_type, dx, dy, prob in shape.edges:
            if prob < p_E:
                continue
            if not _near(section, target_type, ax + dx, ay + dy, tolerance, skip=i):
                yield prob, target_type, ax + dx, ay + dy


def _most_probable_type(edges: List[Tuple[float, int, int, int]]) -> Optional[int]:
    best = min(((-prob, target_type) for prob, target_type, _, _ in edges), default=None)
    return None if best is None else best[1]


def get_next_required_edge_type(
    section: PartialSection, p_E: float, model: StyleModel, match_tolerance: int = 1
) -> Optional[int]:
    """Target type of the most probable unsatisfied required edge.

    Every placed pair's relations are weighted by its S node's table; a
    relation with probability >= p_E is required and is satisfied when a
    placed shape of its target type sits within ``match_tolerance``
    (Chebyshev) of the position the relation points to. Ties go to the
    lowest type id; None when every required edge is satisfied.
    """
    shapes = [CandidateShape.of(model, p.ref) for p in section.placements]
    return _most_probable_type(list(_open_edges(section, shapes, p_E, match_tolerance)))


def is_terminal(
    section: PartialSection,
    p_E: float,
    model: StyleModel,
    match_tolerance: int = 1,
    l_node_id: Optional[int] = None,
) -> bool:
    _, d_n = get_next_type_for_nearest_N(section, model, l_node_id)
    return d_n <= 0 and get_next_required_edge_type(section, p_E, model, match_tolerance) is None


def _exact_links(section: PartialSection, shape: CandidateShape, anchor: Vec) -> int:
    implied = {(t, anchor[0] + dx, anchor[1] + dy) for t, dx, dy, _ in shape.edges}
    return sum((p.sprite_type, p.anchor[0], p.anchor[1]) in implied for p in section.placements)


def _preferred_anchor(section: PartialSection, shape: CandidateShape) -> Vec:
    """Anchor satisfying the candidate's most probable relation to a placed type.

    Several placed shapes of that type, or several relations sharing the
    top probability, give several anchors. Ties prefer the anchor linking
    exactly to the most placed shapes, then one where the shape fits,
    then the source anchor, then the smallest (y, x).
    """
    usable = [edge for edge in shape.edges if edge[0] in section.by_type]
    if not section.placements or not usable:
        return shape.source
    top = max(edge[3] for edge in usable)
    anchors = {
        (ax - dx, ay - dy)
        for target_type, dx, dy, prob in usable
        if prob == top
        for _, (ax, ay) in section.by_type[target_type]
    }
    return max(
        anchors,
        key=lambda a: (
            _exact_links(section, shape, a),
            section.fits_cells(shape.pair.g.cells, a),
            a == shape.source,
            -a[1],
            -a[0],
        ),
    )


def _shifted_anchor(
    section: PartialSection, shape: CandidateShape, anchor: Vec, tolerance: int
) -> Optional[Vec]:
    """Smallest Chebyshev shift (up to ``tolerance``) at which the shape fits."""
    cells = shape.pair.g.cells
    for radius in range(tolerance + 1):
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                if max(abs(dx), abs(dy)) != radius:
                    continue
                shifted = (anchor[0] + dx, anchor[1] + dy)
                if section.fits_cells(cells, shifted):
                    return shifted
    return None


def add_according_to_closest_connection(
    section: PartialSection, ref: PairRef, model: StyleModel, match_tolerance: int = 1
) -> Optional[PartialSection]:
    """Place a (G, D) pair relative to the shapes already placed.

    The first shape goes to its source anchor. Later shapes are anchored
    so that their highest-probability relation to an already placed type
    is satisfied exactly (placed anchor minus the relation vector); without
    any relation to a placed type the source anchor is used. A colliding
    or out-of-bounds anchor is moved by the smallest Chebyshev shift up to
    ``match_tolerance``.

    Returns:
        The extended section, or None when the pair cannot be placed
    """
    shape = CandidateShape.of(model, ref)
    anchor = _shifted_anchor(section, shape, _preferred_anchor(section, shape), match_tolerance)
    if anchor is None:
        return None
    return section.add(ref, shape.pair, anchor)


def _coexistence(
    section: PartialSection, shape: CandidateShape, anchor: Vec, tolerance: int
) -> float:
    if not section.placements or not shape.edges:
        return 1.0
    ax, ay = anchor
    matched = sum(
        1 for t, dx, dy, _ in shape.edges if _near(section, t, ax + dx, ay + dy, tolerance)
    )
    return matched / len(shape.edges)


def _coexistence_bound(section: PartialSection, shape: CandidateShape) -> float:
    """Upper bound on coexistence: only relations to placed types can match."""
    if not section.placements or not shape.edges:
        return 1.0
    return sum(1 for edge in shape.edges if edge[0] in section.by_type) / len(shape.edges)


def coexist_probability(
    section: PartialSection,
    ref: PairRef,
    model: StyleModel,
    match_tolerance: int = 1,
    anchor: Optional[Vec] = None,
) -> float:
    """Fraction of the candidate's relations that find a matching placed shape.

    A relation matches when a placed shape of its target type is anchored
    within ``match_tolerance`` (Chebyshev) of the position it points to
    from ``anchor`` (by default the anchor the candidate would be placed
    at). An empty section or a candidate without relations gives 1.0; a
    candidate that cannot be placed gives 0.0.
    """
    shape = CandidateShape.of(model, ref)
    if not section.placements or not shape.edges:
        return 1.0
    if anchor is None:
        anchor = _shifted_anchor(
            section, shape, _preferred_anchor(section, shape), match_tolerance
        )
        if anchor is None:
            return 0.0
    return _coexistence(section, shape, anchor, match_tolerance)


class SectionGenerator:
    """Enumerates every section reachable from every seed pair."""

    def __init__(
        self,
        model: StyleModel,
        params: Optional[GenerationParams] = None,
        l_node_id: Optional[int] = None,
        progress: bool = False,
    ):
        """Initialize the generator.

        Args:
            model: Style model to generate from
            params: Thresholds and caps
            l_node_id: Restrict candidates and N rows to one L node
            progress: Show a progress bar over seed pairs
        """
        self.model = model
        self.params = params or GenerationParams()
        self.l_node_id = l_node_id if l_node_id is not None else self.params.l_node
        self.progress = progress

        if self.l_node_id is not None:
            try:
                allowed = set(model.l_node(self.l_node_id).s_nodes)
            except KeyError as e:
                raise ValidationError(str(e)) from e
        else:
            allowed = {s.id for s in model.s_nodes}
        self._shapes: Dict[PairRef, CandidateShape] = {}
        self._candidates: Dict[int, List[CandidateShape]] = {}
        # Distinct cell layouts per type, for deciding whether an open edge can still be met
        self._footprints: Dict[int, List[Tuple[Vec, ...]]] = {}
        for s_node in model.s_nodes:
            if s_node.id not in allowed:
                continue
            for m in range(len(s_node.members)):
                shape = CandidateShape.of(model, (s_node.id, m))
                self._shapes[shape.ref] = shape
                self._candidates.setdefault(s_node.sprite_type, []).append(shape)
                footprints = self._footprints.setdefault(s_node.sprite_type, [])
                if shape.pair.g.cells not in footprints:
                    footprints.append(shape.pair.g.cells)
        self._reset()

    def _reset(self) -> None:
        self._visited: Set[FrozenSet] = set()
        self._raw: Dict[Tuple[SpriteInstance, ...], GeneratedSection] = {}
        self._seed: PairRef = (0, 0)
        self.expansions = 0
        self.dead_ends = 0
        self.depth_truncated = False
        self.output_cap_hit = False
        self.expansion_cap_hit = False

    def seeds(self) -> List[PairRef]:
        return sorted(self._shapes)

    def _stopped(self) -> bool:
        return self.output_cap_hit or self.expansion_cap_hit

    def _reachable(self, section: PartialSection, target_type: int, x: int, y: int) -> bool:
        """Whether some shape of ``target_type`` still fits near (x, y).

        Occupied cells only grow along a branch, so an edge that no
        footprint can reach now stays open for good.
        """
        tolerance = self.params.match_tolerance
        for ay in range(y - tolerance, y + tolerance + 1):
            for ax in range(x - tolerance, x + tolerance + 1):
                for cells in self._footprints.get(target_type, ()):
                    if section.fits_cells(cells, (ax, ay)):
                        return True
        return False

    def _emit(self, section: PartialSection) -> None:
        instances = section.instances(self.model)
        if instances in self._raw:
            return
        if len(self._raw) >= self.params.max_outputs:
            self.output_cap_hit = True
            return
        trail = ";".join(
            f"{p.s_node}:{p.member}@{p.anchor[0]},{p.anchor[1]}" for p in section.placements
        )
        self._raw[instances] = GeneratedSection(
            frame=section.to_frame(self.model),
            placements=section.placements,
            provenance={
                "seed_pair": list(self._seed),
                "p_E": self.params.p_E,
                "p_C": self.params.p_C,
                "rng_seed": self.params.rng_seed,
                "trace_hash": hashlib.sha1(trail.encode()).hexdigest(),
            },
        )

    def generate(self, section: PartialSection) -> None:
        """Expand a section whose latest shape has just been placed."""
        if self._stopped() or section.key in self._visited:
            return
        self._visited.add(section.key)
        self.expansions += 1
        if self.expansions > self.params.max_expansions:
            self.expansion_cap_hit = True
            return

        p = self.params
        tolerance = p.match_tolerance
        t_n, d_n = get_next_type_for_nearest_N(section, self.model, self.l_node_id)
        shapes = [self._shapes[placed.ref] for placed in section.placements]
        open_edges = list(_open_edges(section, shapes, p.p_E, tolerance))
        if d_n <= 0 and not open_edges:
            self._emit(section)
            return
        targets = {(t, x, y) for _, t, x, y in open_edges}
        if not all(self._reachable(section, t, x, y) for t, x, y in sorted(targets)):
            self.dead_ends += 1
            return
        next_t = _most_probable_type(open_edges) if d_n <= 0 else t_n
        if len(section) >= p.max_depth:
            self.depth_truncated = True
            return

        for shape in self._candidates.get(next_t, ()):
            # Anchoring is skipped when even a perfect fit could not clear p_C
            if _coexistence_bound(section, shape) <= p.p_C:
                continue
            anchor = _shifted_anchor(
                section, shape, _preferred_anchor(section, shape), tolerance
            )
            if anchor is None or _coexistence(section, shape, anchor, tolerance) <= p.p_C:
                continue
            self.generate(section.add(shape.ref, shape.pair, anchor))
            if self._stopped():
                return

    def run(self) -> GenerationResult:
        self._reset()
        empty = PartialSection.empty(self.model)
        tolerance = self.params.match_tolerance
        for ref in tqdm(self.seeds(), desc="Seed pairs", disable=not self.progress):
            self._seed = ref
            shape = self._shapes[ref]
            anchor = _shifted_anchor(empty, shape, shape.source, tolerance)
            if anchor is not None:
                self.generate(empty.add(ref, shape.pair, anchor))
            if self._stopped():
                break

        raw = [self._raw[key] for key in sorted(self._raw)]
        if self.params.dedup:
            sections = dedup_sections(raw, self.model.originals, self.params.dedup_threshold)
        else:
            sections = list(raw)
        result = GenerationResult(
            sections=sections,
            raw=raw,
            expansions=self.expansions,
            depth_truncated=self.depth_truncated,
            output_cap_hit=self.output_cap_hit,
            expansion_cap_hit=self.expansion_cap_hit,
        )
        if result.truncated:
            logger.warning(
                f"Generation truncated (depth={self.depth_truncated}, "
                f"outputs={self.output_cap_hit}, expansions={self.expansion_cap_hit}) "
                f"after {self.expansions} expansions"
            )
        logger.info(
            f"p_E={self.params.p_E} p_C={self.params.p_C}: {len(raw)} raw, "
            f"{len(sections)} distinct "
            f"({self.expansions} expansions, {self.dead_ends} dead ends)"
        )
        return result


def dedup_sections(
    raw: List[GeneratedSection], originals: Tuple[Frame, ...], threshold: float = 0.9
) -> List[GeneratedSection]:
    """Keep sections that duplicate neither an original nor an earlier kept section."""
    kept: List[GeneratedSection] = []
    for candidate in raw:
        if any(is_duplicate(candidate.frame, original, threshold) for original in originals):
            continue
        if any(is_duplicate(candidate.frame, other.frame, threshold) for other in kept):
            continue
        kept.append(candidate)
    return kept


def generate_all(
    model: StyleModel,
    params: Optional[GenerationParams] = None,
    l_node_id: Optional[int] = None,
    progress: bool = False,
) -> GenerationResult:
    """Enumerate every section the model can produce under ``params``.

    Outputs are ordered lexicographically by their sprite lists; with
    ``params.dedup`` sections overlapping an original or an earlier output
    by ``dedup_threshold`` or more are dropped.
    """
    return SectionGenerator(model, params, l_node_id=l_node_id, progress=progress).run()
