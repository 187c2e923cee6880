"""Assembly of the style model from a cluster of level sections."""

import logging
from collections import Counter, defaultdict
from typing import Dict, List, Optional, Sequence

import numpy as np

from level_synth.analysis.clustering import kmedoids_auto
from level_synth.analysis.segmentation import count_vector
from level_synth.core.sprites import SpriteCatalog
from level_synth.core.trace import LevelSection, TraceMeta
from level_synth.errors import ValidationError
from level_synth.model.nodes import (
    EdgeEntry,
    EdgeProbabilityTable,
    LNode,
    ModelProvenance,
    NNode,
    ShapePair,
    SNode,
    StyleModel,
)
from level_synth.model.shapes import build_pairs, gd_distance_matrix
from level_synth.pipeline.config import ModelParams

logger = logging.getLogger(__name__)


def max_relation_distance(pairs: Sequence[ShapePair]) -> float:
    """Largest |vec_corner| over every relation of the population."""
    return max((r.magnitude for p in pairs for r in p.d.relations), default=0.0)


def build_edge_probability_table(
    members: Sequence[ShapePair], max_distance: float, bucket_count: int = 100
) -> EdgeProbabilityTable:
    """Frequency table of (source type, target type, bucket) over members' relations.

    Each entry is its occurrence count divided by the total number of
    relations across all members.

    Raises:
        ValidationError: max_distance is 0 while some relation vector is not
    """
    counts: Counter = Counter()
    probe = EdgeProbabilityTable(max_distance=max_distance, bucket_count=bucket_count)
    for pair in members:
        for relation in pair.d.relations:
            if max_distance <= 0 and relation.magnitude > 0:
                raise ValidationError("max_distance is 0 but a relation vector is not")
            bucket = probe.bucket_of(relation.magnitude)
            counts[(pair.sprite_type, relation.target_type, bucket)] += 1
    total = sum(counts.values())
    entries = tuple(
        EdgeEntry(
            source_type=key[0],
            target_type=key[1],
            bucket=key[2],
            count=count,
            probability=count / total,
        )
        for key, count in counts.items()
    )
    return EdgeProbabilityTable(
        max_distance=max_distance, bucket_count=bucket_count, total=total, entries=entries
    )


def derive_s_nodes(
    pairs_by_type: Dict[int, List[ShapePair]],
    max_distance: float,
    params: Optional[ModelParams] = None,
    rng_seed: int = 0,
) -> List[SNode]:
    """Cluster each type's (G, D) pairs into S nodes with k-medoids.

    K per type comes from the distortion ratio with an effective
    dimensionality of ``params.s_dimensionality``. S node ids run in
    sprite-type order.
    """
    params = params or ModelParams()
    s_nodes: List[SNode] = []
    for sprite_type in sorted(pairs_by_type):
        pairs = pairs_by_type[sprite_type]
        if not pairs:
            continue
        if len(pairs) == 1:
            groups = [list(pairs)]
        else:
            distances, _ = gd_distance_matrix(pairs, params.shape_weight)
            result = kmedoids_auto(
                distances,
                params.s_k_max,
                rng_seed,
                dimensionality=params.s_dimensionality,
                fk_threshold=params.fk_threshold,
                n_init=params.n_init,
            )
            groups = [[pairs[i] for i in result.members(j)] for j in range(result.k)]
        for members in groups:
            table = build_edge_probability_table(members, max_distance, params.bucket_count)
            s_nodes.append(
                SNode(id=len(s_nodes), sprite_type=sprite_type, members=tuple(members), table=table)
            )
        logger.debug(f"Type {sprite_type}: {len(pairs)} pairs -> {len(groups)} S nodes")
    return s_nodes


def table_signatures(s_nodes: Sequence[SNode]) -> np.ndarray:
    """Binary signature per S node over the union of non-zero table keys."""
    keys = sorted(set().union(*(s.table.nonzero_keys() for s in s_nodes)))
    index = {key: i for i, key in enumerate(keys)}
    signatures = np.zeros((len(s_nodes), len(keys)), dtype=bool)
    for row, s_node in enumerate(s_nodes):
        for key in s_node.table.nonzero_keys():
            signatures[row, index[key]] = True
    return signatures


def derive_l_nodes(
    s_nodes: Sequence[SNode],
    n_node: NNode,
    params: Optional[ModelParams] = None,
    rng_seed: int = 0,
) -> List[LNode]:
    """Cluster S nodes by the Hamming distance of their table signatures.

    The effective dimensionality for K estimation is the signature length.
    Each L node carries the N rows of the sections that contributed
    members to its S nodes, in N node order.

    Raises:
        ValidationError: no S nodes
    """
    params = params or ModelParams()
    if not s_nodes:
        raise ValidationError("Cannot derive L nodes without S nodes")

    signatures = table_signatures(s_nodes)
    if len(s_nodes) == 1 or signatures.shape[1] == 0:
        groups = [list(range(len(s_nodes)))]
    else:
        sig = signatures.astype(np.int64)
        hamming = (sig[:, None, :] != sig[None, :, :]).sum(axis=-1).astype(np.float64)
        result = kmedoids_auto(
            hamming,
            params.l_k_max,
            rng_seed,
            dimensionality=float(signatures.shape[1]),
            fk_threshold=params.fk_threshold,
            n_init=params.n_init,
        )
        groups = [result.members(j) for j in range(result.k)]

    l_nodes = []
    for l_id, members in enumerate(groups):
        sources = {p.g.source_section for i in members for p in s_nodes[i].members}
        section_ids = [sid for sid in n_node.section_ids if sid in sources]
        l_nodes.append(
            LNode(
                id=l_id,
                s_nodes=tuple(s_nodes[i].id for i in members),
                n_rows=tuple(n_node.row_of(sid) for sid in section_ids),
                section_ids=tuple(section_ids),
            )
        )
    logger.debug(f"{len(s_nodes)} S nodes -> {len(l_nodes)} L nodes")
    return l_nodes


def build_style_model(
    sections: Sequence[LevelSection],
    catalog: SpriteCatalog,
    meta: Optional[TraceMeta] = None,
    params: Optional[ModelParams] = None,
    rng_seed: int = 0,
) -> StyleModel:
    """Learn a style model from one cluster of level sections.

    Args:
        sections: Sections of one high-interaction category
        catalog: Sprite catalog shared by the sections
        meta: Frame geometry; taken from the first section when omitted
        params: Model construction parameters
        rng_seed: Seed for S and L node clustering

    Returns:
        StyleModel

    Raises:
        ValidationError: empty section list or sections of differing size
    """
    params = params or ModelParams()
    if not sections:
        raise ValidationError("Cannot build a style model from an empty section list")
    first = sections[0].representative
    if meta is None:
        meta = TraceMeta(tile_size_px=catalog.tile_size_px, width=first.width, height=first.height)
    for section in sections:
        frame = section.representative
        if (frame.width, frame.height) != (meta.width, meta.height):
            raise ValidationError(
                f"Section {section.section_id} is {frame.width}x{frame.height}, "
                f"expected {meta.width}x{meta.height}"
            )

    section_ids = [s.section_id for s in sections]
    if len(set(section_ids)) != len(section_ids):
        raise ValidationError("Section ids must be unique within a model")

    pairs_by_type: Dict[int, List[ShapePair]] = defaultdict(list)
    all_pairs: List[ShapePair] = []
    for section in sections:
        for pair in build_pairs(section.representative, section.section_id):
            pairs_by_type[pair.sprite_type].append(pair)
            all_pairs.append(pair)
    if not all_pairs:
        raise ValidationError("Sections contain no sprites")

    n_node = NNode(
        rows=tuple(tuple(count_vector(s, catalog).tolist()) for s in sections),
        section_ids=tuple(section_ids),
    )
    max_distance = max_relation_distance(all_pairs)
    s_nodes = derive_s_nodes(pairs_by_type, max_distance, params, rng_seed)
    l_nodes = derive_l_nodes(s_nodes, n_node, params, rng_seed)

    logger.info(
        f"Model: {len(sections)} sections, {len(all_pairs)} shapes, "
        f"{len(s_nodes)} S nodes, {len(l_nodes)} L nodes"
    )
    return StyleModel(
        catalog=catalog,
        meta=meta,
        s_nodes=tuple(s_nodes),
        l_nodes=tuple(l_nodes),
        n_node=n_node,
        originals=tuple(s.representative for s in sections),
        max_distance=max_distance,
        provenance=ModelProvenance(
            section_ids=tuple(section_ids),
            rng_seed=rng_seed,
            params=params.model_dump(mode="json"),
        ),
    )
