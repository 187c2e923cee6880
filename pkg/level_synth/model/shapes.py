"""Shape extraction and the distances between (G, D) pairs."""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from level_synth.core.trace import Frame
from level_synth.errors import ShapeTypeMismatchError
from level_synth.model.nodes import DNode, GNode, Relation, ShapePair

# 4-connectivity: diagonal neighbours do not join.
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def extract_g_nodes(frame: Frame, section_id: str = "") -> List[GNode]:
    """Shapes of a frame: per sprite type, its 4-connected components.

    Returns GNodes ordered by sprite type, then by their first cell in
    row-major order.
    """
    shapes = []
    types = sorted({inst.type_id for inst in frame.instances})
    for sprite_type in types:
        grid = np.zeros((frame.height, frame.width), dtype=bool)
        for inst in frame.instances:
            if inst.type_id == sprite_type:
                grid[inst.y, inst.x] = True
        labels, count = ndimage.label(grid, structure=FOUR_CONNECTED)
        for label in range(1, count + 1):
            ys, xs = np.nonzero(labels == label)
            ax, ay = int(xs.min()), int(ys.min())
            shapes.append(
                GNode(
                    sprite_type=sprite_type,
                    cells=tuple(zip((xs - ax).tolist(), (ys - ay).tolist())),
                    anchor=(ax, ay),
                    source_section=section_id,
                )
            )
    return shapes


def relation_to(g: GNode, target: GNode) -> Relation:
    cx, cy = target.center
    return Relation(
        target_type=target.sprite_type,
        vec_corner=(target.anchor[0] - g.anchor[0], target.anchor[1] - g.anchor[1]),
        vec_center=(cx - g.anchor[0], cy - g.anchor[1]),
    )


def build_d_node(g: GNode, all_shapes: Sequence[GNode]) -> DNode:
    """Relations from ``g`` to every other shape of its section."""
    others = list(all_shapes)
    for i, shape in enumerate(others):
        if shape is g or shape == g:
            del others[i]
            break
    return DNode(relations=tuple(relation_to(g, target) for target in others))


def build_pairs(frame: Frame, section_id: str = "") -> List[ShapePair]:
    shapes = extract_g_nodes(frame, section_id)
    return [ShapePair(g=g, d=build_d_node(g, shapes)) for g in shapes]


def shape_edit_distance(g1: GNode, g2: GNode) -> int:
    """Size of the symmetric difference of two top-left aligned cell sets.

    Raises:
        ShapeTypeMismatchError: shapes of different sprite types
    """
    if g1.sprite_type != g2.sprite_type:
        raise ShapeTypeMismatchError(
            f"Cannot compare shapes of types {g1.sprite_type} and {g2.sprite_type}"
        )
    return len(g1.cell_set ^ g2.cell_set)


def d_distance(d1: DNode, d2: DNode) -> float:
    """Paired vector differences over the common prefix plus leftover magnitudes.

    Both relation lists are already sorted by (dx, dy) of vec_corner.
    """
    common = min(len(d1), len(d2))
    total = 0.0
    for r1, r2 in zip(d1.relations[:common], d2.relations[:common]):
        (x1, y1), (x2, y2) = r1.vec_corner, r2.vec_corner
        total += math.hypot(x1 - x2, y1 - y2)
    for rest in (d1.relations[common:], d2.relations[common:]):
        total += sum(r.magnitude for r in rest)
    return total


@dataclass(frozen=True)
class DistanceNorms:
    """Population maxima used to normalize the two distance components."""

    max_shape: float
    max_d: float
    shape_weight: float = 0.5


def gd_distance(p1: ShapePair, p2: ShapePair, norms: DistanceNorms) -> float:
    """Weighted, normalized combination of shape and relation distances in [0, 1].

    A zero maximum makes its component contribute 0.

    Raises:
        ShapeTypeMismatchError: pairs of different sprite types
    """
    shape = shape_edit_distance(p1.g, p2.g)
    rel = d_distance(p1.d, p2.d)
    shape_part = shape / norms.max_shape if norms.max_shape > 0 else 0.0
    rel_part = rel / norms.max_d if norms.max_d > 0 else 0.0
    return norms.shape_weight * shape_part + (1.0 - norms.shape_weight) * rel_part


def gd_distance_matrix(
    pairs: Sequence[ShapePair], shape_weight: float = 0.5
) -> Tuple[np.ndarray, DistanceNorms]:
    """Pairwise gd_distance over a same-type population, with its norms."""
    n = len(pairs)
    shape = np.zeros((n, n), dtype=np.float64)
    rel = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            shape[i, j] = shape[j, i] = shape_edit_distance(pairs[i].g, pairs[j].g)
            rel[i, j] = rel[j, i] = d_distance(pairs[i].d, pairs[j].d)
    norms = DistanceNorms(
        max_shape=float(shape.max()) if n else 0.0,
        max_d=float(rel.max()) if n else 0.0,
        shape_weight=shape_weight,
    )
    shape_part = shape / norms.max_shape if norms.max_shape > 0 else np.zeros_like(shape)
    rel_part = rel / norms.max_d if norms.max_d > 0 else np.zeros_like(rel)
    return shape_weight * shape_part + (1.0 - shape_weight) * rel_part, norms
