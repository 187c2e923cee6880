"""Style distance: how far generated sprites must move to match an original."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from level_synth.core.trace import Frame
from level_synth.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StyleScore:
    closest_original: int
    displacement: float
    degenerate: bool = False


def _points_by_type(frame: Frame) -> Dict[int, np.ndarray]:
    grouped: Dict[int, List[Tuple[int, int]]] = {}
    for inst in frame.instances:
        grouped.setdefault(inst.type_id, []).append((inst.x, inst.y))
    return {t: np.asarray(pts, dtype=np.float64) for t, pts in grouped.items()}


def _greedy_assignment(cost: np.ndarray) -> float:
    """Repeatedly match the globally cheapest remaining pair."""
    order = np.dstack(np.unravel_index(np.argsort(cost, axis=None, kind="stable"), cost.shape))[0]
    used_rows, used_cols = set(), set()
    total = 0.0
    for r, c in order:
        if r in used_rows or c in used_cols:
            continue
        used_rows.add(r)
        used_cols.add(c)
        total += cost[r, c]
        if len(used_rows) == min(cost.shape):
            break
    return total


def displacement_total(
    generated: Frame, original: Frame, assignment_limit: int = 500
) -> float:
    """Total per-type matched displacement plus a diagonal penalty per unmatched sprite."""
    diagonal = math.hypot(original.width, original.height)
    gen, orig = _points_by_type(generated), _points_by_type(original)
    total = 0.0
    for sprite_type in set(gen) | set(orig):
        a = gen.get(sprite_type, np.empty((0, 2)))
        b = orig.get(sprite_type, np.empty((0, 2)))
        if len(a) and len(b):
            cost = cdist(a, b)
            if max(cost.shape) > assignment_limit:
                total += _greedy_assignment(cost)
            else:
                rows, cols = linear_sum_assignment(cost)
                total += float(cost[rows, cols].sum())
        total += abs(len(a) - len(b)) * diagonal
    return total


def style_distance(
    generated: Frame, originals: Sequence[Frame], assignment_limit: int = 500
) -> StyleScore:
    """Closest original and the mean displacement per generated sprite.

    For each sprite type the generated instances are optimally assigned
    to the original's instances of that type; every unmatched instance on
    either side costs the section diagonal. The total is divided by the
    generated instance count. An empty generated section scores 0 and is
    flagged degenerate.

    Raises:
        ValidationError: no originals
    """
    if not originals:
        raise ValidationError("style_distance needs at least one original")
    if len(generated) == 0:
        logger.debug("Empty generated section scored 0 (degenerate)")
        return StyleScore(closest_original=0, displacement=0.0, degenerate=True)

    best: Optional[StyleScore] = None
    for i, original in enumerate(originals):
        score = displacement_total(generated, original, assignment_limit) / len(generated)
        if best is None or score < best.displacement:
            best = StyleScore(closest_original=i, displacement=score)
    return best


def median_style(scores: Sequence[StyleScore]) -> Optional[float]:
    if not scores:
        return None
    return float(np.median([s.displacement for s in scores]))
