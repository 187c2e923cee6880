"""Playability: entry, exit and a greedy path between them.

Rows grow downward. A stand point is a solid cell with ``clearance`` free
cells above it (cells above the top edge are free). From a stand point the
player reaches any stand point 1..max_gap columns to the right that is at
most ``max_rise`` rows higher and, when ``max_drop`` is set, at most that
many rows lower.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Literal, NamedTuple, Optional, Set

from level_synth.core.sprites import SpriteCatalog
from level_synth.core.trace import Frame
from level_synth.pipeline.config import JumpEnvelope

logger = logging.getLogger(__name__)

FailureReason = Literal["no_entry", "no_exit", "no_path"]


class StandPoint(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class PlayabilityReport:
    playable: bool
    entry: Optional[StandPoint] = None
    exit: Optional[StandPoint] = None
    path: Optional[List[StandPoint]] = None
    failure_reason: Optional[FailureReason] = None
    exhaustive_playable: Optional[bool] = None


def solid_cells(
    frame: Frame, standable: Iterable[int], catalog: Optional[SpriteCatalog] = None
) -> FrozenSet[StandPoint]:
    """Cells covered by standable sprites, footprints included."""
    standable = set(standable)
    cells: Set[StandPoint] = set()
    for inst in frame.instances:
        if inst.type_id not in standable:
            continue
        w, h = (1, 1)
        if catalog is not None and inst.type_id in catalog:
            entry = catalog.entries[inst.type_id]
            w, h = entry.w, entry.h
        for dy in range(h):
            for dx in range(w):
                x, y = inst.x + dx, inst.y + dy
                if 0 <= x < frame.width and 0 <= y < frame.height:
                    cells.add(StandPoint(x, y))
    return frozenset(cells)


def stand_points(solid: FrozenSet[StandPoint], clearance: int = 2) -> List[StandPoint]:
    """Solid cells with ``clearance`` free cells above, sorted by (x, y)."""
    points = [
        cell
        for cell in solid
        if all(StandPoint(cell.x, cell.y - k) not in solid for k in range(1, clearance + 1))
    ]
    return sorted(points)


def can_reach(a: StandPoint, b: StandPoint, envelope: JumpEnvelope) -> bool:
    if not 0 < b.x - a.x <= envelope.max_gap:
        return False
    if a.y - b.y > envelope.max_rise:
        return False
    if envelope.max_drop is not None and b.y - a.y > envelope.max_drop:
        return False
    return True


def is_exit(point: StandPoint, width: int, envelope: JumpEnvelope) -> bool:
    return point.x >= width - envelope.max_gap


def greedy_path(
    points: List[StandPoint], envelope: JumpEnvelope, entry: StandPoint, width: int
) -> Optional[List[StandPoint]]:
    """Always hop to the reachable stand point furthest right.

    Ties on x prefer the higher point. x strictly increases, so the walk
    ends; the path is returned only when it ends on an exit point.
    """
    path = [entry]
    current = entry
    while True:
        reachable = [p for p in points if can_reach(current, p, envelope)]
        if not reachable:
            break
        current = max(reachable, key=lambda p: (p.x, -p.y))
        path.append(current)
    return path if is_exit(current, width, envelope) else None


def exhaustive_path(
    points: List[StandPoint], envelope: JumpEnvelope, entries: List[StandPoint], width: int
) -> Optional[List[StandPoint]]:
    """Breadth-first search over the same jump graph; shortest path or None."""
    parent: Dict[StandPoint, Optional[StandPoint]] = {e: None for e in entries}
    queue = deque(entries)
    while queue:
        current = queue.popleft()
        if is_exit(current, width, envelope):
            path = [current]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for p in points:
            if p not in parent and can_reach(current, p, envelope):
                parent[p] = current
                queue.append(p)
    return None


def is_playable(
    frame: Frame,
    envelope: Optional[JumpEnvelope] = None,
    standable: Iterable[int] = (),
    catalog: Optional[SpriteCatalog] = None,
    exhaustive: bool = True,
) -> PlayabilityReport:
    """Check entry, exit and a greedy path from an entry to an exit.

    Args:
        frame: Section to check
        envelope: Jump reach
        standable: Type ids the player can stand on
        catalog: Supplies multi-tile footprints
        exhaustive: Also run the breadth-first oracle

    Returns:
        PlayabilityReport naming the first failed condition
    """
    envelope = envelope or JumpEnvelope()
    points = stand_points(solid_cells(frame, standable, catalog), envelope.clearance)
    entries = [p for p in points if p.x < envelope.max_gap]
    exits = [p for p in points if is_exit(p, frame.width, envelope)]

    if not entries:
        return PlayabilityReport(
            playable=False, failure_reason="no_entry", exhaustive_playable=False
        )
    if not exits:
        return PlayabilityReport(
            playable=False, entry=entries[0], failure_reason="no_exit", exhaustive_playable=False
        )

    oracle = None
    if exhaustive:
        oracle = exhaustive_path(points, envelope, entries, frame.width) is not None

    for entry in entries:
        path = greedy_path(points, envelope, entry, frame.width)
        if path is not None:
            return PlayabilityReport(
                playable=True,
                entry=entry,
                exit=path[-1],
                path=path,
                exhaustive_playable=oracle,
            )
    return PlayabilityReport(
        playable=False, entry=entries[0], failure_reason="no_path", exhaustive_playable=oracle
    )
