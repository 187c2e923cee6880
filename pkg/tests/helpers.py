"""Frame and section builders shared by the tests."""

from typing import Iterable, Tuple

import numpy as np

from level_synth.core.trace import Frame, LevelSection, frame_from_triples


def make_frame(
    triples: Iterable[Tuple[int, int, int]], index: int = 0, width: int = 16, height: int = 14
) -> Frame:
    return frame_from_triples(index, list(triples), width, height)


def random_frame(
    rng: np.random.Generator,
    n_types: int,
    count: int,
    index: int = 0,
    width: int = 16,
    height: int = 14,
) -> Frame:
    """Up to ``count`` distinct 1x1 instances at random cells."""
    cells = rng.choice(width * height, size=min(count, width * height), replace=False)
    triples = [(int(rng.integers(n_types)), int(c % width), int(c // width)) for c in cells]
    return make_frame(triples, index=index, width=width, height=height)


def sections_from_frames(frames, trace_id: str = "t") -> list:
    return [
        LevelSection(
            trace_id=trace_id,
            start_frame=i,
            end_frame=i,
            representative=frame.with_index(i),
        )
        for i, frame in enumerate(frames)
    ]
