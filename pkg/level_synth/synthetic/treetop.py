"""The treetop fixture: gap-heavy canopy platforms on bark trunks.

Every section is 16 x 14 tiles and holds three canopy platforms of total
width 12 separated by two gaps of at most 3 tiles, so a player with the
default jump envelope always gets across. Two trunks hang below the
canopies, drawn either as a thin 1 x 9 column or as a 3 x 3 stump, which
gives the bark sprites two shape families far apart in shape space.
"""

import itertools
import logging
from typing import List, Optional, Tuple

import numpy as np

from level_synth.core.sprites import SpriteCatalog, SpriteInstance, default_catalog
from level_synth.core.trace import Frame, TraceMeta, is_duplicate
from level_synth.errors import CorpusError
from level_synth.synthetic.corpus import Blueprint, CorpusSpec, random_corpus_spec

logger = logging.getLogger(__name__)

FIXTURE_SIZE = 17
FIXTURE_SEED = 7
WIDTH, HEIGHT = 16, 14
PLATFORM_ROWS = (2, 3, 4)
GAP_SPLITS = ((1, 3), (2, 2), (3, 1))
THIN_TRUNK = 9
STUMP = 3

# (platform, trunk kind) pairs, cycled over sections
TRUNK_PATTERNS = (
    ((0, "thin"), (2, "thin")),
    ((0, "stump"), (1, "stump")),
    ((1, "thin"), (2, "stump")),
)

Platform = Tuple[int, int, int]  # left column, width, row


def _width_splits() -> List[Tuple[int, int, int]]:
    return sorted(
        w for w in itertools.product(range(3, 7), repeat=3) if sum(w) == 12
    )


def platforms_of(widths: Tuple[int, int, int], gaps: Tuple[int, int], rows) -> List[Platform]:
    platforms, left = [], 0
    for i, (w, r) in enumerate(zip(widths, rows)):
        platforms.append((left, w, r))
        left += w + (gaps[i] if i < len(gaps) else 0)
    return platforms


def treetop_blueprint(
    platforms: List[Platform], pattern: int, catalog: SpriteCatalog
) -> Blueprint:
    """Canopies, trunks, one coin over each platform and a beetle on the middle one."""
    canopy, bark = catalog.id_of("canopy"), catalog.id_of("bark")
    coin, beetle = catalog.id_of("coin"), catalog.id_of("beetle")
    instances: List[SpriteInstance] = []
    for left, w, row in platforms:
        instances += [SpriteInstance(canopy, x, row) for x in range(left, left + w)]
        instances.append(SpriteInstance(coin, left + w // 2, row - 1))

    for index, kind in TRUNK_PATTERNS[pattern % len(TRUNK_PATTERNS)]:
        left, w, row = platforms[index]
        if kind == "thin":
            x = left + (w - 1) // 2
            instances += [SpriteInstance(bark, x, row + 1 + k) for k in range(THIN_TRUNK)]
        else:
            x0 = left + (w - STUMP) // 2
            instances += [
                SpriteInstance(bark, x0 + dx, row + 1 + dy)
                for dy in range(STUMP)
                for dx in range(STUMP)
            ]

    left, w, row = platforms[1]
    instances.append(SpriteInstance(beetle, left + w - 1, row - 1))
    return tuple(instances)


def treetop_sections(
    n_sections: int = FIXTURE_SIZE,
    rng_seed: int = FIXTURE_SEED,
    catalog: Optional[SpriteCatalog] = None,
) -> List[Blueprint]:
    """Pairwise non-duplicate treetop blueprints, drawn in a seeded order.

    Raises:
        CorpusError: fewer than ``n_sections`` distinct layouts exist
    """
    catalog = catalog or default_catalog()
    layouts = list(
        itertools.product(_width_splits(), GAP_SPLITS, itertools.product(PLATFORM_ROWS, repeat=3))
    )
    order = np.random.default_rng(rng_seed).permutation(len(layouts))

    chosen: List[Blueprint] = []
    frames: List[Frame] = []
    for i in order:
        widths, gaps, rows = layouts[int(i)]
        blueprint = treetop_blueprint(platforms_of(widths, gaps, rows), len(chosen), catalog)
        frame = Frame(index=0, instances=blueprint, width=WIDTH, height=HEIGHT)
        if any(is_duplicate(frame, other) for other in frames):
            continue
        chosen.append(blueprint)
        frames.append(frame)
        if len(chosen) == n_sections:
            return chosen
    raise CorpusError(f"Only {len(chosen)} distinct treetop sections exist")


def treetop_fixture(
    n_sections: int = FIXTURE_SIZE,
    rng_seed: int = FIXTURE_SEED,
    dwell: int = 40,
    walker_speed: Optional[float] = None,
) -> CorpusSpec:
    """Seventeen treetop sections, each held for ``dwell`` frames."""
    catalog = default_catalog()
    blueprints = treetop_sections(n_sections, rng_seed, catalog)
    return CorpusSpec(
        catalog=catalog,
        meta=TraceMeta(tile_size_px=catalog.tile_size_px, width=WIDTH, height=HEIGHT),
        blueprints=tuple(blueprints),
        dwell=(dwell,) * len(blueprints),
        walker_speed=walker_speed,
        rng_seed=rng_seed,
        trace_id="treetop",
    )


def treetop_corpus(
    rng_seed: int = FIXTURE_SEED,
    high_dwell: int = 40,
    filler_dwell: int = 5,
    walker_speed: Optional[float] = None,
) -> CorpusSpec:
    """Treetop sections interleaved with short random filler sections.

    The fillers are what a player scrolls past; at ``filler_dwell`` well
    below ``high_dwell`` only the treetop sections are high-interaction.
    """
    fixture = treetop_fixture(rng_seed=rng_seed, dwell=high_dwell, walker_speed=walker_speed)
    fillers = random_corpus_spec(
        rng_seed + 1,
        n_sections=len(fixture.blueprints) + 1,
        catalog=fixture.catalog,
        meta=fixture.meta,
        walker_speed=walker_speed,
    ).blueprints
    blueprints: List[Blueprint] = [fillers[0]]
    dwell: List[int] = [filler_dwell]
    for section, filler in zip(fixture.blueprints, fillers[1:]):
        blueprints += [section, filler]
        dwell += [high_dwell, filler_dwell]
    return CorpusSpec(
        catalog=fixture.catalog,
        meta=fixture.meta,
        blueprints=tuple(blueprints),
        dwell=tuple(dwell),
        walker_speed=walker_speed,
        rng_seed=rng_seed,
        trace_id="treetop_play",
    )
