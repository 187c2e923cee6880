"""Shared fixtures for level-synth tests."""

import pytest

from level_synth.core.sprites import SpriteCatalog, default_catalog
from level_synth.core.trace import Frame, Trace, TraceMeta
from level_synth.model.builder import build_style_model
from level_synth.synthetic.treetop import treetop_fixture
from tests.helpers import make_frame, sections_from_frames


@pytest.fixture
def catalog() -> SpriteCatalog:
    return default_catalog()


@pytest.fixture
def small_catalog() -> SpriteCatalog:
    return SpriteCatalog.from_names(["ground", "block", "coin"])


@pytest.fixture
def meta() -> TraceMeta:
    return TraceMeta()


@pytest.fixture
def three_frame_trace(small_catalog, meta) -> Trace:
    frames = (
        make_frame([(0, 0, 13), (0, 1, 13), (2, 4, 9)], index=0),
        make_frame([(0, 0, 13), (1, 5, 8)], index=2),
        make_frame([], index=5),
    )
    return Trace(trace_id="three", meta=meta, catalog=small_catalog, frames=frames)


@pytest.fixture(scope="session")
def treetop_spec():
    return treetop_fixture()


@pytest.fixture(scope="session")
def treetop_frames(treetop_spec):
    return [
        Frame(index=i, instances=bp, width=treetop_spec.meta.width, height=treetop_spec.meta.height)
        for i, bp in enumerate(treetop_spec.blueprints)
    ]


@pytest.fixture(scope="session")
def treetop_model(treetop_spec, treetop_frames):
    sections = sections_from_frames(treetop_frames, trace_id="treetop")
    return build_style_model(sections, treetop_spec.catalog, treetop_spec.meta, rng_seed=7)


@pytest.fixture(scope="session")
def small_treetop_model():
    """Three treetop sections: enough for generation tests to stay quick."""
    spec = treetop_fixture(n_sections=3)
    frames = [make_frame(bp, index=i) for i, bp in enumerate(spec.blueprints)]
    return build_style_model(
        sections_from_frames(frames, "treetop"), spec.catalog, spec.meta, rng_seed=7
    )
