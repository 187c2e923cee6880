"""Tests for synthetic corpora, ground truth and the treetop fixture."""

import itertools

import pytest

from level_synth.analysis.segmentation import segment_trace
from level_synth.core.io import load_trace
from level_synth.core.sprites import SpriteInstance, default_catalog
from level_synth.core.trace import TraceMeta, is_duplicate
from level_synth.errors import CorpusError, MissingArtifactError
from level_synth.synthetic.corpus import (
    CorpusSpec,
    build_corpus,
    high_interaction_flags,
    load_ground_truth,
    random_corpus_spec,
)
from level_synth.synthetic.treetop import treetop_corpus

CATALOG = default_catalog()
GROUND, BLOCK, COIN, PIPE = (CATALOG.id_of(n) for n in ("ground", "block", "coin", "pipe"))

THREE_BLUEPRINTS = (
    tuple(SpriteInstance(GROUND, x, 13) for x in range(16)),
    tuple(SpriteInstance(BLOCK, x, 0) for x in range(6)),
    tuple(SpriteInstance(COIN, x, 5) for x in range(3)),
)


def _spec(blueprints=THREE_BLUEPRINTS, dwell=(10, 50, 10), **kwargs):
    return CorpusSpec(
        catalog=CATALOG, meta=TraceMeta(), blueprints=blueprints, dwell=dwell, **kwargs
    )


def test_dwell_counts_become_interaction_values():
    artifacts = build_corpus(_spec())
    truth = artifacts.truth
    assert len(artifacts.trace) == 70
    assert truth.boundaries == (0, 10, 60)
    assert truth.section_ends == [9, 59, 69]
    assert truth.high_interaction == (False, True, False)

    sections = segment_trace(artifacts.trace).sections
    assert tuple(s.start_frame for s in sections) == truth.boundaries
    assert tuple(s.interaction_value for s in sections) == truth.interaction_values


def test_high_interaction_flags():
    assert high_interaction_flags([7, 7]) == [False, False]
    assert high_interaction_flags([10, 11]) == [False, True]
    assert high_interaction_flags([10, 50, 10]) == [False, True, False]


def test_indistinguishable_neighbours_are_rejected():
    with pytest.raises(CorpusError, match="differs from the previous"):
        build_corpus(_spec(blueprints=THREE_BLUEPRINTS[:1] * 2, dwell=(3, 3)))


@pytest.mark.parametrize(
    "blueprints, dwell",
    [
        ((), ()),
        (THREE_BLUEPRINTS, (1, 2)),
        (THREE_BLUEPRINTS, (1, 0, 1)),
        (((SpriteInstance(GROUND, 16, 0),),), (1,)),
        (((SpriteInstance(PIPE, 15, 0),),), (1,)),
        (((SpriteInstance(PIPE, 0, 0), SpriteInstance(GROUND, 1, 1)),), (1,)),
        (((),), (1,)),
        (((SpriteInstance(99, 0, 0),),), (1,)),
    ],
)
def test_invalid_specs(blueprints, dwell):
    with pytest.raises(CorpusError):
        _spec(blueprints=blueprints, dwell=dwell)


def test_walker_constraints():
    with pytest.raises(CorpusError, match="reserved for the walker"):
        _spec(blueprints=(THREE_BLUEPRINTS[1],), dwell=(1,), walker_speed=0.5)
    with pytest.raises(CorpusError):
        _spec(blueprints=(THREE_BLUEPRINTS[0],), dwell=(1,), walker_speed=-1.0)


def test_walker_keeps_sections_whole():
    spec = _spec(blueprints=(THREE_BLUEPRINTS[0],), dwell=(12,), walker_speed=1.0)
    artifacts = build_corpus(spec)
    walker = CATALOG.id_of("walker")
    positions = [
        next(i.x for i in f.instances if i.type_id == walker) for f in artifacts.trace.frames
    ]
    assert positions == list(range(12))
    assert len(segment_trace(artifacts.trace).sections) == 1


def test_random_corpus_is_seeded():
    assert random_corpus_spec(5, n_sections=4) == random_corpus_spec(5, n_sections=4)
    assert random_corpus_spec(5, n_sections=4) != random_corpus_spec(6, n_sections=4)


def test_random_corpus_bad_sprite_range():
    with pytest.raises(CorpusError):
        random_corpus_spec(0, min_sprites=5, max_sprites=4)


@pytest.mark.parametrize("walker_speed", [None, 0.5])
def test_segmentation_recovers_ground_truth(walker_speed):
    for seed in range(8):
        spec = random_corpus_spec(seed, n_sections=6, max_dwell=8, walker_speed=walker_speed)
        artifacts = build_corpus(spec)
        sections = segment_trace(artifacts.trace).sections
        assert tuple(s.start_frame for s in sections) == artifacts.truth.boundaries
        assert tuple(s.interaction_value for s in sections) == artifacts.truth.interaction_values


def test_written_artifacts(tmp_path):
    spec = random_corpus_spec(3, n_sections=3, max_dwell=3)
    artifacts = build_corpus(spec, output_dir=tmp_path)
    assert load_trace(artifacts.trace_path) == artifacts.trace
    assert load_ground_truth(artifacts.truth_path) == artifacts.truth
    assert artifacts.atlas_manifest.exists()
    pngs = sorted(artifacts.frames_dir.glob("frame_*.png"))
    assert len(pngs) == spec.frame_count
    assert pngs[0].name == "frame_00000.png"


def test_rasters_are_optional(tmp_path):
    artifacts = build_corpus(random_corpus_spec(3, n_sections=2), output_dir=tmp_path, render=False)
    assert artifacts.frames_dir is None
    assert not (tmp_path / "frames").exists()


def test_missing_ground_truth(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_ground_truth(tmp_path / "ground_truth.json")


def test_treetop_fixture_shape(treetop_spec):
    canopy = treetop_spec.catalog.id_of("canopy")
    assert len(treetop_spec.blueprints) == 17
    assert set(treetop_spec.dwell) == {40}
    for blueprint in treetop_spec.blueprints:
        assert sum(1 for i in blueprint if i.type_id == canopy) == 12


def test_treetop_sections_are_distinct(treetop_frames):
    for a, b in itertools.combinations(treetop_frames, 2):
        assert not is_duplicate(a, b)


def test_treetop_corpus_marks_fixture_sections():
    spec = treetop_corpus(filler_dwell=5, high_dwell=40)
    artifacts = build_corpus(spec)
    flags = artifacts.truth.high_interaction
    assert len(flags) == 35
    assert [i for i, high in enumerate(flags) if high] == list(range(1, 35, 2))
