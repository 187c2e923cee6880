"""Tests for section segmentation, interaction values and categorization."""

import csv

import numpy as np
import pytest

from level_synth.analysis.segmentation import (
    categorize_sections,
    count_vector,
    interaction_seconds,
    interaction_values,
    largest_cluster,
    load_clusters,
    load_section_set,
    save_clusters,
    save_section_set,
    segment_trace,
    select_high_interaction,
    write_interaction_csv,
)
from level_synth.core.trace import LevelSection, Trace
from level_synth.errors import ClusteringError, MissingArtifactError, ValidationError
from level_synth.pipeline.config import ClusteringParams, SegmentationParams
from tests.helpers import make_frame

GROUND = [(0, x, 13) for x in range(16)]


def _trace(blocks, catalog, meta, trace_id="t"):
    """Trace whose frames repeat each (triples, length) block."""
    frames = []
    for triples, length in blocks:
        for _ in range(length):
            frames.append(make_frame(triples, index=len(frames)))
    return Trace(trace_id, meta, catalog, tuple(frames))


def _section(trace_id, start, value):
    frame = make_frame(GROUND, index=start)
    return LevelSection(trace_id, start, start + value - 1, frame)


def test_identical_frames_form_one_section(small_catalog, meta):
    trace = _trace([(GROUND, 25)], small_catalog, meta)
    result = segment_trace(trace)
    assert len(result) == 1
    assert result.sections[0].interaction_value == 25
    assert result.endpoints == ()


def test_three_distinct_blocks(small_catalog, meta):
    blocks = [
        (GROUND, 5),
        ([(1, x, 0) for x in range(6)], 5),
        ([(2, x, 5) for x in range(3)], 5),
    ]
    result = segment_trace(_trace(blocks, small_catalog, meta))
    assert [s.start_frame for s in result.sections] == [0, 5, 10]
    assert [s.interaction_value for s in result.sections] == [5, 5, 5]
    assert result.endpoints == (5, 10)


def test_twelve_percent_drift_opens_section(small_catalog, meta):
    before = GROUND + [(0, x, 12) for x in range(9)]
    after = before[:22] + [(1, 0, 3), (1, 1, 3), (1, 2, 3)]
    result = segment_trace(_trace([(before, 10), (after, 10)], small_catalog, meta))
    assert [s.start_frame for s in result.sections] == [0, 10]
    assert result.endpoints == ()


def test_small_drift_accumulates_against_first_frame(small_catalog, meta):
    # each frame moves one more ground tile; only the running total crosses 10%
    blocks = []
    for step in range(4):
        moved = [(0, x, 12) for x in range(step)]
        blocks.append((moved + GROUND[step:], 1))
    result = segment_trace(_trace(blocks, small_catalog, meta))
    assert [s.start_frame for s in result.sections] == [0, 2]


def test_empty_trace_is_rejected(small_catalog, meta):
    with pytest.raises(ValidationError, match="trace has no frames"):
        segment_trace(Trace("empty", meta, small_catalog, ()))


def test_blank_sections_are_dropped(small_catalog, meta):
    blocks = [(GROUND, 4), ([], 3), ([(1, 2, 2)], 4)]
    trace = _trace(blocks, small_catalog, meta)
    assert [s.start_frame for s in segment_trace(trace).sections] == [0, 7]
    kept = segment_trace(trace, SegmentationParams(drop_blank_sections=False))
    assert [s.start_frame for s in kept.sections] == [0, 4, 7]


def test_sections_partition_the_trace(small_catalog, meta):
    rng = np.random.default_rng(9)
    for _ in range(30):
        blocks = []
        for _ in range(int(rng.integers(1, 6))):
            cells = rng.choice(16 * 14, size=int(rng.integers(1, 12)), replace=False)
            triples = [(int(rng.integers(3)), int(c % 16), int(c // 16)) for c in cells]
            blocks.append((triples, int(rng.integers(1, 8))))
        trace = _trace(blocks, small_catalog, meta)
        sections = segment_trace(trace).sections
        assert sections[0].start_frame == 0
        assert sections[-1].end_frame == trace.frames[-1].index
        for a, b in zip(sections, sections[1:]):
            assert b.start_frame == a.end_frame + 1
        assert sum(s.interaction_value for s in sections) == len(trace)


def test_interaction_values_and_seconds(small_catalog, meta):
    blocks = [(GROUND, 10), ([(1, 0, 0)], 50), ([(2, 3, 3)], 10)]
    result = segment_trace(_trace(blocks, small_catalog, meta))
    assert [v for _, v in interaction_values(result)] == [10, 50, 10]
    high = select_high_interaction(result.sections)
    assert [s.start_frame for s in high] == [10]
    assert interaction_seconds(_section("t", 0, 60), fps=30) == 2.0


def test_select_high_interaction_examples():
    assert select_high_interaction([_section("t", 0, 7), _section("t", 7, 7)]) == []
    pair = [_section("t", 0, 10), _section("t", 10, 11)]
    assert select_high_interaction(pair) == [pair[1]]


def test_high_interaction_uses_per_trace_mean():
    sections = [
        _section("a", 0, 10),
        _section("a", 10, 20),
        _section("b", 0, 100),
        _section("b", 100, 200),
    ]
    assert select_high_interaction(sections) == [sections[1], sections[3]]


def test_count_vector(catalog):
    frame = make_frame([(0, 0, 13), (0, 1, 13), (4, 3, 3)], index=0)
    section = LevelSection("t", 0, 0, frame)
    counts = count_vector(section, catalog)
    assert counts.shape == (len(catalog),)
    assert counts[0] == 2 and counts[4] == 1 and counts.sum() == 3


def test_section_report_round_trip(tmp_path, small_catalog, meta):
    blocks = [(GROUND, 10), ([(1, 0, 0)], 50), ([(2, 3, 3)], 10)]
    result = segment_trace(_trace(blocks, small_catalog, meta))
    path = tmp_path / "sections_t.json"
    save_section_set(result, path)
    assert load_section_set(path) == result


def test_interaction_csv(tmp_path, small_catalog, meta):
    blocks = [(GROUND, 10), ([(1, 0, 0)], 50), ([(2, 3, 3)], 10)]
    result = segment_trace(_trace(blocks, small_catalog, meta))
    path = tmp_path / "interaction.csv"
    write_interaction_csv(result, path)
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert [r["interaction_value"] for r in rows] == ["10", "50", "10"]
    assert [r["high_interaction"] for r in rows] == ["0", "1", "0"]
    assert rows[1]["seconds"] == "1.6667"


def test_missing_section_report(tmp_path):
    with pytest.raises(MissingArtifactError):
        load_section_set(tmp_path / "missing.json")


def _grouped_sections():
    coins = [(4, x, 4) for x in range(12)]
    sections = []
    for n in range(6):
        frame = make_frame(GROUND[: 10 + n % 2], index=10 * n)
        sections.append(LevelSection("t", 10 * n, 10 * n + 9, frame))
    for n in range(6, 10):
        frame = make_frame(coins[: 10 + n % 2], index=10 * n)
        sections.append(LevelSection("t", 10 * n, 10 * n + 9, frame))
    return sections


def test_categorize_separates_count_profiles(catalog):
    sections = _grouped_sections()
    clusters = categorize_sections(sections, catalog, rng_seed=3)
    assert len(clusters) == 2
    groups = sorted(sorted(s.start_frame for s in c.sections) for c in clusters)
    assert groups == [[0, 10, 20, 30, 40, 50], [60, 70, 80, 90]]
    assert len(largest_cluster(clusters)) == 6


def test_categorize_is_deterministic(catalog):
    sections = _grouped_sections()
    a = categorize_sections(sections, catalog, rng_seed=5)
    b = categorize_sections(sections, catalog, ClusteringParams(seed=5), rng_seed=99)
    assert [c.sections for c in a] == [c.sections for c in b]


def test_categorize_requires_sections(catalog):
    with pytest.raises(ClusteringError):
        categorize_sections([], catalog)


def test_cluster_file_round_trip(tmp_path, catalog, meta):
    clusters = categorize_sections(_grouped_sections(), catalog, rng_seed=3)
    path = tmp_path / "clusters.json"
    save_clusters(clusters, meta, catalog, path)
    loaded, loaded_meta, loaded_catalog = load_clusters(path)
    assert loaded_meta == meta and loaded_catalog == catalog
    assert [c.sections for c in loaded] == [c.sections for c in clusters]
    for a, b in zip(loaded, clusters):
        np.testing.assert_allclose(a.centroid, b.centroid)
