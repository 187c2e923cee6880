"""Tests for atlases, template matching and frame ingestion."""

import numpy as np
import pytest

from level_synth.core.trace import TraceMeta
from level_synth.errors import IngestError, MissingArtifactError, ValidationError
from level_synth.pipeline.config import VisionParams
from level_synth.synthetic.corpus import build_corpus, random_corpus_spec
from level_synth.vision.atlas import (
    SpriteAtlas,
    load_atlas,
    render_raster,
    save_atlas,
    synthetic_atlas,
    write_raster,
)
from level_synth.vision.matcher import detect_scroll_offset, ingest_frames, match_frame
from tests.helpers import make_frame, random_frame


@pytest.fixture
def atlas(catalog):
    return synthetic_atlas(catalog)


@pytest.fixture
def sample_frame(catalog):
    pipe = catalog.id_of("pipe")
    return make_frame(
        [(0, x, 13) for x in range(8)] + [(1, 3, 9), (4, 4, 7), (pipe, 10, 11), (3, 14, 2)]
    )


def test_synthetic_templates_are_distinct(atlas):
    flat = [t.tobytes() for t in atlas.templates]
    assert len(set(flat)) == len(flat)
    for template in atlas.templates:
        assert template[..., 3].any()


def test_atlas_rejects_wrong_template_size(catalog, atlas):
    templates = list(atlas.templates)
    templates[0] = templates[0][:8]
    with pytest.raises(ValidationError):
        SpriteAtlas(catalog=catalog, templates=tuple(templates))


def test_atlas_manifest_round_trip(tmp_path, atlas):
    manifest = save_atlas(atlas, tmp_path / "atlas")
    loaded = load_atlas(manifest)
    assert loaded.catalog == atlas.catalog
    for a, b in zip(loaded.templates, atlas.templates):
        np.testing.assert_array_equal(a, b)


def test_missing_atlas_manifest(tmp_path):
    with pytest.raises(MissingArtifactError, match="atlas.yaml"):
        load_atlas(tmp_path / "atlas.yaml")


def test_aligned_frame_recovers_exactly(atlas, sample_frame):
    raster = render_raster(sample_frame, atlas)
    assert detect_scroll_offset(raster, atlas) == (0, 0)
    assert tuple(match_frame(raster, atlas)) == sample_frame.instances


def test_blank_frame_has_no_instances(atlas):
    raster = render_raster(make_frame([]), atlas)
    assert detect_scroll_offset(raster, atlas) == (0, 0)
    assert match_frame(raster, atlas) == []


def test_shift_right_by_three_pixels(atlas, sample_frame):
    raster = np.roll(render_raster(sample_frame, atlas), 3, axis=1)
    assert detect_scroll_offset(raster, atlas) == (3, 0)
    assert tuple(match_frame(raster, atlas)) == sample_frame.instances


def test_scroll_offsets_recover_exactly(atlas, sample_frame):
    rng = np.random.default_rng(5)
    base = render_raster(sample_frame, atlas)
    for _ in range(6):
        dx, dy = (int(v) for v in rng.integers(0, 16, size=2))
        raster = np.roll(base, (dy, dx), axis=(0, 1))
        assert detect_scroll_offset(raster, atlas) == (dx, dy)
        assert tuple(match_frame(raster, atlas)) == sample_frame.instances


def test_noise_below_tolerance_is_ignored(atlas, sample_frame):
    rng = np.random.default_rng(3)
    raster = render_raster(sample_frame, atlas).astype(np.int16)
    noise = rng.integers(-1, 2, size=raster.shape[:2] + (3,))
    raster[..., :3] = np.clip(raster[..., :3] + noise, 0, 255)
    noisy = raster.astype(np.uint8)
    assert tuple(match_frame(noisy, atlas, tolerance=4.0)) == sample_frame.instances


def test_translation_equivariance(atlas):
    frame = make_frame([(0, x, 10) for x in range(4)] + [(4, 2, 6)])
    moved = frame.translated(3, 2)
    recovered = match_frame(render_raster(moved, atlas), atlas, offset=(0, 0))
    assert tuple(recovered) == moved.instances


def test_random_frames_round_trip(atlas, catalog):
    rng = np.random.default_rng(17)
    single_tile_types = [e.id for e in catalog.entries if e.w == 1 and e.h == 1]
    for _ in range(10):
        frame = random_frame(rng, len(single_tile_types), int(rng.integers(1, 40)))
        frame = make_frame([(single_tile_types[t], x, y) for t, x, y in frame.instances])
        raster = render_raster(frame, atlas)
        assert tuple(match_frame(raster, atlas)) == frame.instances


def test_ignore_region_drops_sprites(atlas):
    frame = make_frame([(0, 0, 0), (0, 5, 5)])
    raster = render_raster(frame, atlas)
    found = match_frame(raster, atlas, offset=(0, 0), ignore_region=(0, 0, 16, 16))
    assert [tuple(i) for i in found] == [(0, 5, 5)]


def test_frame_smaller_than_tile(atlas):
    with pytest.raises(ValidationError):
        detect_scroll_offset(np.zeros((8, 8, 4), dtype=np.uint8), atlas)


def _write_frames(directory, frames, atlas):
    for frame in frames:
        write_raster(render_raster(frame, atlas), directory / f"frame_{frame.index:05d}.png")


def test_ingest_directory(tmp_path, atlas, catalog, meta):
    rng = np.random.default_rng(2)
    frames = [random_frame(rng, 5, 12, index=i) for i in range(5)]
    _write_frames(tmp_path, frames, atlas)
    trace = ingest_frames(tmp_path, atlas, catalog, meta)
    assert list(trace.frames) == frames


def test_ingest_skips_corrupt_file(tmp_path, atlas, catalog, meta):
    rng = np.random.default_rng(4)
    frames = [random_frame(rng, 5, 12, index=i) for i in range(5)]
    _write_frames(tmp_path, frames, atlas)
    (tmp_path / "frame_00002.png").write_bytes(b"not a png")
    trace = ingest_frames(tmp_path, atlas, catalog, meta)
    assert [f.index for f in trace.frames] == [0, 1, 3, 4]


def test_ingest_empty_directory(tmp_path, atlas, catalog, meta):
    with pytest.raises(IngestError, match="no frames found"):
        ingest_frames(tmp_path, atlas, catalog, meta)


def test_ingest_in_parallel_keeps_order(tmp_path, atlas, catalog, meta):
    rng = np.random.default_rng(8)
    frames = [random_frame(rng, 5, 10, index=3 * i) for i in range(6)]
    _write_frames(tmp_path, frames, atlas)
    trace = ingest_frames(tmp_path, atlas, catalog, meta, params=VisionParams(workers=3))
    assert list(trace.frames) == frames


def test_corpus_rasters_round_trip(tmp_path):
    spec = random_corpus_spec(21, n_sections=4, max_dwell=3)
    artifacts = build_corpus(spec, output_dir=tmp_path)
    atlas = load_atlas(artifacts.atlas_manifest)
    trace = ingest_frames(artifacts.frames_dir, atlas, atlas.catalog, spec.meta)
    assert trace.frames == artifacts.trace.frames


def test_catalog_mismatch_rejected(tmp_path, atlas, small_catalog):
    with pytest.raises(ValidationError):
        ingest_frames(tmp_path, atlas, small_catalog, TraceMeta())
