"""Tests for ASCII and PNG section renderings."""

import numpy as np
from PIL import Image

from level_synth.utils.render import (
    count_ascii_cells,
    render_ascii,
    render_png,
    render_sections,
    symbol_table,
)
from level_synth.vision.atlas import synthetic_atlas
from tests.helpers import make_frame, random_frame


def test_symbols_are_unique(catalog):
    symbols = symbol_table(catalog)
    assert len(set(symbols.values())) == len(catalog)
    assert symbols[catalog.id_of("ground")] == "g"
    assert symbols[catalog.id_of("bark")] == "a"
    assert "." not in symbols.values()


def test_ascii_grid_and_legend(catalog):
    coin = catalog.id_of("coin")
    frame = make_frame([(0, 0, 13), (0, 1, 13), (coin, 3, 3)])
    lines = render_ascii(frame, catalog).splitlines()
    assert lines[3] == "...o............"
    assert lines[13] == "gg.............."
    assert lines[14:] == ["", "g = ground", "o = coin"]
    assert render_ascii(frame, catalog, legend=False).count("\n") == 14


def test_ascii_cell_count_matches_instances(catalog):
    rng = np.random.default_rng(17)
    for _ in range(50):
        frame = random_frame(rng, 8, int(rng.integers(0, 60)))
        assert count_ascii_cells(render_ascii(frame, catalog), frame.width) == len(frame)


def test_png_dimensions(tmp_path, catalog):
    frame = make_frame([(0, x, 13) for x in range(16)] + [(catalog.id_of("pipe"), 4, 11)])
    tinted = render_png(frame, tmp_path / "tinted.png", catalog, scale=8)
    with Image.open(tinted) as img:
        assert img.size == (128, 112)
    atlas = synthetic_atlas(catalog)
    composited = render_png(frame, tmp_path / "atlas.png", catalog, atlas=atlas)
    with Image.open(composited) as img:
        assert img.size == (16 * atlas.tile_size_px, 14 * atlas.tile_size_px)


def test_render_sections(tmp_path, catalog):
    frames = [make_frame([(0, 0, 13)]), make_frame([(1, 2, 2)])]
    written = render_sections(frames, tmp_path, catalog, names=["first", "second"])
    assert [p.name for p in written] == ["first.png", "second.png"]
    assert (tmp_path / "second.txt").read_text().startswith("................\n..b")
