"""ASCII and PNG renderings of sections."""

import logging
import string
from pathlib import Path
from typing import Dict, List, Optional

import cv2
import numpy as np

from level_synth.core.sprites import SpriteCatalog
from level_synth.core.trace import Frame
from level_synth.vision.atlas import DEFAULT_BACKGROUND, SpriteAtlas, render_raster, type_color

logger = logging.getLogger(__name__)

EMPTY_CELL = "."
_FALLBACK_SYMBOLS = string.ascii_uppercase + string.digits + string.ascii_lowercase


def symbol_table(catalog: SpriteCatalog) -> Dict[int, str]:
    """One character per type: the name's initial when free, otherwise the next unused one."""
    used = {EMPTY_CELL}
    symbols = {}
    for entry in catalog.entries:
        preferred = [c for c in entry.name.lower() if c.isalnum()] + list(_FALLBACK_SYMBOLS)
        symbol = next(c for c in preferred if c not in used)
        used.add(symbol)
        symbols[entry.id] = symbol
    return symbols


def render_ascii(frame: Frame, catalog: SpriteCatalog, legend: bool = True) -> str:
    """One character per tile, one non-empty cell per instance.

    Multi-tile sprites mark only their anchor cell. When two instances
    share a cell the one with the higher type id is shown.
    """
    symbols = symbol_table(catalog)
    grid = [[EMPTY_CELL] * frame.width for _ in range(frame.height)]
    for inst in frame.instances:
        grid[inst.y][inst.x] = symbols[inst.type_id]
    lines = ["".join(row) for row in grid]
    if legend:
        present = sorted({inst.type_id for inst in frame.instances})
        lines.append("")
        lines += [f"{symbols[t]} = {catalog.name_of(t)}" for t in present]
    return "\n".join(lines) + "\n"


def count_ascii_cells(text: str, width: int) -> int:
    """Non-empty cells of the grid part of ``render_ascii`` output."""
    cells = 0
    for line in text.splitlines():
        if len(line) != width or " " in line:
            break
        cells += sum(1 for c in line if c != EMPTY_CELL)
    return cells


def _tinted(frame: Frame, catalog: SpriteCatalog, scale: int) -> np.ndarray:
    bg = DEFAULT_BACKGROUND
    image = np.empty((frame.height * scale, frame.width * scale, 3), dtype=np.uint8)
    image[:] = (bg[2], bg[1], bg[0])
    for inst in frame.instances:
        entry = catalog.entries[inst.type_id]
        r, g, b = type_color(inst.type_id)
        top_left = (inst.x * scale, inst.y * scale)
        bottom_right = ((inst.x + entry.w) * scale - 1, (inst.y + entry.h) * scale - 1)
        cv2.rectangle(image, top_left, bottom_right, (b, g, r), thickness=-1)
        cv2.rectangle(image, top_left, bottom_right, (b // 2, g // 2, r // 2), thickness=1)
    return image


def render_png(
    frame: Frame,
    path: Path,
    catalog: SpriteCatalog,
    atlas: Optional[SpriteAtlas] = None,
    scale: int = 16,
) -> Path:
    """Write a PNG of the section.

    With an atlas the sprites are composited from their templates;
    otherwise each type is drawn as a deterministic tinted block.
    """
    if atlas is not None:
        image = cv2.cvtColor(render_raster(frame, atlas), cv2.COLOR_RGBA2BGR)
    else:
        image = _tinted(frame, catalog, scale)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), image):
        raise OSError(f"Could not write {path}")
    return path


def render_sections(
    frames: List[Frame],
    output_dir: Path,
    catalog: SpriteCatalog,
    atlas: Optional[SpriteAtlas] = None,
    names: Optional[List[str]] = None,
) -> List[Path]:
    """``<name>.txt`` and ``<name>.png`` for each frame."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        name = names[i] if names else f"section_{i}"
        (output_dir / f"{name}.txt").write_text(render_ascii(frame, catalog))
        written.append(render_png(frame, output_dir / f"{name}.png", catalog, atlas))
    logger.info(f"Rendered {len(frames)} sections to {output_dir}")
    return written
