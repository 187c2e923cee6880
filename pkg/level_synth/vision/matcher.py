"""Template matching of raster frames against a sprite atlas."""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from tqdm import tqdm

from level_synth.core.sprites import SpriteCatalog, SpriteInstance
from level_synth.core.trace import Frame, Trace, TraceMeta
from level_synth.errors import IngestError, ValidationError
from level_synth.pipeline.config import VisionParams
from level_synth.vision.atlas import RasterFrame, SpriteAtlas, read_raster

logger = logging.getLogger(__name__)

FRAME_PATTERN = re.compile(r"^frame_(\d+)\.png$")

# cv2's masked TM_SQDIFF is computed in float32; scores within this many
# MSE units of the tolerance still count as hits during offset search.
SCROLL_SCORE_SLACK = 1.0

# Float tolerance for the exact per-cell error.
EXACT_EPS = 1e-9


def _masked_mse_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Dense MSE per opaque template pixel channel at every pixel origin."""
    rgb = template[..., :3].astype(np.float32)
    opaque = template[..., 3] > 0
    mask = np.repeat(opaque[..., None], 3, axis=2).astype(np.float32)
    scores = cv2.matchTemplate(image, rgb, cv2.TM_SQDIFF, mask=mask)
    return scores / float(opaque.sum() * 3)


def detect_scroll_offset(
    raster: RasterFrame, atlas: SpriteAtlas, tolerance: float = 0.0
) -> Tuple[int, int]:
    """Estimate the global sub-tile scroll of a frame.

    For every candidate offset (dx, dy) in [0, tile_size) counts the tile
    origins ``(dy + r*ts, dx + c*ts)`` where some template matches within
    ``tolerance`` and returns the offset with the highest count. Ties go to
    the smallest (dy, dx), so a frame without any match yields (0, 0).

    Returns:
        (dx, dy) in pixels
    """
    ts = atlas.tile_size_px
    height, width = raster.shape[:2]
    if height < ts or width < ts:
        raise ValidationError(f"Frame {width}x{height} px is smaller than one tile")

    image = np.ascontiguousarray(raster[..., :3], dtype=np.float32)
    hits = np.zeros((height, width), dtype=bool)
    for type_id, template in enumerate(atlas.templates):
        th, tw = template.shape[:2]
        if th > height or tw > width:
            continue
        scores = _masked_mse_map(image, template)
        hits[: scores.shape[0], : scores.shape[1]] |= scores <= tolerance + SCROLL_SCORE_SLACK

    best, best_count = (0, 0), 0
    for dy in range(ts):
        for dx in range(ts):
            count = int(hits[dy::ts, dx::ts].sum())
            if count > best_count:
                best, best_count = (dx, dy), count
    return best


def _grid_errors(aligned: np.ndarray, template: np.ndarray, ts: int) -> np.ndarray:
    """Exact MSE of ``template`` at every tile origin of an aligned raster."""
    th, tw = template.shape[:2]
    if th > aligned.shape[0] or tw > aligned.shape[1]:
        return np.empty((0, 0))
    windows = sliding_window_view(aligned, (th, tw, 3))[::ts, ::ts, 0]
    opaque = template[..., 3] > 0
    diff = windows - template[..., :3].astype(np.float64)
    sq = (diff * diff).sum(axis=-1)
    return (sq * opaque).sum(axis=(-2, -1)) / float(opaque.sum() * 3)


def _in_region(
    x_px: int, y_px: int, w_px: int, h_px: int, region: Tuple[int, int, int, int]
) -> bool:
    rx, ry, rw, rh = region
    return x_px < rx + rw and rx < x_px + w_px and y_px < ry + rh and ry < y_px + h_px


def match_frame(
    raster: RasterFrame,
    atlas: SpriteAtlas,
    tolerance: float = 0.0,
    offset: Optional[Tuple[int, int]] = None,
    ignore_region: Optional[Tuple[int, int, int, int]] = None,
) -> List[SpriteInstance]:
    """Recover the sprite instances of one raster frame.

    The raster is rolled by the scroll offset so that tiles line up with
    the grid, then every template is scored at every tile origin. A
    candidate is kept when its error is within ``tolerance``; candidates
    are claimed greedily by (error, type_id, row, column) and a
    multi-tile sprite claims all of its cells.

    Args:
        raster: RGBA frame
        atlas: Sprite templates
        tolerance: Max MSE per opaque template pixel channel
        offset: (dx, dy) scroll; detected when None
        ignore_region: Pixel rectangle (x, y, w, h) in raster coordinates
            whose sprites are discarded

    Returns:
        Instances sorted by (y, x, type_id)
    """
    ts = atlas.tile_size_px
    if offset is None:
        offset = detect_scroll_offset(raster, atlas, tolerance)
    dx, dy = offset

    rolled = np.roll(raster[..., :3], shift=(-dy, -dx), axis=(0, 1))
    rows, cols = raster.shape[0] // ts, raster.shape[1] // ts
    aligned = rolled[: rows * ts, : cols * ts].astype(np.float64)

    candidates = []
    for entry in atlas.catalog.entries:
        errors = _grid_errors(aligned, atlas.template(entry.id), ts)
        for r, c in zip(*np.nonzero(errors <= tolerance + EXACT_EPS)):
            r, c = int(r), int(c)
            if ignore_region is not None and _in_region(
                c * ts + dx, r * ts + dy, entry.w * ts, entry.h * ts, ignore_region
            ):
                continue
            candidates.append((float(errors[r, c]), entry.id, r, c))
    candidates.sort()

    claimed = np.zeros((rows, cols), dtype=bool)
    instances = []
    for _, type_id, r, c in candidates:
        entry = atlas.catalog.entries[type_id]
        cells = claimed[r : r + entry.h, c : c + entry.w]
        if cells.any():
            continue
        cells[:] = True
        instances.append(SpriteInstance(type_id, c, r))
    instances.sort(key=SpriteInstance.sort_key)
    return instances


def frame_index_of(path: Path) -> Optional[int]:
    found = FRAME_PATTERN.match(Path(path).name)
    return int(found.group(1)) if found else None


class FrameIngestor:
    """Turns a directory of ``frame_<index>.png`` rasters into a Trace."""

    def __init__(
        self,
        atlas: SpriteAtlas,
        meta: TraceMeta,
        params: Optional[VisionParams] = None,
        progress: bool = True,
    ):
        """Initialize the ingestor.

        Args:
            atlas: Sprite templates; its catalog becomes the trace catalog
            meta: Trace metadata; frames must be meta.width x meta.height tiles
            params: Matching configuration
            progress: Show a progress bar
        """
        if atlas.tile_size_px != meta.tile_size_px:
            raise ValidationError(
                f"Atlas tile size {atlas.tile_size_px} != trace tile size {meta.tile_size_px}"
            )
        self.atlas = atlas
        self.meta = meta
        self.params = params or VisionParams()
        self.progress = progress
        self.skipped: List[Tuple[Path, str]] = []

    def _match_file(self, index: int, path: Path) -> Optional[Frame]:
        try:
            raster = read_raster(path)
        except (OSError, ValueError) as e:
            self.skipped.append((path, str(e)))
            logger.warning(f"Skipping unreadable frame {path}: {e}")
            return None

        ts = self.meta.tile_size_px
        expected = (self.meta.height * ts, self.meta.width * ts)
        if raster.shape[:2] != expected:
            h, w = raster.shape[:2]
            reason = f"size {w}x{h} px, expected {expected[1]}x{expected[0]}"
            self.skipped.append((path, reason))
            logger.warning(f"Skipping frame {path}: {reason}")
            return None

        offset = None if self.params.detect_scroll else (0, 0)
        instances = match_frame(
            raster,
            self.atlas,
            tolerance=self.params.tolerance,
            offset=offset,
            ignore_region=self.params.ignore_region,
        )
        return Frame(
            index=index,
            instances=tuple(instances),
            width=self.meta.width,
            height=self.meta.height,
        )

    def ingest(self, directory: Path, trace_id: Optional[str] = None) -> Trace:
        """Match every frame file of ``directory``.

        Raises:
            IngestError: directory missing or holding no frame files
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise IngestError(f"Frame directory not found: {directory}")

        indexed = sorted(
            (index, path)
            for path in directory.iterdir()
            if (index := frame_index_of(path)) is not None
        )
        if not indexed:
            raise IngestError(f"no frames found in {directory}")

        self.skipped = []
        if self.params.workers > 1:
            with ThreadPoolExecutor(max_workers=self.params.workers) as pool:
                matched = list(
                    tqdm(
                        pool.map(lambda item: self._match_file(*item), indexed),
                        total=len(indexed),
                        desc="Matching frames",
                        disable=not self.progress,
                    )
                )
        else:
            matched = [
                self._match_file(index, path)
                for index, path in tqdm(indexed, desc="Matching frames", disable=not self.progress)
            ]

        frames = tuple(frame for frame in matched if frame is not None)
        if self.skipped:
            logger.info(f"Ingested {len(frames)} frames, skipped {len(self.skipped)}")
        else:
            logger.info(f"Ingested {len(frames)} frames from {directory}")
        return Trace(
            trace_id=trace_id or directory.name,
            meta=self.meta,
            catalog=self.atlas.catalog,
            frames=frames,
        )


def ingest_frames(
    directory: Path,
    atlas: SpriteAtlas,
    catalog: SpriteCatalog,
    meta: TraceMeta,
    params: Optional[VisionParams] = None,
    progress: bool = False,
) -> Trace:
    """Build a trace from a directory of raster frames.

    Raises:
        ValidationError: ``catalog`` does not describe the atlas
        IngestError: no frames found
    """
    if catalog.names != atlas.catalog.names:
        raise ValidationError("Catalog does not match the atlas sprite list")
    return FrameIngestor(atlas, meta, params=params, progress=progress).ingest(directory)
