"""Sprite atlas: one RGBA template per catalog entry.

Atlases are described by a YAML manifest::

    tile_size_px: 16
    sprites:
      - {name: ground, image: sprites/ground.png, w: 1, h: 1}
      - {name: pipe, image: sprites/pipe.png, w: 2, h: 2}

Image paths are relative to the manifest.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import cv2
import numpy as np
import yaml
from PIL import Image
from pydantic import BaseModel, Field

from level_synth.core.sprites import SpriteCatalog, SpriteType
from level_synth.core.trace import Frame
from level_synth.errors import MissingArtifactError, TraceFormatError, ValidationError

logger = logging.getLogger(__name__)

# RGBA pixel grid, shape (height_px, width_px, 4), dtype uint8.
RasterFrame = np.ndarray

DEFAULT_BACKGROUND = (92, 148, 252, 255)


class AtlasEntry(BaseModel):
    name: str
    image: str
    w: int = Field(default=1, ge=1)
    h: int = Field(default=1, ge=1)


class AtlasManifest(BaseModel):
    tile_size_px: int = Field(default=16, ge=1)
    sprites: List[AtlasEntry]


@dataclass(frozen=True, eq=False)
class SpriteAtlas:
    """Catalog plus one RGBA template per entry, indexed by type id."""

    catalog: SpriteCatalog
    templates: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        templates = tuple(np.ascontiguousarray(t, dtype=np.uint8) for t in self.templates)
        object.__setattr__(self, "templates", templates)
        if len(templates) != len(self.catalog):
            raise ValidationError(
                f"Atlas has {len(templates)} templates for {len(self.catalog)} catalog entries"
            )
        ts = self.catalog.tile_size_px
        for entry, template in zip(self.catalog.entries, templates):
            expected = (entry.h * ts, entry.w * ts, 4)
            if template.shape != expected:
                raise ValidationError(
                    f"Template '{entry.name}' is {template.shape}, expected {expected}"
                )
            if not (template[..., 3] > 0).any():
                raise ValidationError(f"Template '{entry.name}' has no opaque pixel")

    @property
    def tile_size_px(self) -> int:
        return self.catalog.tile_size_px

    def template(self, type_id: int) -> np.ndarray:
        return self.templates[type_id]

    def opaque_mask(self, type_id: int) -> np.ndarray:
        return self.templates[type_id][..., 3] > 0


def load_atlas(manifest_path: Path) -> SpriteAtlas:
    """Load an atlas from its YAML manifest.

    Raises:
        MissingArtifactError: manifest or an image file does not exist
        TraceFormatError: manifest is not valid
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise MissingArtifactError(manifest_path, stage="ingest")
    try:
        with open(manifest_path) as f:
            manifest = AtlasManifest.model_validate(yaml.safe_load(f) or {})
    except (yaml.YAMLError, ValueError) as e:
        raise TraceFormatError(f"{manifest_path}: invalid atlas manifest: {e}") from e

    entries = []
    templates = []
    for i, sprite in enumerate(manifest.sprites):
        image_path = manifest_path.parent / sprite.image
        if not image_path.exists():
            raise MissingArtifactError(image_path, stage="ingest")
        with Image.open(image_path) as img:
            templates.append(np.asarray(img.convert("RGBA"), dtype=np.uint8))
        entries.append(SpriteType(id=i, name=sprite.name, w=sprite.w, h=sprite.h))

    catalog = SpriteCatalog(entries=tuple(entries), tile_size_px=manifest.tile_size_px)
    logger.debug(f"Loaded atlas with {len(catalog)} sprites from {manifest_path}")
    return SpriteAtlas(catalog=catalog, templates=tuple(templates))


def save_atlas(atlas: SpriteAtlas, directory: Path) -> Path:
    """Write template PNGs and a manifest; returns the manifest path."""
    directory = Path(directory)
    sprite_dir = directory / "sprites"
    sprite_dir.mkdir(parents=True, exist_ok=True)

    sprites = []
    for entry, template in zip(atlas.catalog.entries, atlas.templates):
        rel = f"sprites/{entry.name}.png"
        Image.fromarray(template).save(directory / rel)
        sprites.append({"name": entry.name, "image": rel, "w": entry.w, "h": entry.h})

    manifest_path = directory / "atlas.yaml"
    with open(manifest_path, "w") as f:
        yaml.dump(
            {"tile_size_px": atlas.tile_size_px, "sprites": sprites},
            f,
            default_flow_style=False,
            sort_keys=False,
        )
    return manifest_path


def type_color(type_id: int) -> Tuple[int, int, int]:
    """Deterministic, well-spread RGB tint for a sprite type."""
    hue = int((type_id * 0.618033988749895 % 1.0) * 180)
    hsv = np.array([[[hue, 200, 230]]], dtype=np.uint8)
    r, g, b = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)[0, 0]
    return int(r), int(g), int(b)


def synthetic_template(type_id: int, w: int, h: int, tile_size_px: int) -> np.ndarray:
    """Flat tinted tile with a dark one-pixel border and a per-type notch.

    The border keeps every tile-misaligned window from matching, and the
    notch row makes two types with similar tints easy to tell apart.
    Corner pixels are transparent.
    """
    hp, wp = h * tile_size_px, w * tile_size_px
    rgb = np.array(type_color(type_id), dtype=np.uint8)
    template = np.zeros((hp, wp, 4), dtype=np.uint8)
    template[..., :3] = rgb
    template[..., 3] = 255

    dark = (rgb // 2).astype(np.uint8)
    template[0, :, :3] = dark
    template[-1, :, :3] = dark
    template[:, 0, :3] = dark
    template[:, -1, :3] = dark

    notch_row = 2 + type_id % max(1, hp - 4)
    template[notch_row, 2 : wp - 2, :3] = 255 - rgb

    for y, x in ((0, 0), (0, wp - 1), (hp - 1, 0), (hp - 1, wp - 1)):
        template[y, x, 3] = 0
    return template


def synthetic_atlas(catalog: SpriteCatalog) -> SpriteAtlas:
    """Build an atlas of distinct generated templates for ``catalog``."""
    templates = tuple(
        synthetic_template(entry.id, entry.w, entry.h, catalog.tile_size_px)
        for entry in catalog.entries
    )
    return SpriteAtlas(catalog=catalog, templates=templates)


def render_raster(
    frame: Frame,
    atlas: SpriteAtlas,
    background: Optional[Tuple[int, int, int, int]] = None,
) -> RasterFrame:
    """Composite a frame's sprites over an opaque background.

    Multi-tile sprites are clipped at the frame edge.
    """
    ts = atlas.tile_size_px
    fill = np.array(background or DEFAULT_BACKGROUND, dtype=np.uint8)
    raster = np.empty((frame.height * ts, frame.width * ts, 4), dtype=np.uint8)
    raster[:] = fill
    for inst in frame.instances:
        template = atlas.template(inst.type_id)
        y0, x0 = inst.y * ts, inst.x * ts
        hp = min(template.shape[0], raster.shape[0] - y0)
        wp = min(template.shape[1], raster.shape[1] - x0)
        patch = template[:hp, :wp]
        region = raster[y0 : y0 + hp, x0 : x0 + wp]
        opaque = patch[..., 3] > 0
        region[opaque, :3] = patch[opaque, :3]
    return raster


def read_raster(path: Path) -> RasterFrame:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"), dtype=np.uint8).copy()


def write_raster(raster: RasterFrame, path: Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster).save(path)
