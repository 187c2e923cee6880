"""Sprite catalog and sprite instance types."""

from typing import Dict, List, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SpriteType(BaseModel):
    """One catalog entry: a sprite type and its footprint in tiles."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(description="Dense type id", ge=0)
    name: str = Field(description="Unique sprite name", min_length=1)
    w: int = Field(default=1, description="Footprint width (tiles)", ge=1)
    h: int = Field(default=1, description="Footprint height (tiles)", ge=1)


class SpriteCatalog(BaseModel):
    """Ordered list of sprite types with dense ids 0..n-1."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[SpriteType, ...] = Field(description="Sprite types ordered by id")
    tile_size_px: int = Field(default=16, description="Tile edge length (pixels)", ge=1)

    @model_validator(mode="after")
    def validate_entries(self) -> "SpriteCatalog":
        """Check ids are dense and names unique."""
        ids = [entry.id for entry in self.entries]
        if ids != list(range(len(ids))):
            raise ValueError(f"Catalog ids must be dense 0..{len(ids) - 1}, got {ids}")
        names = [entry.name for entry in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("Catalog names must be unique")
        return self

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, type_id: object) -> bool:
        return isinstance(type_id, int) and 0 <= type_id < len(self.entries)

    def name_of(self, type_id: int) -> str:
        return self.entries[type_id].name

    def id_of(self, name: str) -> int:
        for entry in self.entries:
            if entry.name == name:
                return entry.id
        raise KeyError(f"Unknown sprite name: {name}")

    def ids_of(self, names: List[str]) -> List[int]:
        return [self.id_of(name) for name in names]

    @property
    def names(self) -> List[str]:
        return [entry.name for entry in self.entries]

    @classmethod
    def from_names(
        cls,
        names: List[str],
        sizes: Optional[Dict[str, Tuple[int, int]]] = None,
        tile_size_px: int = 16,
    ) -> "SpriteCatalog":
        """Build a catalog from names in id order.

        Args:
            names: Sprite names, position = type id
            sizes: Optional name -> (w, h) footprints; default 1x1
            tile_size_px: Tile edge length in pixels

        Returns:
            SpriteCatalog
        """
        sizes = sizes or {}
        entries = tuple(
            SpriteType(id=i, name=name, w=sizes.get(name, (1, 1))[0], h=sizes.get(name, (1, 1))[1])
            for i, name in enumerate(names)
        )
        return cls(entries=entries, tile_size_px=tile_size_px)


class SpriteInstance(NamedTuple):
    """A sprite type placed at a tile coordinate (column x, row y)."""

    type_id: int
    x: int
    y: int

    def sort_key(self) -> Tuple[int, int, int]:
        return (self.y, self.x, self.type_id)


# Freely licensable platformer vocabulary used by the synthetic corpus.
DEFAULT_SPRITE_NAMES = [
    "ground",
    "block",
    "bark",
    "canopy",
    "coin",
    "beetle",
    "shell",
    "cloud",
    "pipe",
    "walker",
]
DEFAULT_SPRITE_SIZES = {"pipe": (2, 2)}
DEFAULT_STANDABLE = ["ground", "block", "bark", "canopy", "pipe"]


def default_catalog(tile_size_px: int = 16) -> SpriteCatalog:
    """Catalog of the built-in synthetic vocabulary."""
    return SpriteCatalog.from_names(
        DEFAULT_SPRITE_NAMES, sizes=DEFAULT_SPRITE_SIZES, tile_size_px=tile_size_px
    )
