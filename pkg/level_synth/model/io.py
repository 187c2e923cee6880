"""Style model files: ``{"version": 1, "model": {...}}`` JSON documents."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Tuple

import pydantic
from pydantic import BaseModel, Field

from level_synth.core.io import FrameRecord, describe_validation_error, read_json_document
from level_synth.core.sprites import SpriteCatalog, SpriteType
from level_synth.core.trace import TraceMeta, frame_from_triples
from level_synth.errors import MissingArtifactError, TraceFormatError, ValidationError
from level_synth.model.nodes import (
    DNode,
    EdgeEntry,
    EdgeProbabilityTable,
    GNode,
    LNode,
    ModelProvenance,
    NNode,
    Relation,
    ShapePair,
    SNode,
    StyleModel,
)

logger = logging.getLogger(__name__)


class RelationRecord(BaseModel):
    t: int
    corner: Tuple[int, int]
    center: Tuple[float, float]


class PairRecord(BaseModel):
    sprite_type: int
    cells: List[Tuple[int, int]]
    anchor: Tuple[int, int]
    source_section: str = ""
    relations: List[RelationRecord] = Field(default_factory=list)

    def to_pair(self) -> ShapePair:
        g = GNode(
            sprite_type=self.sprite_type,
            cells=tuple(self.cells),
            anchor=self.anchor,
            source_section=self.source_section,
        )
        d = DNode(
            relations=tuple(
                Relation(target_type=r.t, vec_corner=r.corner, vec_center=r.center)
                for r in self.relations
            )
        )
        return ShapePair(g=g, d=d)

    @classmethod
    def from_pair(cls, pair: ShapePair) -> "PairRecord":
        return cls(
            sprite_type=pair.g.sprite_type,
            cells=list(pair.g.cells),
            anchor=pair.g.anchor,
            source_section=pair.g.source_section,
            relations=[
                RelationRecord(t=r.target_type, corner=r.vec_corner, center=r.vec_center)
                for r in pair.d.relations
            ],
        )


class TableRecord(BaseModel):
    max_distance: float
    bucket_count: int
    total: int
    # (source type, target type, bucket, count, probability)
    entries: List[Tuple[int, int, int, int, float]] = Field(default_factory=list)


class SNodeRecord(BaseModel):
    id: int
    sprite_type: int
    members: List[PairRecord]
    table: TableRecord


class LNodeRecord(BaseModel):
    id: int
    s_nodes: List[int]
    n_rows: List[List[int]]
    section_ids: List[str] = Field(default_factory=list)


class ModelBody(BaseModel):
    meta: TraceMeta
    catalog: List[SpriteType]
    max_distance: float
    section_ids: List[str]
    rng_seed: int
    params: Dict[str, Any] = Field(default_factory=dict)
    n_rows: List[List[int]]
    originals: List[FrameRecord]
    s_nodes: List[SNodeRecord]
    l_nodes: List[LNodeRecord]


class ModelDocument(BaseModel):
    version: Literal[1]
    model: ModelBody


def model_to_document(model: StyleModel) -> ModelDocument:
    body = ModelBody(
        meta=model.meta,
        catalog=list(model.catalog.entries),
        max_distance=model.max_distance,
        section_ids=list(model.provenance.section_ids),
        rng_seed=model.provenance.rng_seed,
        params=dict(model.provenance.params),
        n_rows=[list(r) for r in model.n_node.rows],
        originals=[
            FrameRecord(i=f.index, instances=[tuple(i) for i in f.instances])
            for f in model.originals
        ],
        s_nodes=[
            SNodeRecord(
                id=s.id,
                sprite_type=s.sprite_type,
                members=[PairRecord.from_pair(p) for p in s.members],
                table=TableRecord(
                    max_distance=s.table.max_distance,
                    bucket_count=s.table.bucket_count,
                    total=s.table.total,
                    entries=[
                        (e.source_type, e.target_type, e.bucket, e.count, e.probability)
                        for e in s.table.entries
                    ],
                ),
            )
            for s in model.s_nodes
        ],
        l_nodes=[
            LNodeRecord(
                id=node.id,
                s_nodes=list(node.s_nodes),
                n_rows=[list(r) for r in node.n_rows],
                section_ids=list(node.section_ids),
            )
            for node in model.l_nodes
        ],
    )
    return ModelDocument(version=1, model=body)


def document_to_model(document: ModelDocument) -> StyleModel:
    body = document.model
    meta = body.meta
    catalog = SpriteCatalog(entries=tuple(body.catalog), tile_size_px=meta.tile_size_px)
    s_nodes = tuple(
        SNode(
            id=s.id,
            sprite_type=s.sprite_type,
            members=tuple(p.to_pair() for p in s.members),
            table=EdgeProbabilityTable(
                max_distance=s.table.max_distance,
                bucket_count=s.table.bucket_count,
                total=s.table.total,
                entries=tuple(
                    EdgeEntry(source_type=a, target_type=b, bucket=c, count=n, probability=p)
                    for a, b, c, n, p in s.table.entries
                ),
            ),
        )
        for s in body.s_nodes
    )
    l_nodes = tuple(
        LNode(
            id=node.id,
            s_nodes=tuple(node.s_nodes),
            n_rows=tuple(tuple(r) for r in node.n_rows),
            section_ids=tuple(node.section_ids),
        )
        for node in body.l_nodes
    )
    return StyleModel(
        catalog=catalog,
        meta=meta,
        s_nodes=s_nodes,
        l_nodes=l_nodes,
        n_node=NNode(
            rows=tuple(tuple(r) for r in body.n_rows), section_ids=tuple(body.section_ids)
        ),
        originals=tuple(
            frame_from_triples(f.i, f.instances, meta.width, meta.height) for f in body.originals
        ),
        max_distance=body.max_distance,
        provenance=ModelProvenance(
            section_ids=tuple(body.section_ids), rng_seed=body.rng_seed, params=dict(body.params)
        ),
    )


def save_model(model: StyleModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(model_to_document(model).model_dump(mode="json"), f, indent=1)
        f.write("\n")
    logger.debug(f"Saved model with {len(model.s_nodes)} S nodes to {path}")


def load_model(path: Path) -> StyleModel:
    """Load a style model file.

    Raises:
        MissingArtifactError: file does not exist
        TraceFormatError: malformed document
        SchemaVersionError: unsupported version
        ValidationError: model invariants violated
    """
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, stage="generate")
    data = read_json_document(path)
    try:
        document = ModelDocument.model_validate(data)
        return document_to_model(document)
    except pydantic.ValidationError as e:
        raise TraceFormatError(describe_validation_error(path, e)) from e
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from e
