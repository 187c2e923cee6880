"""Configuration management for the level-synth pipeline."""

from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from level_synth.core.sprites import DEFAULT_STANDABLE


class VisionParams(BaseModel):
    """Sprite template matching configuration."""

    tolerance: float = Field(
        default=0.0,
        description="Max mean-squared error per opaque template pixel channel. 0 = exact match.",
        ge=0,
    )
    detect_scroll: bool = Field(
        default=True, description="Estimate the global scroll offset of each frame"
    )
    ignore_region: Optional[Tuple[int, int, int, int]] = Field(
        default=None,
        description="Pixel rectangle (x, y, w, h) excluded from matching, e.g. a HUD",
    )
    background: Tuple[int, int, int, int] = Field(
        default=(92, 148, 252, 255), description="RGBA fill used when rendering rasters"
    )
    workers: int = Field(default=1, description="Frames matched in parallel", ge=1)

    @field_validator("ignore_region")
    @classmethod
    def validate_region(
        cls, v: Optional[Tuple[int, int, int, int]]
    ) -> Optional[Tuple[int, int, int, int]]:
        """Validate that the ignore region has a positive size."""
        if v is not None and (v[2] <= 0 or v[3] <= 0):
            raise ValueError("ignore_region width and height must be positive")
        return v


class SegmentationParams(BaseModel):
    """Level-section boundary detection."""

    boundary_threshold: float = Field(
        default=0.10,
        description="Frame difference from the section's first frame that opens a new section",
        gt=0,
        le=1,
    )
    endpoint_threshold: float = Field(
        default=1.0,
        description="Frame difference from the previous frame that flags a level endpoint",
        gt=0,
        le=1,
    )
    drop_blank_sections: bool = Field(
        default=True, description="Drop sections whose first frame is empty (blackouts)"
    )

    @model_validator(mode="after")
    def validate_order(self) -> "SegmentationParams":
        """Validate that boundary_threshold <= endpoint_threshold."""
        if self.boundary_threshold > self.endpoint_threshold:
            raise ValueError("boundary_threshold must be <= endpoint_threshold")
        return self


class ClusteringParams(BaseModel):
    """High-interaction section categorization."""

    k_max: int = Field(default=8, description="Largest K tried by the distortion ratio", ge=1)
    fk_threshold: float = Field(
        default=0.85, description="f(K) value below which K is accepted", gt=0
    )
    n_init: int = Field(default=10, description="Seeded restarts per K", ge=1)
    max_iter: int = Field(default=100, description="Lloyd iteration cap", ge=1)
    seed: Optional[int] = Field(
        default=None, description="Clustering seed (defaults to the pipeline seed)"
    )


class ModelParams(BaseModel):
    """Probabilistic shape model construction."""

    s_k_max: int = Field(default=8, description="Largest K for S-node clustering per type", ge=1)
    l_k_max: int = Field(default=8, description="Largest K for L-node clustering", ge=1)
    shape_weight: float = Field(
        default=0.5,
        description="Weight of the shape edit distance in the (G, D) distance; D gets 1 - weight",
        ge=0,
        le=1,
    )
    bucket_count: int = Field(default=100, description="Distance buckets per table", ge=1)
    s_dimensionality: float = Field(
        default=2.0, description="Effective dimensionality for S-node K estimation", gt=0
    )
    fk_threshold: float = Field(default=0.85, description="f(K) acceptance threshold", gt=0)
    n_init: int = Field(default=10, description="Seeded restarts per K", ge=1)
    cluster: Optional[int] = Field(
        default=None,
        description="Which section cluster to model; None = the largest cluster",
    )
    seed: Optional[int] = Field(default=None, description="Model seed (defaults to pipeline seed)")


class GenerationParams(BaseModel):
    """Constraint-satisfaction section generator."""

    p_E: float = Field(
        default=0.1, description="Required-edge probability threshold (style variance)", gt=0, le=1
    )
    p_C: float = Field(
        default=0.8, description="Coexistence threshold (playability)", ge=0, le=1
    )
    max_depth: int = Field(default=64, description="Recursion depth cap", ge=1)
    max_outputs: int = Field(default=10000, description="Raw output cap", ge=1)
    max_expansions: int = Field(
        default=200000, description="Cap on expanded search states", ge=1
    )
    match_tolerance: int = Field(
        default=1, description="Chebyshev radius (tiles) for edge satisfaction", ge=0
    )
    dedup: bool = Field(default=True, description="Filter outputs against originals and each other")
    dedup_threshold: float = Field(
        default=0.9,
        description="Positional overlap at which two sections are duplicates",
        gt=0,
        le=1,
    )
    l_node: Optional[int] = Field(
        default=None, description="Restrict generation to one L node; None = whole model"
    )
    rng_seed: int = Field(default=0, description="Seed recorded in output provenance")


class JumpEnvelope(BaseModel):
    """Reach of the greedy pather, in tiles."""

    max_rise: int = Field(default=4, description="Highest climb per hop", ge=0)
    max_gap: int = Field(default=4, description="Largest horizontal hop", ge=0)
    max_drop: Optional[int] = Field(
        default=None, description="Largest fall; None = unbounded", ge=0
    )
    clearance: int = Field(
        default=2, description="Free tiles required above a standable cell", ge=0
    )


class EvaluationParams(BaseModel):
    """Playability and style evaluation."""

    standable: List[str] = Field(
        default_factory=lambda: list(DEFAULT_STANDABLE),
        description="Sprite names the player can stand on",
    )
    envelope: JumpEnvelope = Field(default_factory=JumpEnvelope)
    sample_size: int = Field(default=20, description="Sections sampled per evaluation", ge=1)
    assignment_limit: int = Field(
        default=500,
        description="Above this many sprites of one type, style matching falls back to greedy",
        ge=1,
    )


class SweepParams(BaseModel):
    """p_C / p_E parameter sweep."""

    p_C_values: List[float] = Field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9])
    p_E_values: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.5])
    p_E_hold: float = Field(default=0.1, description="p_E while p_C varies", gt=0, le=1)
    p_C_hold: float = Field(default=0.8, description="p_C while p_E varies", ge=0, le=1)
    sample_size: int = Field(default=20, description="Sections sampled per row", ge=1)

    @field_validator("p_C_values")
    @classmethod
    def validate_p_c(cls, v: List[float]) -> List[float]:
        """Validate that every swept p_C lies in [0, 1]."""
        if any(p < 0 or p > 1 for p in v):
            raise ValueError("Swept p_C values must lie in [0, 1]")
        return v

    @field_validator("p_E_values")
    @classmethod
    def validate_p_e(cls, v: List[float]) -> List[float]:
        """Validate that every swept p_E lies in (0, 1]."""
        if any(p <= 0 or p > 1 for p in v):
            raise ValueError("Swept p_E values must lie in (0, 1]")
        return v


class CorpusParams(BaseModel):
    """Synthetic corpus emitted by the ``synth`` stage."""

    kind: Literal["treetop", "random"] = Field(default="treetop")
    n_sections: int = Field(default=12, description="Sections of a random corpus", ge=1)
    high_dwell: int = Field(default=40, description="Frames spent in each fixture section", ge=1)
    filler_dwell: int = Field(default=5, description="Frames spent in filler sections", ge=1)
    walker: bool = Field(default=False, description="Animate a walker sprite on row 0")
    walker_speed: float = Field(default=0.25, description="Walker tiles per frame", ge=0)
    render_rasters: bool = Field(default=True, description="Write PNG frames for ingestion")


class PathsConfig(BaseModel):
    """Artifact locations."""

    output_dir: Path = Field(description="Root directory for every stage's artifacts")
    atlas_manifest: Optional[Path] = Field(
        default=None, description="Atlas manifest (YAML); synth writes one if unset"
    )
    frames_dir: Optional[Path] = Field(default=None, description="Raster frames to ingest")
    traces: List[Path] = Field(default_factory=list, description="Trace files to segment")
    model: Optional[Path] = Field(default=None, description="Style model file")

    def stage_dir(self, stage: str) -> Path:
        return self.output_dir / stage


class PipelineConfig(BaseModel):
    """Main configuration for a level-synth run."""

    version: Literal[1] = Field(default=1, description="Config schema version")
    seed: int = Field(description="Master seed; required so every run is reproducible")
    paths: PathsConfig
    corpus: CorpusParams = Field(default_factory=CorpusParams)
    vision: VisionParams = Field(default_factory=VisionParams)
    segmentation: SegmentationParams = Field(default_factory=SegmentationParams)
    clustering: ClusteringParams = Field(default_factory=ClusteringParams)
    model: ModelParams = Field(default_factory=ModelParams)
    generation: GenerationParams = Field(default_factory=GenerationParams)
    evaluation: EvaluationParams = Field(default_factory=EvaluationParams)
    sweep: SweepParams = Field(default_factory=SweepParams)
    log_to_file: bool = Field(default=True, description="Write a per-run log directory")

    @property
    def clustering_seed(self) -> int:
        return self.clustering.seed if self.clustering.seed is not None else self.seed

    @property
    def model_seed(self) -> int:
        return self.model.seed if self.model.seed is not None else self.seed

    @classmethod
    def from_yaml(cls, path: Path) -> "PipelineConfig":
        """Load configuration from YAML file."""
        import yaml

        with open(path) as f:
            data = yaml.safe_load(f)
        return cls(**(data or {}))

    def to_yaml(self, path: Path) -> None:
        """Save configuration to YAML file."""
        import yaml

        data = self.model_dump(mode="json")
        with open(path, "w") as f:
            yaml.dump(data, f, default_flow_style=False, sort_keys=False)
