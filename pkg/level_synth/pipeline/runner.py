"""Stage runner: each stage reads the previous stage's artifact and writes its own.

Artifacts live under ``paths.output_dir``::

    synth/      trace.json, ground_truth.json, atlas/, frames/
    ingest/     trace.json
    segment/    sections_<trace>.json, interaction_<trace>.csv
    cluster/    clusters.json
    model/      model.json
    generate/   section_<n>.json, manifest.json
    evaluate/   evaluation.csv
    sweep/      sweep.csv
    render/     <section>.txt, <section>.png
"""

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from PIL import Image

from level_synth.analysis.segmentation import (
    SectionSet,
    categorize_sections,
    largest_cluster,
    load_clusters,
    load_section_set,
    save_clusters,
    save_section_set,
    segment_trace,
    select_high_interaction,
    write_interaction_csv,
)
from level_synth.core.io import load_trace, save_trace, single_frame_trace
from level_synth.core.trace import Frame, Trace, TraceMeta
from level_synth.errors import MissingArtifactError, ValidationError
from level_synth.evaluation.sweep import (
    EvaluationReport,
    SweepResult,
    evaluate_sections,
    sweep,
    write_evaluation_csv,
    write_sweep_csv,
)
from level_synth.generation.generator import GenerationResult, generate_all
from level_synth.model.builder import build_style_model
from level_synth.model.io import load_model, save_model
from level_synth.model.nodes import StyleModel
from level_synth.pipeline.config import PipelineConfig
from level_synth.synthetic.corpus import CorpusArtifacts, build_corpus, random_corpus_spec
from level_synth.synthetic.treetop import treetop_corpus
from level_synth.utils.render import render_sections
from level_synth.vision.atlas import load_atlas
from level_synth.vision.matcher import FRAME_PATTERN, FrameIngestor

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _write_json(data: Dict[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def infer_meta(frames_dir: Path, tile_size_px: int, fps: float = 30.0) -> TraceMeta:
    """Frame geometry from the first raster of a frame directory."""
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise MissingArtifactError(frames_dir, stage="ingest")
    first = next(
        (p for p in sorted(frames_dir.iterdir()) if FRAME_PATTERN.match(p.name)), None
    )
    if first is None:
        raise ValidationError(f"no frames found in {frames_dir}")
    with Image.open(first) as img:
        width_px, height_px = img.size
    if width_px % tile_size_px or height_px % tile_size_px:
        raise ValidationError(
            f"{first}: {width_px}x{height_px} px is not a whole number of "
            f"{tile_size_px} px tiles"
        )
    return TraceMeta(
        tile_size_px=tile_size_px,
        width=width_px // tile_size_px,
        height=height_px // tile_size_px,
        fps=fps,
    )


def load_generated_sections(generate_dir: Path) -> List[Frame]:
    """Sections listed in a generation manifest, in manifest order."""
    generate_dir = Path(generate_dir)
    manifest_path = generate_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingArtifactError(manifest_path, stage="evaluate")
    with open(manifest_path) as f:
        manifest = json.load(f)
    frames = []
    for entry in manifest.get("sections", []):
        path = generate_dir / entry["file"]
        if not path.exists():
            raise MissingArtifactError(path, stage="evaluate")
        frames.append(load_trace(path).frames[0])
    return frames


class PipelineRunner:
    """Runs pipeline stages against one configuration."""

    def __init__(self, config: PipelineConfig, progress: bool = True):
        """Initialize the runner.

        Args:
            config: Pipeline configuration
            progress: Show progress bars in long stages
        """
        self.config = config
        self.progress = progress
        self.paths = config.paths
        self.timings: Dict[str, float] = {}

    def _stage_dir(self, stage: str) -> Path:
        path = self.paths.stage_dir(stage)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _timed(self, stage: str, started: float) -> None:
        self.timings[stage] = time.perf_counter() - started
        logger.info(f"Stage '{stage}' finished in {self.timings[stage]:.2f}s")

    def synth(self) -> CorpusArtifacts:
        """Write the synthetic corpus described by ``config.corpus``."""
        started = time.perf_counter()
        c = self.config.corpus
        walker = c.walker_speed if c.walker else None
        if c.kind == "treetop":
            spec = treetop_corpus(
                rng_seed=self.config.seed,
                high_dwell=c.high_dwell,
                filler_dwell=c.filler_dwell,
                walker_speed=walker,
            )
        else:
            spec = random_corpus_spec(
                self.config.seed, n_sections=c.n_sections, walker_speed=walker
            )
        artifacts = build_corpus(
            spec,
            output_dir=self._stage_dir("synth"),
            render=c.render_rasters,
            segmentation=self.config.segmentation,
            progress=self.progress,
        )
        self._timed("synth", started)
        return artifacts

    def ingest(
        self,
        frames_dir: Optional[Path] = None,
        atlas_manifest: Optional[Path] = None,
        trace_id: Optional[str] = None,
    ) -> Trace:
        """Match raster frames against the atlas and write the trace."""
        started = time.perf_counter()
        frames_dir = Path(
            frames_dir or self.paths.frames_dir or self.paths.stage_dir("synth") / "frames"
        )
        atlas_manifest = Path(
            atlas_manifest
            or self.paths.atlas_manifest
            or self.paths.stage_dir("synth") / "atlas" / "atlas.yaml"
        )
        atlas = load_atlas(atlas_manifest)
        meta = infer_meta(frames_dir, atlas.tile_size_px)
        ingestor = FrameIngestor(atlas, meta, params=self.config.vision, progress=self.progress)
        trace = ingestor.ingest(frames_dir, trace_id=trace_id or frames_dir.name)
        save_trace(trace, self._stage_dir("ingest") / "trace.json")
        self._timed("ingest", started)
        return trace

    def segment(self, trace_paths: Optional[Sequence[Path]] = None) -> List[Path]:
        """Segment every trace; returns the section report paths."""
        started = time.perf_counter()
        default = [self.paths.stage_dir("ingest") / "trace.json"]
        trace_paths = list(trace_paths or self.paths.traces or default)
        out_dir = self._stage_dir("segment")
        written = []
        for trace_path in trace_paths:
            if not Path(trace_path).exists():
                raise MissingArtifactError(trace_path, stage="segment")
            trace = load_trace(trace_path)
            section_set = segment_trace(trace, self.config.segmentation)
            report = out_dir / f"sections_{trace.trace_id}.json"
            save_section_set(section_set, report)
            write_interaction_csv(section_set, out_dir / f"interaction_{trace.trace_id}.csv")
            written.append(report)
        self._timed("segment", started)
        return written

    def cluster(self, section_paths: Optional[Sequence[Path]] = None) -> Path:
        """Categorize the high-interaction sections of every section report."""
        started = time.perf_counter()
        if section_paths is None:
            section_paths = sorted(self.paths.stage_dir("segment").glob("sections_*.json"))
            if not section_paths:
                raise MissingArtifactError(
                    self.paths.stage_dir("segment") / "sections_<trace>.json", stage="cluster"
                )
        sets: List[SectionSet] = [load_section_set(p) for p in section_paths]
        first = sets[0]
        for other in sets[1:]:
            if other.catalog.names != first.catalog.names or other.meta != first.meta:
                raise ValidationError(
                    f"Section reports {first.trace_id} and {other.trace_id} use different "
                    "catalogs or frame geometry"
                )
        high = [s for section_set in sets for s in select_high_interaction(section_set.sections)]
        clusters = categorize_sections(
            high, first.catalog, self.config.clustering, rng_seed=self.config.clustering_seed
        )
        path = self._stage_dir("cluster") / "clusters.json"
        save_clusters(clusters, first.meta, first.catalog, path)
        self._timed("cluster", started)
        return path

    def model(self, clusters_path: Optional[Path] = None) -> StyleModel:
        """Build the style model from one section cluster."""
        started = time.perf_counter()
        clusters_path = Path(clusters_path or self.paths.stage_dir("cluster") / "clusters.json")
        clusters, meta, catalog = load_clusters(clusters_path)
        wanted = self.config.model.cluster
        if wanted is None:
            chosen = largest_cluster(clusters)
        else:
            matches = [c for c in clusters if c.cluster_id == wanted]
            if not matches:
                raise ValidationError(f"{clusters_path} has no cluster {wanted}")
            chosen = matches[0]
        logger.info(f"Modelling cluster {chosen.cluster_id} ({len(chosen)} sections)")
        model = build_style_model(
            chosen.sections, catalog, meta, self.config.model, rng_seed=self.config.model_seed
        )
        save_model(model, self._model_path())
        self._timed("model", started)
        return model

    def _model_path(self, model_path: Optional[Path] = None) -> Path:
        return Path(model_path or self.paths.model or self.paths.stage_dir("model") / "model.json")

    def generate(self, model_path: Optional[Path] = None) -> GenerationResult:
        """Enumerate sections and write them with a manifest."""
        started = time.perf_counter()
        model = load_model(self._model_path(model_path))
        params = self.config.generation
        result = generate_all(model, params, progress=self.progress)

        out_dir = self._stage_dir("generate")
        for stale in out_dir.glob("section_*.json"):
            stale.unlink()
        entries = []
        for n, section in enumerate(result.sections):
            name = f"section_{n}"
            trace = single_frame_trace(name, section.frame, model.meta, model.catalog)
            save_trace(trace, out_dir / f"{name}.json")
            entries.append(
                {"file": f"{name}.json", "sprites": len(section.frame), **section.provenance}
            )
        _write_json(
            {
                "version": 1,
                "params": params.model_dump(mode="json"),
                "raw_count": result.raw_count,
                "emitted_count": len(result.sections),
                "expansions": result.expansions,
                "depth_truncated": result.depth_truncated,
                "output_cap_hit": result.output_cap_hit,
                "expansion_cap_hit": result.expansion_cap_hit,
                "sections": entries,
            },
            out_dir / MANIFEST_NAME,
        )
        self._timed("generate", started)
        return result

    def evaluate(
        self, model_path: Optional[Path] = None, generate_dir: Optional[Path] = None
    ) -> EvaluationReport:
        """Playability and style of a seeded sample of the generated sections."""
        started = time.perf_counter()
        model = load_model(self._model_path(model_path))
        frames = load_generated_sections(generate_dir or self.paths.stage_dir("generate"))
        report = evaluate_sections(
            frames,
            model.originals,
            model.catalog,
            self.config.evaluation,
            rng_seed=self.config.seed,
        )
        write_evaluation_csv(
            report,
            self._stage_dir("evaluate") / "evaluation.csv",
            names=[f"section_{n}" for n in range(len(frames))],
        )
        if report.percent_playable is not None:
            logger.info(
                f"{report.sample_size} of {report.population} sections sampled: "
                f"{report.percent_playable:.0%} playable, median style {report.median_style:.4f}"
            )
        else:
            logger.warning("No generated sections to evaluate")
        self._timed("evaluate", started)
        return report

    def sweep(self, model_path: Optional[Path] = None) -> SweepResult:
        """Sweep p_C and p_E and write the CSV report."""
        started = time.perf_counter()
        model = load_model(self._model_path(model_path))
        result = sweep(
            model,
            self.config.sweep,
            self.config.generation,
            self.config.evaluation,
            rng_seed=self.config.seed,
            progress=self.progress,
        )
        write_sweep_csv(result, self._stage_dir("sweep") / "sweep.csv")
        self._timed("sweep", started)
        return result

    def render(self, section_paths: Optional[Sequence[Path]] = None) -> List[Path]:
        """ASCII and PNG images of section files (default: every generated section)."""
        started = time.perf_counter()
        if section_paths is None:
            generate_dir = self.paths.stage_dir("generate")
            if not (generate_dir / MANIFEST_NAME).exists():
                raise MissingArtifactError(generate_dir / MANIFEST_NAME, stage="render")
            section_paths = sorted(
                generate_dir.glob("section_*.json"), key=lambda p: int(p.stem.split("_")[1])
            )
        traces = []
        for path in section_paths:
            if not Path(path).exists():
                raise MissingArtifactError(path, stage="render")
            traces.append(load_trace(path))
        atlas = None
        if self.paths.atlas_manifest is not None and Path(self.paths.atlas_manifest).exists():
            atlas = load_atlas(self.paths.atlas_manifest)
        written = []
        for trace in traces:
            written += render_sections(
                [trace.frames[0]],
                self._stage_dir("render"),
                trace.catalog,
                atlas if atlas and atlas.catalog.names == trace.catalog.names else None,
                names=[trace.trace_id],
            )
        self._timed("render", started)
        return written

    def run(self) -> Dict[str, Any]:
        """synth, ingest, segment, cluster, model, generate, evaluate, sweep, render."""
        artifacts = self.synth()
        if artifacts.frames_dir is not None:
            self.ingest(artifacts.frames_dir, artifacts.atlas_manifest, artifacts.trace.trace_id)
            trace_paths = [self.paths.stage_dir("ingest") / "trace.json"]
        else:
            trace_paths = [artifacts.trace_path]
        self.segment(trace_paths)
        self.cluster()
        self.model()
        generated = self.generate()
        report = self.evaluate()
        swept = self.sweep()
        self.render()
        return {
            "generated": len(generated.sections),
            "raw": generated.raw_count,
            "percent_playable": report.percent_playable,
            "median_style": report.median_style,
            "sweep_rows": len(swept.rows),
            "timings": dict(self.timings),
        }
