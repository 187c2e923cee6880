#!/usr/bin/env python3
"""
End-to-end acceptance checks that are too slow for the unit tests.

Renders and re-ingests seeded random corpora, checks segmentation against
ground truth, runs the treetop fixture through model building, the closure
search and the p_C sweep, and runs the treetop pipeline twice to compare
its reports.
"""

import argparse
import logging
import sys
import tempfile
import time
from pathlib import Path

from level_synth.analysis.segmentation import segment_trace
from level_synth.core.trace import LevelSection
from level_synth.evaluation.sweep import evaluate_sections, sweep
from level_synth.generation.generator import generate_all
from level_synth.model.builder import build_style_model
from level_synth.pipeline.config import GenerationParams, PipelineConfig, SweepParams
from level_synth.pipeline.runner import PipelineRunner
from level_synth.synthetic.corpus import build_corpus, random_corpus_spec
from level_synth.synthetic.treetop import treetop_fixture
from level_synth.utils.logger import setup_logger
from level_synth.vision.atlas import synthetic_atlas
from level_synth.vision.matcher import ingest_frames


def check_vision_round_trip(n_traces, work_dir):
    """Rendered corpora must ingest back to the exact trace"""
    print("=" * 60)
    print(f"VISION ROUND TRIP ({n_traces} traces)")
    print("=" * 60)
    failures = []
    for seed in range(n_traces):
        spec = random_corpus_spec(seed, n_sections=3, max_dwell=3)
        out = Path(work_dir) / f"vision_{seed}"
        artifacts = build_corpus(spec, output_dir=out, atlas=synthetic_atlas(spec.catalog))
        trace = ingest_frames(
            artifacts.frames_dir, synthetic_atlas(spec.catalog), spec.catalog, spec.meta
        )
        if trace.frames != artifacts.trace.frames:
            failures.append(seed)
            print(f"  ⚠ seed {seed}: ingested frames differ")
    if not failures:
        print("  ✓ Every trace recovered exactly")
    return not failures


def check_segmentation(n_traces):
    """Boundaries and interaction values must match the ground truth"""
    print("\n" + "=" * 60)
    print(f"SEGMENTATION GROUND TRUTH ({n_traces} traces)")
    print("=" * 60)
    failures = []
    for seed in range(n_traces):
        walker = 0.25 if seed % 2 else None
        artifacts = build_corpus(random_corpus_spec(seed, n_sections=8, walker_speed=walker))
        sections = segment_trace(artifacts.trace).sections
        starts = tuple(s.start_frame for s in sections)
        values = tuple(s.interaction_value for s in sections)
        if starts != artifacts.truth.boundaries or values != artifacts.truth.interaction_values:
            failures.append(seed)
            print(f"  ⚠ seed {seed}: boundaries {starts} != {artifacts.truth.boundaries}")
    if not failures:
        print("  ✓ Every boundary and interaction value recovered")
    return not failures


def _treetop_model():
    spec = treetop_fixture()
    artifacts = build_corpus(spec)
    sections = [
        LevelSection("treetop", start, start, artifacts.trace.frame_at(start))
        for start in artifacts.truth.boundaries
    ]
    return spec, build_style_model(sections, spec.catalog, spec.meta, rng_seed=7)


def _inversions(values):
    return sum(1 for a, b in zip(values, values[1:]) if b < a)


def check_treetop_closure(model, catalog):
    """Originals reappear among raw outputs below their coexistence floor"""
    ok = True
    p_e = model.min_table_probability() or 0.01
    closure = generate_all(model, GenerationParams(p_E=p_e, p_C=0.1, dedup=False))
    raw = {s.instances for s in closure.raw}
    missing = [i for i, o in enumerate(model.originals) if o.instances not in raw]
    if missing or closure.truncated:
        ok = False
        print(f"  ⚠ Closure search missed originals {missing} (truncated={closure.truncated})")
    else:
        print(f"  ✓ All {len(model.originals)} originals among {closure.raw_count} raw outputs")

    report = evaluate_sections(
        list(model.originals), model.originals, catalog, sample_size=len(model.originals)
    )
    if report.percent_playable != 1.0 or report.median_style != 0.0:
        ok = False
        print(
            f"  ⚠ Originals: {report.percent_playable:.0%} playable, "
            f"style {report.median_style}"
        )
    else:
        print("  ✓ Originals playable and in style")
    return ok


def check_treetop_p_c_sweep(model):
    """Playability rises with p_C, and the sweep stays within its time budget"""
    ok = True
    params = SweepParams(p_C_values=[0.5, 0.6, 0.7, 0.8, 0.9], p_E_values=[], sample_size=20)
    started = time.perf_counter()
    result = sweep(model, params, GenerationParams(), rng_seed=1)
    elapsed = time.perf_counter() - started
    for row in result.rows:
        print(
            f"    p_C={row.p_C:.1f}: {row.raw_count} raw, {row.emitted_count} emitted, "
            f"playable {row.percent_playable}, flags {row.flags}"
        )
    if elapsed >= 120:
        ok = False
        print(f"  ⚠ p_C sweep took {elapsed:.0f}s")
    else:
        print(f"  ✓ p_C sweep finished in {elapsed:.1f}s")
    if any(row.truncated for row in result.rows):
        ok = False
        print("  ⚠ Some sweep rows were truncated")

    playable = [row.percent_playable for row in result.rows]
    rho = next(
        c.spearman
        for c in result.correlations
        if c.parameter == "p_C" and c.measure == "percent_playable"
    )
    if None in playable or rho is None:
        ok = False
        print("  ⚠ Playability undefined for empty rows; no p_C correlation")
    elif _inversions(playable) > 1 or rho < 0.8:
        ok = False
        print(f"  ⚠ Playability {playable} (Spearman {rho:.2f})")
    else:
        print(f"  ✓ Playability rises with p_C (Spearman {rho:.2f})")
    return ok


def check_treetop_low_p_e_playable(model):
    """Every sampled section is playable at low p_E"""
    ok = True
    for p_e in (0.05, 0.1):
        result = generate_all(model, GenerationParams(p_E=p_e, p_C=0.8))
        report = evaluate_sections(
            [s.frame for s in result.sections], model.originals, model.catalog, sample_size=20
        )
        if report.percent_playable != 1.0:
            ok = False
            print(f"  ⚠ p_E={p_e}: {report.percent_playable} of {report.sample_size} playable")
        else:
            print(f"  ✓ p_E={p_e}: all {report.sample_size} sampled sections playable")
    return ok


def check_treetop_p_c_monotone(model):
    """Lowering p_C only adds outputs"""
    low = generate_all(model, GenerationParams(p_E=0.1, p_C=0.5, dedup=False))
    high = generate_all(model, GenerationParams(p_E=0.1, p_C=0.8, dedup=False))
    ok = True
    if not {s.instances for s in high.raw} <= {s.instances for s in low.raw}:
        ok = False
        print("  ⚠ Outputs at p_C=0.8 missing from p_C=0.5")
    else:
        print("  ✓ Outputs at p_C=0.8 are a subset of p_C=0.5")
    if high.raw_count == 0 or low.raw_count < 1.5 * high.raw_count:
        ok = False
        print(f"  ⚠ Raw outputs {low.raw_count} at p_C=0.5 vs {high.raw_count} at p_C=0.8")
    else:
        print(f"  ✓ Raw outputs {low.raw_count} at p_C=0.5 vs {high.raw_count} at p_C=0.8")
    return ok


def check_treetop():
    """Closure, playability trends and output growth on the treetop fixture"""
    print("\n" + "=" * 60)
    print("TREETOP FIXTURE")
    print("=" * 60)
    spec, model = _treetop_model()
    print(f"  Model: {len(model.s_nodes)} S nodes, {len(model.l_nodes)} L nodes")
    results = [
        check_treetop_closure(model, spec.catalog),
        check_treetop_p_c_sweep(model),
        check_treetop_low_p_e_playable(model),
        check_treetop_p_c_monotone(model),
    ]
    return all(results)


def check_pipeline_reproducible(work_dir):
    """Two runs of the treetop pipeline write identical reports"""
    print("\n" + "=" * 60)
    print("PIPELINE REPRODUCIBILITY")
    print("=" * 60)
    config = PipelineConfig.from_yaml(Path(__file__).parent.parent / "configs" / "treetop.yaml")
    outputs = []
    for name in ("run_a", "run_b"):
        run = config.model_copy(deep=True)
        run.paths.output_dir = Path(work_dir) / name
        run.log_to_file = False
        PipelineRunner(run, progress=False).run()
        outputs.append(run.paths.output_dir)

    reports = sorted(
        p.relative_to(outputs[0])
        for pattern in ("**/*.csv", "**/manifest.json")
        for p in outputs[0].glob(pattern)
    )
    differing = [
        str(p) for p in reports if (outputs[0] / p).read_bytes() != (outputs[1] / p).read_bytes()
    ]
    if differing:
        print(f"  ⚠ Reports differ between runs: {differing}")
        return False
    print(f"  ✓ {len(reports)} CSVs and manifests byte-identical across runs")
    return True


def main():
    parser = argparse.ArgumentParser(description="Slow end-to-end acceptance checks")
    parser.add_argument("--traces", type=int, default=100, help="Random traces per check")
    parser.add_argument("--skip-vision", action="store_true", help="Skip the raster round trip")
    parser.add_argument("--skip-treetop", action="store_true", help="Skip the treetop checks")
    parser.add_argument(
        "--skip-pipeline", action="store_true", help="Skip the reproducibility runs"
    )
    args = parser.parse_args()

    setup_logger(level=logging.WARNING)
    results = []
    with tempfile.TemporaryDirectory() as work_dir:
        if not args.skip_vision:
            results.append(check_vision_round_trip(args.traces, work_dir))
        results.append(check_segmentation(args.traces))
        if not args.skip_treetop:
            results.append(check_treetop())
        if not args.skip_pipeline:
            results.append(check_pipeline_reproducible(work_dir))

    print("=" * 60)
    if all(results):
        print("SUMMARY: ✓ All acceptance checks passed")
        return 0
    print(f"SUMMARY: {results.count(False)} check(s) failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())
