"""End-to-end runs of the pipeline stages."""

from level_synth.pipeline.config import CorpusParams, PathsConfig, PipelineConfig
from level_synth.pipeline.runner import PipelineRunner

REPORTS = [
    "generate/manifest.json",
    "evaluate/evaluation.csv",
    "sweep/sweep.csv",
]


def _run(output_dir):
    config = PipelineConfig(
        seed=7,
        paths=PathsConfig(output_dir=output_dir),
        corpus=CorpusParams(kind="treetop", render_rasters=False),
        log_to_file=False,
    )
    return PipelineRunner(config, progress=False).run()


def test_treetop_pipeline_is_reproducible(tmp_path):
    first = _run(tmp_path / "a")
    second = _run(tmp_path / "b")
    assert first["sweep_rows"] == second["sweep_rows"] == 10
    assert first["raw"] == second["raw"]
    for report in REPORTS:
        assert (tmp_path / "a" / report).read_bytes() == (tmp_path / "b" / report).read_bytes()
    interaction = sorted((tmp_path / "a" / "segment").glob("interaction_*.csv"))
    assert interaction
    for path in interaction:
        twin = tmp_path / "b" / "segment" / path.name
        assert path.read_bytes() == twin.read_bytes()
