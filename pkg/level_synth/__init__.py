"""level-synth: learn level-section style from gameplay traces and generate new sections."""

__version__ = "0.1.0"
__all__ = ["PipelineConfig", "PipelineRunner", "StyleModel", "Trace"]


def __getattr__(name):
    """Lazy import so ``import level_synth`` does not pull in cv2 and scipy."""
    if name == "PipelineConfig":
        from level_synth.pipeline.config import PipelineConfig
        return PipelineConfig
    elif name == "PipelineRunner":
        from level_synth.pipeline.runner import PipelineRunner
        return PipelineRunner
    elif name == "StyleModel":
        from level_synth.model.nodes import StyleModel
        return StyleModel
    elif name == "Trace":
        from level_synth.core.trace import Trace
        return Trace
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
