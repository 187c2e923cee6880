"""Section evaluation and the p_C / p_E parameter sweep."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats
from tqdm import tqdm

from level_synth.core.sprites import SpriteCatalog
from level_synth.core.trace import Frame
from level_synth.evaluation.playability import PlayabilityReport, is_playable
from level_synth.evaluation.style import StyleScore, median_style, style_distance
from level_synth.generation.generator import generate_all
from level_synth.model.nodes import StyleModel
from level_synth.pipeline.config import EvaluationParams, GenerationParams, SweepParams

logger = logging.getLogger(__name__)

SWEEP_FIELDS = [
    "p_C",
    "p_E",
    "sample_size",
    "percent_playable",
    "median_style",
    "raw_count",
    "varied",
    "emitted_count",
    "flags",
]


@dataclass(frozen=True)
class SectionEvaluation:
    index: int
    playability: PlayabilityReport
    style: StyleScore


@dataclass
class EvaluationReport:
    evaluations: List[SectionEvaluation]
    population: int

    @property
    def sample_size(self) -> int:
        return len(self.evaluations)

    @property
    def percent_playable(self) -> Optional[float]:
        if not self.evaluations:
            return None
        return sum(e.playability.playable for e in self.evaluations) / len(self.evaluations)

    @property
    def median_style(self) -> Optional[float]:
        return median_style([e.style for e in self.evaluations])

    @property
    def greedy_misses(self) -> int:
        """Sections the breadth-first oracle solves but the greedy pather does not."""
        return sum(
            1
            for e in self.evaluations
            if e.playability.exhaustive_playable and not e.playability.playable
        )


def sample_indices(population: int, sample_size: int, rng_seed: int) -> List[int]:
    """Uniform sample without replacement, returned in ascending order."""
    if population <= sample_size:
        return list(range(population))
    rng = np.random.default_rng(rng_seed)
    return sorted(int(i) for i in rng.choice(population, size=sample_size, replace=False))


def evaluate_sections(
    sections: Sequence[Frame],
    originals: Sequence[Frame],
    catalog: SpriteCatalog,
    params: Optional[EvaluationParams] = None,
    sample_size: Optional[int] = None,
    rng_seed: int = 0,
) -> EvaluationReport:
    """Playability and style of a seeded sample of sections.

    Args:
        sections: Generated sections
        originals: Sections the model was learned from
        catalog: Names the standable types and footprints
        params: Envelope, standable names, default sample size
        sample_size: Overrides ``params.sample_size``
        rng_seed: Sampling seed
    """
    params = params or EvaluationParams()
    size = sample_size if sample_size is not None else params.sample_size
    standable = [catalog.id_of(name) for name in params.standable if name in catalog.names]
    evaluations = []
    for index in sample_indices(len(sections), size, rng_seed):
        frame = sections[index]
        evaluations.append(
            SectionEvaluation(
                index=index,
                playability=is_playable(frame, params.envelope, standable, catalog),
                style=style_distance(frame, originals, params.assignment_limit),
            )
        )
    report = EvaluationReport(evaluations=evaluations, population=len(sections))
    if report.greedy_misses:
        logger.info(f"Greedy pather missed {report.greedy_misses} sections the oracle solves")
    return report


@dataclass(frozen=True)
class SweepRow:
    varied: str
    p_C: float
    p_E: float
    sample_size: int
    percent_playable: Optional[float]
    median_style: Optional[float]
    raw_count: int
    emitted_count: int
    truncated: bool = False

    @property
    def empty(self) -> bool:
        return self.emitted_count == 0

    @property
    def under_sampled(self) -> bool:
        return 0 < self.emitted_count < self.sample_size

    @property
    def flags(self) -> List[str]:
        flags = []
        if self.empty:
            flags.append("empty")
        if self.under_sampled:
            flags.append("under_sampled")
        if self.truncated:
            flags.append("truncated")
        return flags


@dataclass(frozen=True)
class Correlation:
    parameter: str
    measure: str
    n: int
    pearson: Optional[float] = None
    spearman: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.pearson is not None


@dataclass
class SweepResult:
    rows: List[SweepRow]
    correlations: List[Correlation] = field(default_factory=list)


def correlate(
    parameter: str, measure: str, xs: Sequence[float], ys: Sequence[float]
) -> Correlation:
    """Pearson and Spearman coefficients; undefined for constant or short series."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        logger.warning(f"Correlation {parameter} vs {measure} undefined (constant or short series)")
        return Correlation(parameter=parameter, measure=measure, n=len(x))
    pearson = float(stats.pearsonr(x, y)[0])
    spearman = float(stats.spearmanr(x, y)[0])
    return Correlation(
        parameter=parameter, measure=measure, n=len(x), pearson=pearson, spearman=spearman
    )


def _row(
    model: StyleModel,
    varied: str,
    gen_params: GenerationParams,
    eval_params: EvaluationParams,
    sample_size: int,
    rng_seed: int,
) -> SweepRow:
    result = generate_all(model, gen_params)
    frames = [s.frame for s in result.sections]
    report = evaluate_sections(
        frames,
        model.originals,
        model.catalog,
        eval_params,
        sample_size=sample_size,
        rng_seed=rng_seed,
    )
    row = SweepRow(
        varied=varied,
        p_C=gen_params.p_C,
        p_E=gen_params.p_E,
        sample_size=sample_size,
        percent_playable=report.percent_playable,
        median_style=report.median_style,
        raw_count=result.raw_count,
        emitted_count=len(frames),
        truncated=result.truncated,
    )
    if row.flags:
        logger.warning(f"Sweep row p_C={row.p_C} p_E={row.p_E} flagged: {', '.join(row.flags)}")
    return row


def sweep(
    model: StyleModel,
    sweep_params: Optional[SweepParams] = None,
    gen_params: Optional[GenerationParams] = None,
    eval_params: Optional[EvaluationParams] = None,
    rng_seed: int = 0,
    progress: bool = False,
) -> SweepResult:
    """Vary p_C (p_E held) and then p_E (p_C held), scoring a sample of each output.

    Rows with no output are kept but left out of the correlations.
    """
    sweep_params = sweep_params or SweepParams()
    base = gen_params or GenerationParams()
    eval_params = eval_params or EvaluationParams()

    settings = [("p_C", p, sweep_params.p_E_hold) for p in sweep_params.p_C_values]
    settings += [("p_E", sweep_params.p_C_hold, p) for p in sweep_params.p_E_values]

    rows = []
    for varied, p_c, p_e in tqdm(settings, desc="Sweep", disable=not progress):
        params = base.model_copy(update={"p_C": p_c, "p_E": p_e})
        rows.append(_row(model, varied, params, eval_params, sweep_params.sample_size, rng_seed))

    correlations = []
    for parameter in ("p_C", "p_E"):
        usable = [r for r in rows if r.varied == parameter and not r.empty]
        xs = [getattr(r, parameter) for r in usable]
        correlations.append(
            correlate(parameter, "percent_playable", xs, [r.percent_playable for r in usable])
        )
        correlations.append(
            correlate(parameter, "median_style", xs, [r.median_style for r in usable])
        )
    return SweepResult(rows=rows, correlations=correlations)


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.6f}"


def write_sweep_csv(result: SweepResult, path: Path) -> None:
    """Sweep rows, a blank line, then the correlation block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_FIELDS)
        writer.writeheader()
        for row in result.rows:
            writer.writerow(
                {
                    "p_C": _fmt(row.p_C),
                    "p_E": _fmt(row.p_E),
                    "sample_size": row.sample_size,
                    "percent_playable": _fmt(row.percent_playable),
                    "median_style": _fmt(row.median_style),
                    "raw_count": row.raw_count,
                    "varied": row.varied,
                    "emitted_count": row.emitted_count,
                    "flags": "|".join(row.flags),
                }
            )
        f.write("\n")
        block = csv.writer(f)
        block.writerow(["parameter", "measure", "n", "pearson_r", "spearman_rho"])
        for c in result.correlations:
            block.writerow([c.parameter, c.measure, c.n, _fmt(c.pearson), _fmt(c.spearman)])


def write_evaluation_csv(report: EvaluationReport, path: Path, names: Iterable[str] = ()) -> None:
    """Per-section playability and style rows."""
    names = list(names)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(
            f,
            fieldnames=[
                "section",
                "playable",
                "failure_reason",
                "exhaustive_playable",
                "closest_original",
                "style",
                "degenerate",
            ],
        )
        writer.writeheader()
        for e in report.evaluations:
            writer.writerow(
                {
                    "section": names[e.index] if e.index < len(names) else e.index,
                    "playable": int(e.playability.playable),
                    "failure_reason": e.playability.failure_reason or "",
                    "exhaustive_playable": ""
                    if e.playability.exhaustive_playable is None
                    else int(e.playability.exhaustive_playable),
                    "closest_original": e.style.closest_original,
                    "style": _fmt(e.style.displacement),
                    "degenerate": int(e.style.degenerate),
                }
            )
