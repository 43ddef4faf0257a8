"""
Evaluation service: runs the pipeline per scene, writes per-scene and
aggregate range reports.

Scenes may be processed in parallel (``SSC_THREADS`` caps the worker
count); results are gathered in dataset order so the aggregate does not
depend on scheduling.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from app.config.run_config import RunConfig
from app.losses.metrics import MetricsReport, aggregate_reports, evaluate, export_xlsx, save_report
from app.services.dataset_service import SceneSample
from app.services.pipeline_service import load_stage1, load_stage2, run_pipeline
from app.services.registry_service import RegistryService
from app.utils.errors import InvalidInputError
from app.utils.logging_setup import get_logger

logger = get_logger("eval")

AGGREGATE_NAME = "aggregate"


def thread_count() -> int:
    """Worker cap from ``SSC_THREADS`` (default: CPU count, at most 4)."""
    raw = os.getenv("SSC_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise InvalidInputError(f"SSC_THREADS must be an integer, got '{raw}'") from None
        if value < 1:
            raise InvalidInputError(f"SSC_THREADS must be at least 1, got {value}")
        return value
    return max(1, min(4, os.cpu_count() or 1))


@dataclass
class EvaluationSummary:
    scenes: Dict[str, MetricsReport]
    aggregate: MetricsReport
    out_dir: Optional[Path]


class EvaluationService:
    """Service class for range-stratified evaluation."""

    def __init__(self, config: RunConfig, registry: Optional[RegistryService] = None):
        self.config = config
        self.registry = registry

    def evaluate(self, samples: Sequence[SceneSample],
                 stage1_checkpoint: Optional[Union[str, Path]] = None,
                 stage2_checkpoint: Optional[Union[str, Path]] = None,
                 out_dir: Optional[Union[str, Path]] = None,
                 ranges: Optional[Sequence[float]] = None, bypass: bool = False,
                 label: Optional[str] = None, dataset_path: str = "",
                 xlsx: bool = False) -> EvaluationSummary:
        """
        Evaluate every scene and aggregate by summing confusion matrices.

        Args:
            samples: Scenes to evaluate
            stage1_checkpoint: Needed when the query mode uses the occupancy net
            stage2_checkpoint: Completion model (unused with ``bypass``)
            out_dir: Report directory; nothing is written when None
            ranges: Range radii in metres (config value when omitted)
            bypass: Score the ground truth against itself
            label: Name recorded in the run registry
            dataset_path: Recorded in the run registry
            xlsx: Also write a spreadsheet with one sheet per report

        Returns:
            EvaluationSummary
        """
        if not samples:
            raise InvalidInputError("evaluation needs at least one scene")
        ranges = tuple(self.config.ranges if ranges is None else ranges)
        spec = self.config.volume_spec()
        stage1 = stage2 = None
        if not bypass:
            stage1 = load_stage1(self.config, stage1_checkpoint)
            stage2 = load_stage2(self.config, stage2_checkpoint)

        def score(sample: SceneSample) -> MetricsReport:
            if bypass:
                return evaluate(sample.gt, sample.gt, spec, ranges, self.config.class_count)
            result = run_pipeline(sample, self.config, stage2, stage1)
            report = evaluate(result.prediction, sample.gt, spec, ranges, self.config.class_count)
            report.mean_proposals = float(result.proposals)
            return report

        workers = min(thread_count(), len(samples))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                reports = list(pool.map(score, samples))
        else:
            reports = [score(sample) for sample in samples]

        scenes = {sample.name: report for sample, report in zip(samples, reports)}
        aggregate = aggregate_reports(reports)
        out_path = None if out_dir is None else Path(out_dir)
        if out_path is not None:
            for name, report in scenes.items():
                save_report(report, out_path / f"{name}.json")
            save_report(aggregate, out_path / f"{AGGREGATE_NAME}.json")
            if xlsx:
                export_xlsx({AGGREGATE_NAME: aggregate, **scenes}, out_path / "metrics.xlsx")
        for metrics in aggregate.ranges.values():
            logger.info(f"{metrics.range_m:g} m: IoU {100 * metrics.iou:.2f}  mIoU {100 * metrics.miou:.2f}")

        if self.registry is not None:
            report_path = None if out_path is None else str(out_path / f"{AGGREGATE_NAME}.json")
            self.registry.record_evaluation(aggregate, dataset_path, label=label,
                                            query_mode="bypass" if bypass else self.config.query_mode,
                                            report_path=report_path)
        return EvaluationSummary(scenes, aggregate, out_path)
