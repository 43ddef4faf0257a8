"""
Range-stratified evaluation of semantic voxel predictions.

Metrics come from one confusion matrix per range (ground truth rows,
prediction columns). A range r keeps the cells within r metres ahead of the
volume origin and r / 2 metres either side of the lateral centre, at full
height. Ignored ground-truth voxels are dropped in every range.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.geometry.volume import VolumeSpec
from app.utils.errors import DatasetIOError, InvalidInputError
from app.voxel.grid import IGNORE_LABEL, VoxelGrid

DEFAULT_RANGES = (3.2, 6.4, 12.8)


def _ratio(numerator: float, denominator: float) -> float:
    return 1.0 if denominator == 0 else float(numerator) / float(denominator)


@dataclass(eq=False)
class RangeMetrics:
    """Confusion counts inside one range and the metrics derived from them."""

    range_m: float
    confusion: np.ndarray

    @property
    def class_count(self) -> int:
        return self.confusion.shape[0] - 1

    @property
    def true_positive(self) -> int:
        return int(self.confusion[1:, 1:].sum())

    @property
    def false_positive(self) -> int:
        return int(self.confusion[0, 1:].sum())

    @property
    def false_negative(self) -> int:
        return int(self.confusion[1:, 0].sum())

    @property
    def iou(self) -> float:
        return _ratio(self.true_positive, self.true_positive + self.false_positive + self.false_negative)

    @property
    def precision(self) -> float:
        return _ratio(self.true_positive, self.true_positive + self.false_positive)

    @property
    def recall(self) -> float:
        return _ratio(self.true_positive, self.true_positive + self.false_negative)

    @property
    def class_iou(self) -> List[Optional[float]]:
        """IoU of classes 1..M; None for classes absent from both grids."""
        values = []
        for c in range(1, self.class_count + 1):
            inter = int(self.confusion[c, c])
            union = int(self.confusion[c, :].sum() + self.confusion[:, c].sum()) - inter
            values.append(None if union == 0 else inter / union)
        return values

    @property
    def miou(self) -> float:
        present = [v for v in self.class_iou if v is not None]
        return float(np.mean(present)) if present else 1.0

    def to_dict(self) -> Dict:
        return {
            'range_m': self.range_m,
            'iou': self.iou,
            'precision': self.precision,
            'recall': self.recall,
            'miou': self.miou,
            'class_iou': self.class_iou,
            'confusion': self.confusion.tolist(),
        }


@dataclass(eq=False)
class MetricsReport:
    """Per-range metrics of one scene or an aggregate of scenes."""

    class_count: int
    ranges: Dict[float, RangeMetrics] = field(default_factory=dict)
    scenes: int = 1
    mean_proposals: Optional[float] = None

    def __getitem__(self, range_m: float) -> RangeMetrics:
        return self.ranges[float(range_m)]

    def to_dict(self) -> Dict:
        return {
            'class_count': self.class_count,
            'scenes': self.scenes,
            'mean_proposals': self.mean_proposals,
            'ranges': [m.to_dict() for m in self.ranges.values()],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "MetricsReport":
        ranges = {float(r['range_m']): RangeMetrics(float(r['range_m']), np.asarray(r['confusion'], dtype=np.int64))
                  for r in data['ranges']}
        return cls(int(data['class_count']), ranges, int(data.get('scenes', 1)), data.get('mean_proposals'))


def range_window(spec: VolumeSpec, range_m: float) -> tuple:
    """
    Cell slices (x, y) of a range; height is never cropped.

    A range that falls inside a voxel is rounded up to include that voxel.

    Raises:
        InvalidInputError: non-positive range, or one that exceeds the volume
    """
    if range_m <= 0:
        raise InvalidInputError(f"range must be positive, got {range_m} m")
    count = int(math.ceil(float(range_m) / spec.voxel_size - 1e-6))
    H, W, _ = spec.dims
    if count > H or count > W:
        raise InvalidInputError(
            f"range {range_m} m exceeds the {H * spec.voxel_size:g} x {W * spec.voxel_size:g} m volume")
    lateral_start = (W - count) // 2
    return slice(0, count), slice(lateral_start, lateral_start + count)


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, class_count: int) -> np.ndarray:
    keep = gt != IGNORE_LABEL
    pred = pred[keep].astype(np.int64)
    gt = gt[keep].astype(np.int64)
    size = class_count + 1
    if pred.size and (pred.max() >= size or gt.max() >= size):
        raise InvalidInputError(f"labels exceed class count {class_count}")
    return np.bincount(gt * size + pred, minlength=size * size).reshape(size, size)


def evaluate(pred: VoxelGrid, gt: VoxelGrid, spec: VolumeSpec, ranges: Sequence[float] = DEFAULT_RANGES,
             class_count: Optional[int] = None) -> MetricsReport:
    """
    Compare a prediction against ground truth inside nested ranges.

    Args:
        pred: Predicted labels
        gt: Ground truth; label 255 cells are skipped
        spec: Volume both grids live in
        ranges: Range radii in metres
        class_count: M; inferred from the largest label when omitted

    Returns:
        MetricsReport keyed by range
    """
    if pred.labels.shape != spec.dims or gt.labels.shape != spec.dims:
        raise InvalidInputError(f"grids {pred.labels.shape} / {gt.labels.shape} do not match {spec.dims}")
    if not ranges:
        raise InvalidInputError("evaluation needs at least one range")
    if class_count is None:
        observed = gt.labels[gt.observed]
        class_count = max(int(pred.labels.max(initial=0)), int(observed.max(initial=0)), 1)

    report = MetricsReport(class_count)
    for range_m in ranges:
        xs, ys = range_window(spec, range_m)
        confusion = confusion_matrix(pred.labels[xs, ys], gt.labels[xs, ys], class_count)
        report.ranges[float(range_m)] = RangeMetrics(float(range_m), confusion)
    return report


def aggregate_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Sum per-scene confusion matrices range by range and recompute every metric."""
    if not reports:
        raise InvalidInputError("nothing to aggregate")
    first = reports[0]
    for report in reports[1:]:
        if report.class_count != first.class_count or list(report.ranges) != list(first.ranges):
            raise InvalidInputError("reports disagree on classes or ranges")
    ranges = {r: RangeMetrics(r, sum(rep.ranges[r].confusion for rep in reports)) for r in first.ranges}
    proposals = [r.mean_proposals for r in reports if r.mean_proposals is not None]
    mean_proposals = float(np.mean(proposals)) if proposals else None
    return MetricsReport(first.class_count, ranges, sum(r.scenes for r in reports), mean_proposals)


def class_names(class_count: int) -> List[str]:
    return [f"class_{c}" for c in range(1, class_count + 1)]


def report_frame(report: MetricsReport) -> pd.DataFrame:
    """One row per range; metrics as percentages, absent classes as NaN."""
    rows = []
    for metrics in report.ranges.values():
        row = {
            'range_m': metrics.range_m,
            'IoU': 100.0 * metrics.iou,
            'Precision': 100.0 * metrics.precision,
            'Recall': 100.0 * metrics.recall,
            'mIoU': 100.0 * metrics.miou,
        }
        for name, value in zip(class_names(report.class_count), metrics.class_iou):
            row[name] = np.nan if value is None else 100.0 * value
        rows.append(row)
    return pd.DataFrame(rows).round(2)


def format_report(report: MetricsReport) -> str:
    header = f"scenes: {report.scenes}"
    if report.mean_proposals is not None:
        header += f"  mean proposals: {report.mean_proposals:.1f}"
    table = report_frame(report).to_string(index=False, float_format=lambda v: f"{v:.2f}", na_rep="-")
    return f"{header}\n{table}\n"


def save_report(report: MetricsReport, path: Union[str, Path]) -> None:
    """Write the JSON form and a text table next to it."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        path.with_suffix(".txt").write_text(format_report(report))
    except OSError as e:
        raise DatasetIOError(f"cannot write report {path}: {e}") from e


def load_report(path: Union[str, Path]) -> MetricsReport:
    try:
        return MetricsReport.from_dict(json.loads(Path(path).read_text()))
    except OSError as e:
        raise DatasetIOError(f"cannot read report {path}: {e}") from e
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetIOError(f"malformed report {path}: {e}") from e


def export_xlsx(reports: Dict[str, MetricsReport], path: Union[str, Path]) -> None:
    """Write one sheet per report (e.g. per scene plus the aggregate)."""
    try:
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            for name, report in reports.items():
                report_frame(report).to_excel(writer, sheet_name=name[:31], index=False)
    except OSError as e:
        raise DatasetIOError(f"cannot write spreadsheet {path}: {e}") from e
