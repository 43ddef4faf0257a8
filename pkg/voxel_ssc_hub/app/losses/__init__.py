"""
Training losses and range-stratified evaluation.
"""

from .losses import (
    ClassWeights,
    affinity_loss,
    compute_class_weights,
    geometric_affinity,
    semantic_affinity,
    semantic_loss,
    stage2_loss,
)
from .metrics import (
    DEFAULT_RANGES,
    MetricsReport,
    RangeMetrics,
    aggregate_reports,
    evaluate,
    export_xlsx,
    format_report,
    load_report,
    report_frame,
    save_report,
)

__all__ = [
    'ClassWeights',
    'affinity_loss',
    'compute_class_weights',
    'geometric_affinity',
    'semantic_affinity',
    'semantic_loss',
    'stage2_loss',
    'DEFAULT_RANGES',
    'MetricsReport',
    'RangeMetrics',
    'aggregate_reports',
    'evaluate',
    'export_xlsx',
    'format_report',
    'load_report',
    'report_frame',
    'save_report',
]
