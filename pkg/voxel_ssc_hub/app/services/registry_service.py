"""
Run registry service: records datasets, training runs, losses and
evaluation summaries.

Bookkeeping failures are logged and swallowed so that training and
evaluation never abort because of the registry.
"""

from datetime import datetime
from typing import Iterable, List, Optional, Tuple

import pandas as pd
from sqlalchemy.orm import Session

from app.database.config import SessionLocal
from app.database.manager import get_database_manager
from app.losses.metrics import MetricsReport
from app.models import DatasetRecord, EvaluationRecord, LossRecord, TrainingRun
from app.utils.logging_setup import get_logger

logger = get_logger("registry")


class RegistryService:
    """Service class for run-registry operations."""

    def __init__(self):
        get_database_manager().initialize_schema()
        self.db: Session = SessionLocal()

    def __del__(self):
        if hasattr(self, 'db'):
            self.db.close()

    def _commit(self, what: str) -> bool:
        try:
            self.db.commit()
            return True
        except Exception as e:
            self.db.rollback()
            logger.error(f"Failed to record {what}: {e}")
            return False

    def register_dataset(self, path: str, seed: int, scene_count: int,
                         config_text: str = None) -> Optional[DatasetRecord]:
        record = DatasetRecord(path=str(path), seed=int(seed), scene_count=int(scene_count),
                               config_text=config_text, created_at=datetime.now())
        self.db.add(record)
        return record if self._commit("dataset") else None

    def start_run(self, stage: int, dataset_path: str, checkpoint_path: str, seed: int,
                  query_mode: str = None, preset: str = None,
                  config_text: str = None) -> Optional[TrainingRun]:
        run = TrainingRun(stage=int(stage), dataset_path=str(dataset_path),
                          checkpoint_path=str(checkpoint_path), seed=int(seed),
                          query_mode=query_mode, preset=preset, config_text=config_text,
                          status='running', started_at=datetime.now())
        self.db.add(run)
        if not self._commit("training run"):
            return None
        self.db.refresh(run)
        logger.info(f"run {run.id} started (stage {stage})")
        return run

    def log_losses(self, run_id: int, entries: Iterable[Tuple[int, float]]) -> bool:
        for step, loss in entries:
            self.db.add(LossRecord(run_id=run_id, step=int(step), loss=float(loss)))
        return self._commit("losses")

    def finish_run(self, run_id: int, steps: int, final_loss: Optional[float],
                   status: str = 'finished') -> bool:
        run = self.db.query(TrainingRun).filter(TrainingRun.id == run_id).first()
        if run is None:
            logger.warning(f"run {run_id} not found")
            return False
        run.steps = int(steps)
        run.final_loss = None if final_loss is None else float(final_loss)
        run.status = status
        run.finished_at = datetime.now()
        return self._commit("run completion")

    def record_evaluation(self, report: MetricsReport, dataset_path: str, label: str = None,
                          query_mode: str = None, report_path: str = None) -> bool:
        for metrics in report.ranges.values():
            self.db.add(EvaluationRecord(
                dataset_path=str(dataset_path), label=label, query_mode=query_mode,
                range_m=metrics.range_m, iou=metrics.iou, precision=metrics.precision,
                recall=metrics.recall, miou=metrics.miou, scenes=report.scenes,
                mean_proposals=report.mean_proposals,
                report_path=None if report_path is None else str(report_path),
                created_at=datetime.now()))
        return self._commit("evaluation")

    def get_run(self, run_id: int) -> Optional[TrainingRun]:
        return self.db.query(TrainingRun).filter(TrainingRun.id == run_id).first()

    def list_runs(self, stage: Optional[int] = None) -> List[TrainingRun]:
        query = self.db.query(TrainingRun)
        if stage is not None:
            query = query.filter(TrainingRun.stage == stage)
        return query.order_by(TrainingRun.id).all()

    def list_datasets(self) -> List[DatasetRecord]:
        return self.db.query(DatasetRecord).order_by(DatasetRecord.id).all()

    def loss_frame(self, run_id: int) -> pd.DataFrame:
        """Logged losses of one run as a (step, loss) DataFrame."""
        rows = (self.db.query(LossRecord.step, LossRecord.loss)
                .filter(LossRecord.run_id == run_id).order_by(LossRecord.step).all())
        return pd.DataFrame(rows, columns=['step', 'loss'])

    def runs_frame(self) -> pd.DataFrame:
        runs = self.list_runs()
        return pd.DataFrame([{
            'id': r.id, 'stage': r.stage, 'status': r.status, 'steps': r.steps,
            'final_loss': r.final_loss, 'query_mode': r.query_mode, 'preset': r.preset,
            'seed': r.seed, 'dataset': r.dataset_path, 'checkpoint': r.checkpoint_path,
            'started_at': r.started_at,
        } for r in runs], columns=['id', 'stage', 'status', 'steps', 'final_loss', 'query_mode',
                                   'preset', 'seed', 'dataset', 'checkpoint', 'started_at'])

    def evaluation_frame(self) -> pd.DataFrame:
        records = self.db.query(EvaluationRecord).order_by(EvaluationRecord.id).all()
        return pd.DataFrame([{
            'id': e.id, 'label': e.label, 'query_mode': e.query_mode, 'range_m': e.range_m,
            'IoU': 100.0 * e.iou, 'Precision': 100.0 * e.precision, 'Recall': 100.0 * e.recall,
            'mIoU': 100.0 * e.miou, 'scenes': e.scenes, 'mean_proposals': e.mean_proposals,
            'dataset': e.dataset_path, 'created_at': e.created_at,
        } for e in records], columns=['id', 'label', 'query_mode', 'range_m', 'IoU', 'Precision',
                                      'Recall', 'mIoU', 'scenes', 'mean_proposals', 'dataset',
                                      'created_at'])
