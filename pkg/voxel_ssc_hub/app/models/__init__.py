"""
SQLAlchemy models for the run registry.
"""

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func

from app.database.config import Base


class DatasetRecord(Base):
    """A synthesized dataset directory."""
    __tablename__ = 'datasets'

    id = Column(Integer, primary_key=True, autoincrement=True)
    path = Column(String(1024), nullable=False)
    seed = Column(Integer, nullable=False)
    scene_count = Column(Integer, nullable=False)
    config_text = Column(Text)
    created_at = Column(DateTime, default=func.current_timestamp())


class TrainingRun(Base):
    """One stage-1 or stage-2 training run."""
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    stage = Column(Integer, nullable=False)
    dataset_path = Column(String(1024), nullable=False)
    checkpoint_path = Column(String(1024), nullable=False)
    preset = Column(String(64))
    query_mode = Column(String(32))
    seed = Column(Integer, nullable=False)
    steps = Column(Integer, nullable=False, default=0)
    status = Column(String(32), nullable=False, default='running')  # running, finished, failed
    final_loss = Column(Float)
    config_text = Column(Text)
    started_at = Column(DateTime, default=func.current_timestamp())
    finished_at = Column(DateTime)

    losses = relationship("LossRecord", back_populates="run", cascade="all, delete-orphan")


class LossRecord(Base):
    """Loss value of one logged training step."""
    __tablename__ = 'loss_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False)
    step = Column(Integer, nullable=False)
    loss = Column(Float, nullable=False)

    run = relationship("TrainingRun", back_populates="losses")


class EvaluationRecord(Base):
    """Aggregate metrics of one evaluation at one range."""
    __tablename__ = 'evaluations'

    id = Column(Integer, primary_key=True, autoincrement=True)
    dataset_path = Column(String(1024), nullable=False)
    label = Column(String(255))
    query_mode = Column(String(32))
    range_m = Column(Float, nullable=False)
    iou = Column(Float, nullable=False)
    precision = Column(Float, nullable=False)
    recall = Column(Float, nullable=False)
    miou = Column(Float, nullable=False)
    scenes = Column(Integer, nullable=False)
    mean_proposals = Column(Float)
    report_path = Column(String(1024))
    created_at = Column(DateTime, default=func.current_timestamp())
