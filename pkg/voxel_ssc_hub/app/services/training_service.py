"""
Training service for both stages.

Stages are trained separately with Adam. Scenes are visited in dataset
order (step ``s`` trains on scene ``s mod N``), so a run is a pure function
of config, seed and dataset, and ``resume`` continues it bit-identically.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import torch
from torch import nn

from app.config.run_config import RunConfig, config_text
from app.losses.losses import compute_class_weights, stage2_loss
from app.networks.checkpoint import load_checkpoint, save_checkpoint
from app.networks.occupancy_net import occupancy_tensor, stage1_loss
from app.numerics.ops import parameter_count, set_deterministic
from app.services.dataset_service import SceneSample
from app.services.pipeline_service import build_stage1, build_stage2, load_stage1, query_mask, scene_views
from app.services.registry_service import RegistryService
from app.utils.errors import DatasetIOError, InvalidInputError, NumericFailureError
from app.utils.logging_setup import get_logger
from app.voxel.voxelizer import downsample_occupancy

logger = get_logger("train")

PathLike = Union[str, Path]


def loss_log_path(checkpoint: PathLike) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_name(f"{checkpoint.stem}_loss.tsv")


@dataclass
class TrainingSummary:
    stage: int
    checkpoint: Path
    loss_log: Path
    start_step: int
    steps: int
    losses: List[float] = field(default_factory=list)
    run_id: Optional[int] = None

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


class TrainingService:
    """Service class for stage-1 and stage-2 training runs."""

    def __init__(self, config: RunConfig, registry: Optional[RegistryService] = None,
                 preset: Optional[str] = None):
        self.config = config
        self.registry = registry
        self.preset = preset

    def train_stage1(self, samples: Sequence[SceneSample], checkpoint: PathLike,
                     steps: Optional[int] = None, resume: bool = False,
                     dataset_path: str = "") -> TrainingSummary:
        """
        Fit the occupancy net to pooled ground-truth occupancy.

        Args:
            samples: Training scenes
            checkpoint: Output checkpoint; the loss log is written next to it
            steps: Total step count (config value when omitted)
            resume: Continue from ``checkpoint`` if it exists
            dataset_path: Recorded in the run registry

        Returns:
            TrainingSummary
        """
        set_deterministic(self.config.seed)
        net = build_stage1(self.config)
        spec = self.config.volume_spec()
        inputs = [occupancy_tensor(s.m_in) for s in samples]
        targets = [downsample_occupancy(s.gt.occupancy(), spec) for s in samples]

        def step_loss(step: int) -> torch.Tensor:
            index = step % len(samples)
            return stage1_loss(net(inputs[index]), targets[index])

        total = self.config.stage1_steps if steps is None else int(steps)
        return self._run(1, net, step_loss, samples, checkpoint, total, resume, dataset_path)

    def train_stage2(self, samples: Sequence[SceneSample], checkpoint: PathLike,
                     stage1_checkpoint: Optional[PathLike] = None, steps: Optional[int] = None,
                     resume: bool = False, dataset_path: str = "") -> TrainingSummary:
        """
        Fit the completion model with stage 1 frozen.

        Raises:
            MissingDependencyError: the query mode needs a stage-1 checkpoint
                that does not exist
        """
        set_deterministic(self.config.seed)
        stage1 = load_stage1(self.config, stage1_checkpoint)
        model = build_stage2(self.config)
        weights = compute_class_weights([s.gt for s in samples], self.config.class_count)
        masks = [query_mask(s, self.config, stage1) for s in samples]
        views = [scene_views(s, self.config) for s in samples]
        logger.info("class weights: " + ", ".join(f"{w:.3f}" for w in weights.values))

        def step_loss(step: int) -> torch.Tensor:
            index = step % len(samples)
            images, cameras = views[index]
            logits = model(images, cameras, masks[index])
            return stage2_loss(logits, samples[index].gt, weights, self.config.affinity)

        total = self.config.stage2_steps if steps is None else int(steps)
        return self._run(2, model, step_loss, samples, checkpoint, total, resume, dataset_path)

    def _run(self, stage: int, model: nn.Module, step_loss: Callable[[int], torch.Tensor],
             samples: Sequence[SceneSample], checkpoint: PathLike, total: int, resume: bool,
             dataset_path: str) -> TrainingSummary:
        if not samples:
            raise InvalidInputError("training needs at least one scene")
        if total < 0:
            raise InvalidInputError(f"step count cannot be negative, got {total}")
        checkpoint = Path(checkpoint)
        log_path = loss_log_path(checkpoint)
        optimizer = torch.optim.Adam(model.parameters(), lr=self.config.learning_rate)
        logger.info(f"stage {stage}: {parameter_count(model.parameters())} parameters, {len(samples)} scenes")

        start = 0
        history: List[str] = []
        if resume and checkpoint.is_file():
            start = load_checkpoint(checkpoint, model, optimizer)
            history = self._read_log(log_path)[:start]
            logger.info(f"resuming stage {stage} from step {start}")

        run_id = self._start_run(stage, dataset_path, checkpoint)
        summary = TrainingSummary(stage, checkpoint, log_path, start, start, run_id=run_id)
        pending: List[Tuple[int, float]] = []
        model.train()
        try:
            for step in range(start, total):
                optimizer.zero_grad()
                loss = step_loss(step)
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise NumericFailureError(f"stage-{stage} loss became non-finite at step {step}")
                loss.backward()
                optimizer.step()

                summary.losses.append(value)
                summary.steps = step + 1
                history.append(f"{step}\t{value!r}")
                pending.append((step, value))
                if (step + 1) % self.config.log_every == 0 or step + 1 == total:
                    logger.info(f"stage {stage} step {step + 1}/{total} loss {value:.6f}")
                    self._log_losses(run_id, pending)
                    pending = []
        except Exception:
            self._finish_run(run_id, summary, 'failed')
            raise

        save_checkpoint(checkpoint, model, optimizer, summary.steps)
        self._write_log(log_path, history)
        self._finish_run(run_id, summary, 'finished')
        return summary

    @staticmethod
    def _read_log(path: Path) -> List[str]:
        if not path.is_file():
            return []
        return [line for line in path.read_text().splitlines() if line]

    @staticmethod
    def _write_log(path: Path, lines: List[str]) -> None:
        try:
            path.write_text("".join(f"{line}\n" for line in lines))
        except OSError as e:
            raise DatasetIOError(f"cannot write loss log {path}: {e}") from e

    def _start_run(self, stage: int, dataset_path: str, checkpoint: Path) -> Optional[int]:
        if self.registry is None:
            return None
        run = self.registry.start_run(stage, dataset_path, str(checkpoint), self.config.seed,
                                      query_mode=self.config.query_mode, preset=self.preset,
                                      config_text=config_text(self.config))
        return None if run is None else run.id

    def _log_losses(self, run_id: Optional[int], entries: List[Tuple[int, float]]) -> None:
        if self.registry is not None and run_id is not None and entries:
            self.registry.log_losses(run_id, entries)

    def _finish_run(self, run_id: Optional[int], summary: TrainingSummary, status: str) -> None:
        if self.registry is not None and run_id is not None:
            self.registry.finish_run(run_id, summary.steps, summary.final_loss, status)
