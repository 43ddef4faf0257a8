"""
Two-stage pipeline assembly: model construction from a config, query mask
selection per scene and the full forward pass to a semantic grid.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import torch

from app.config.run_config import RunConfig
from app.geometry.camera import Camera
from app.geometry.volume import Resolution
from app.networks.checkpoint import load_checkpoint
from app.networks.completion import Stage2Model
from app.networks.init import init_parameters
from app.networks.occupancy_net import OccupancyNet, select_query_mask
from app.numerics.rng import derive_seed, make_torch_rng
from app.services.dataset_service import SceneSample
from app.utils.errors import MissingDependencyError
from app.utils.logging_setup import get_logger
from app.voxel.grid import OccupancyGrid, VoxelGrid

logger = get_logger("pipeline")

STAGE1_STREAM = 1
STAGE2_STREAM = 2
QUERY_STREAM = 3


def build_stage1(config: RunConfig) -> OccupancyNet:
    """Occupancy net initialized from the run seed."""
    net = OccupancyNet(config.volume_spec(), config.occupancy_channels)
    init_parameters(net, make_torch_rng(derive_seed(config.seed, STAGE1_STREAM)))
    return net


def build_stage2(config: RunConfig) -> Stage2Model:
    """Completion model initialized from the run seed."""
    model = Stage2Model(
        config.volume_spec(), config.class_count, feature_dim=config.feature_dim,
        points=config.sampling_points, heads=config.heads, cross_layers=config.cross_layers,
        self_layers=config.self_layers, feature_scale=config.feature_scale,
        radius=config.sampling_radius, use_cross_attention=config.cross_attention,
        use_self_attention=config.self_attention)
    init_parameters(model, make_torch_rng(derive_seed(config.seed, STAGE2_STREAM)))
    return model


def require_file(path: Optional[Union[str, Path]], what: str) -> Path:
    if path is None or not Path(path).is_file():
        raise MissingDependencyError(f"{what} not found: {path}")
    return Path(path)


def load_stage1(config: RunConfig, checkpoint: Optional[Union[str, Path]]) -> Optional[OccupancyNet]:
    """Stage-1 net for query modes that need it, else None."""
    if not config.mode().needs_network:
        return None
    net = build_stage1(config)
    load_checkpoint(require_file(checkpoint, "stage-1 checkpoint"), net)
    net.eval()
    return net


def load_stage2(config: RunConfig, checkpoint: Union[str, Path]) -> Stage2Model:
    model = build_stage2(config)
    load_checkpoint(require_file(checkpoint, "stage-2 checkpoint"), model)
    model.eval()
    return model


def scene_views(sample: SceneSample, config: RunConfig):
    """Images Tensor[T, 3, H, W] and cameras of the configured frame count."""
    frames = sample.frames[:config.frames]
    if len(frames) < config.frames:
        logger.warning(f"{sample.name} has {len(sample.frames)} frames, {config.frames} requested")
    images = sample.images()[:len(frames)]
    cameras: List[Camera] = [frame.camera for frame in frames]
    return images, cameras


def query_mask(sample: SceneSample, config: RunConfig,
               stage1: Optional[OccupancyNet] = None) -> OccupancyGrid:
    """M_out for a scene under the configured query mode."""
    generator = make_torch_rng(derive_seed(config.seed, QUERY_STREAM, sample.seed))
    return select_query_mask(config.mode(), config.volume_spec(), sample.m_in, net=stage1,
                             gt=sample.gt, generator=generator, threshold=config.threshold)


@dataclass(eq=False)
class PipelineResult:
    logits: torch.Tensor
    prediction: VoxelGrid
    m_out: OccupancyGrid

    @property
    def proposals(self) -> int:
        return self.m_out.popcount


def predict_labels(logits: torch.Tensor, config: RunConfig) -> VoxelGrid:
    labels = logits.detach().argmax(dim=-1).cpu().numpy().astype(np.uint8)
    return VoxelGrid(config.volume_spec(), labels)


def run_pipeline(sample: SceneSample, config: RunConfig, stage2: Stage2Model,
                 stage1: Optional[OccupancyNet] = None) -> PipelineResult:
    """
    Full two-stage inference on one scene.

    Returns:
        PipelineResult with logits, argmax labels and the M_out used
    """
    m_out = query_mask(sample, config, stage1)
    total = config.volume_spec().cell_count(Resolution.QUERY)
    logger.info(f"{sample.name}: N_p / N_q = {m_out.popcount} / {total}")
    images, cameras = scene_views(sample, config)
    with torch.no_grad():
        logits = stage2(images, cameras, m_out)
    return PipelineResult(logits, predict_labels(logits, config), m_out)
