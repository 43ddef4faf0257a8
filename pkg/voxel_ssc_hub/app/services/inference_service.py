"""
Inference service: writes M_out and the predicted semantic grid per scene.
"""

from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from app.config.run_config import RunConfig
from app.services.dataset_service import SceneSample
from app.services.pipeline_service import load_stage1, load_stage2, run_pipeline
from app.utils.errors import DatasetIOError
from app.utils.logging_setup import get_logger
from app.voxel.io import save_occupancy, save_voxel_grid

logger = get_logger("infer")


class InferenceService:
    """Service class for running the pipeline without scoring it."""

    def __init__(self, config: RunConfig):
        self.config = config

    def infer(self, samples: Sequence[SceneSample], stage1_checkpoint: Optional[Union[str, Path]],
              stage2_checkpoint: Union[str, Path], out_dir: Union[str, Path]) -> Dict[str, Dict]:
        """
        Returns:
            Per-scene file paths and proposal counts
        """
        stage1 = load_stage1(self.config, stage1_checkpoint)
        stage2 = load_stage2(self.config, stage2_checkpoint)
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DatasetIOError(f"cannot create output directory {out_dir}: {e}") from e

        outputs = {}
        for sample in samples:
            result = run_pipeline(sample, self.config, stage2, stage1)
            m_out_path = out_dir / f"{sample.name}_m_out.vox"
            pred_path = out_dir / f"{sample.name}_pred.vox"
            save_occupancy(result.m_out, m_out_path)
            save_voxel_grid(result.prediction, pred_path)
            outputs[sample.name] = {'m_out': str(m_out_path), 'prediction': str(pred_path),
                                    'proposals': result.proposals}
        logger.info(f"wrote predictions for {len(outputs)} scenes to {out_dir}")
        return outputs
