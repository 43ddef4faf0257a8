"""
Synthetic dataset service: builds scene samples in memory, writes them as a
dataset directory and reads them back.

Layout::

    manifest.json
    scene_0000/scene.json, gt.vox, m_in.vox
    scene_0000/frame_00_camera.json, frame_00_depth.dep, frame_00_image.ppm
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import torch

from app.config.run_config import RunConfig, config_text
from app.geometry.camera import Camera, back_project, load_camera, save_camera
from app.networks.features import frame_tensor
from app.numerics.rng import derive_seed
from app.synth.frames import DepthRaster, ImageFrame
from app.synth.io import load_depth_raster, load_image, load_scene, save_depth_raster, save_image, save_scene
from app.synth.render import render_depth, render_image, sequence_cameras
from app.synth.scene import Scene, generate_scene
from app.utils.errors import DatasetIOError
from app.utils.logging_setup import get_logger
from app.voxel.grid import OccupancyGrid, VoxelGrid
from app.voxel.io import load_occupancy, load_voxel_grid, save_occupancy, save_voxel_grid
from app.voxel.voxelizer import voxelize_points

logger = get_logger("dataset")

MANIFEST = "manifest.json"
MANIFEST_VERSION = 1


@dataclass(eq=False)
class SceneSample:
    """Everything the pipeline consumes for one scene; frames are current-first."""

    name: str
    seed: int
    scene: Scene
    gt: VoxelGrid
    m_in: OccupancyGrid
    frames: List[ImageFrame]
    depths: List[DepthRaster]

    def images(self) -> torch.Tensor:
        """Frames as Tensor[T, 3, H, W]."""
        return torch.stack([frame_tensor(frame) for frame in self.frames])

    @property
    def cameras(self) -> List[Camera]:
        return [frame.camera for frame in self.frames]


def depth_occupancy(depth: DepthRaster, config: RunConfig) -> OccupancyGrid:
    """M_in: back-projected depth voxelized onto the output lattice."""
    camera = depth.camera
    points = back_project(depth, camera.intrinsics, camera.pose)
    return voxelize_points(points, config.volume_spec())


def build_sample(config: RunConfig, seed: int, name: str = "scene") -> SceneSample:
    """
    Generate a scene and render its sensor data.

    Args:
        config: Volume, camera and data settings
        seed: Scene seed; depth noise seeds derive from it per frame
        name: Sample name

    Returns:
        SceneSample whose M_in comes from the current frame's depth
    """
    spec = config.volume_spec()
    scene, gt = generate_scene(seed, spec, config.class_count, (config.object_min, config.object_max))
    frames, depths = [], []
    for index, (t, camera) in enumerate(sequence_cameras(
            config.intrinsics(), config.camera_height, config.frames,
            config.frame_step, config.temporal_mode)):
        depths.append(render_depth(scene, camera, config.depth_noise, derive_seed(seed, index)))
        frames.append(render_image(scene, camera, t))
    return SceneSample(name, int(seed), scene, gt, depth_occupancy(depths[0], config), frames, depths)


class DatasetService:
    """Service class for synthesizing and loading datasets."""

    def __init__(self, config: RunConfig):
        self.config = config

    def synthesize(self, out_dir: Union[str, Path], count: int, seed: Optional[int] = None) -> Dict:
        """
        Write ``count`` scenes and a manifest.

        Returns:
            The manifest dictionary
        """
        seed = self.config.seed if seed is None else int(seed)
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DatasetIOError(f"cannot create dataset directory {out_dir}: {e}") from e

        entries = []
        for index in range(int(count)):
            name = f"scene_{index:04d}"
            sample = build_sample(self.config, derive_seed(seed, index), name)
            entries.append(self._write_sample(out_dir, sample))
            logger.info(f"{name}: {len(sample.scene.objects) - 1} objects, "
                        f"{sample.m_in.popcount} depth voxels")

        manifest = {
            'version': MANIFEST_VERSION,
            'seed': seed,
            'config': self.config.to_dict(),
            'scenes': entries,
        }
        self._write(out_dir / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest

    @staticmethod
    def _write(path: Path, text: str) -> None:
        try:
            path.write_text(text)
        except OSError as e:
            raise DatasetIOError(f"cannot write {path}: {e}") from e

    def _write_sample(self, out_dir: Path, sample: SceneSample) -> Dict:
        scene_dir = out_dir / sample.name
        try:
            scene_dir.mkdir(exist_ok=True)
        except OSError as e:
            raise DatasetIOError(f"cannot create {scene_dir}: {e}") from e
        entry = {
            'name': sample.name,
            'seed': sample.seed,
            'scene': f"{sample.name}/scene.json",
            'gt': f"{sample.name}/gt.vox",
            'm_in': f"{sample.name}/m_in.vox",
            'frames': [],
        }
        save_scene(sample.scene, out_dir / entry['scene'])
        save_voxel_grid(sample.gt, out_dir / entry['gt'])
        save_occupancy(sample.m_in, out_dir / entry['m_in'])
        for index, (frame, depth) in enumerate(zip(sample.frames, sample.depths)):
            prefix = f"{sample.name}/frame_{index:02d}"
            files = {'t': frame.t, 'camera': f"{prefix}_camera.json",
                     'depth': f"{prefix}_depth.dep", 'image': f"{prefix}_image.ppm"}
            save_camera(frame.camera, out_dir / files['camera'])
            save_depth_raster(depth, out_dir / files['depth'])
            save_image(frame, out_dir / files['image'])
            entry['frames'].append(files)
        return entry

    def load_manifest(self, dataset_dir: Union[str, Path]) -> Dict:
        path = Path(dataset_dir) / MANIFEST
        try:
            manifest = json.loads(path.read_text())
        except OSError as e:
            raise DatasetIOError(f"cannot read manifest {path}: {e}") from e
        except ValueError as e:
            raise DatasetIOError(f"malformed manifest {path}: {e}") from e
        if manifest.get('version') != MANIFEST_VERSION:
            raise DatasetIOError(f"unsupported manifest version {manifest.get('version')}")
        return manifest

    def load(self, dataset_dir: Union[str, Path], limit: Optional[int] = None) -> List[SceneSample]:
        """Read every scene listed in the manifest (up to ``limit``)."""
        dataset_dir = Path(dataset_dir)
        spec = self.config.volume_spec()
        entries = self.load_manifest(dataset_dir)['scenes']
        if limit is not None:
            entries = entries[:limit]
        samples = []
        for entry in entries:
            frames, depths = [], []
            for files in entry['frames']:
                camera = load_camera(dataset_dir / files['camera'])
                frames.append(load_image(dataset_dir / files['image'], camera, int(files['t'])))
                depths.append(load_depth_raster(dataset_dir / files['depth'], camera))
            if not frames:
                raise DatasetIOError(f"{entry['name']} lists no frames")
            samples.append(SceneSample(
                entry['name'], int(entry['seed']), load_scene(dataset_dir / entry['scene']),
                load_voxel_grid(dataset_dir / entry['gt'], spec),
                load_occupancy(dataset_dir / entry['m_in'], spec), frames, depths))
        logger.info(f"loaded {len(samples)} scenes from {dataset_dir}")
        return samples

    def describe(self) -> str:
        """Generation settings as config-file text, readable by ``load_config``."""
        return config_text(self.config)
