"""
Named run presets.

Each preset is a set of overrides on top of the desk defaults; the ablation
presets change exactly the knob their name refers to.
"""

from typing import Dict, List

from app.config.run_config import RunConfig
from app.utils.errors import InvalidInputError

PRESETS = {
    "desk": {
        "description": "Desk-scale defaults: 32x32x8 output, 16x16x4 queries, M = 4",
        "overrides": {},
    },
    "overfit": {
        "description": "Single-scene overfitting run with a higher learning rate",
        "overrides": {"learning_rate": 1e-3, "object_min": 3, "object_max": 3,
                      "stage1_steps": 2000, "stage2_steps": 5000},
    },
    "stereo_depth": {
        "description": "Oracle depth with stereo-like noise",
        "overrides": {"depth_noise": 0.02},
    },
    "mono_depth": {
        "description": "Oracle depth with monocular-like noise",
        "overrides": {"depth_noise": 0.08},
    },
    "dense_query": {
        "description": "Every voxel query is proposed",
        "overrides": {"query_mode": "dense"},
    },
    "random_query": {
        "description": "10% of voxel queries proposed uniformly at random",
        "overrides": {"query_mode": "random:10"},
    },
    "no_self_attention": {
        "description": "Stage 2 without deformable self-attention",
        "overrides": {"self_attention": False},
    },
    "no_cross_attention": {
        "description": "Stage 2 without image cross-attention",
        "overrides": {"cross_attention": False},
    },
    "no_depth_correction": {
        "description": "Queries from pooled ground-truth occupancy instead of the correction net",
        "overrides": {"query_mode": "oracle"},
    },
    "no_depth_estimation": {
        "description": "Queries from pooled raw depth occupancy, no correction net",
        "overrides": {"query_mode": "raw"},
    },
    "temporal_online": {
        "description": "Current frame plus two previous frames",
        "overrides": {"frames": 3, "temporal_mode": "online"},
    },
    "temporal_offline": {
        "description": "Current frame plus one previous and one future frame",
        "overrides": {"frames": 3, "temporal_mode": "offline"},
    },
    "full_scale": {
        "description": "Full attention recipe: d = 128, 1/16 features, finer 64x64x8 volume",
        "overrides": {"voxel_size": 0.2, "dims": (64, 64, 8), "query_dims": (32, 32, 4),
                      "image_width": 256, "image_height": 128, "fu": 128.0, "fv": 128.0,
                      "cu": 128.0, "cv": 64.0, "feature_dim": 128, "feature_scale": 0.0625},
    },
}


def get_preset(name: str) -> RunConfig:
    """Build the validated config of a preset."""
    preset = PRESETS.get(name)
    if preset is None:
        raise InvalidInputError(f"unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    return RunConfig().replace(**preset["overrides"]).validate()


def get_all_presets() -> Dict[str, RunConfig]:
    return {name: get_preset(name) for name in PRESETS}


def get_preset_names() -> List[str]:
    return list(PRESETS)
