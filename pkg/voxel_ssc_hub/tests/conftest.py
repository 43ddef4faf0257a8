"""
Shared fixtures for the test suite.

The run registry is pointed at a throwaway database before any ``app``
module is imported, so tests never touch a real registry.
"""

import os
import sys
import tempfile
from pathlib import Path

import pytest

_REGISTRY_DIR = tempfile.mkdtemp(prefix="ssc-tests-")
os.environ.setdefault("SSC_DB_PATH", str(Path(_REGISTRY_DIR) / "registry.db"))
os.environ.setdefault("SSC_SILENT", "1")
os.environ.setdefault("SSC_THREADS", "1")

# Add the package root to Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.config.run_config import RunConfig  # noqa: E402
from app.geometry import CameraIntrinsics, VolumeSpec  # noqa: E402
from app.numerics import make_torch_rng  # noqa: E402

_skip_slow = pytest.mark.skipif(not os.getenv("SSC_RUN_SLOW"), reason="set SSC_RUN_SLOW=1 for long training runs")


def slow(test):
    """Mark a long run: selectable with ``-m slow``, skipped unless SSC_RUN_SLOW is set."""
    return pytest.mark.slow(_skip_slow(test))

# Small enough for per-test model builds: 8x8x4 output, 4x4x2 queries.
TINY_CONFIG = RunConfig(
    origin=(0.0, -1.6, 0.0),
    voxel_size=0.4,
    dims=(8, 8, 4),
    query_dims=(4, 4, 2),
    image_width=32,
    image_height=24,
    fu=16.0,
    fv=16.0,
    cu=16.0,
    cv=12.0,
    camera_height=0.8,
    feature_dim=8,
    sampling_points=4,
    cross_layers=1,
    self_layers=1,
    feature_scale=0.25,
    occupancy_channels=4,
    class_count=3,
    object_min=2,
    object_max=3,
    stage1_steps=3,
    stage2_steps=3,
    log_every=1,
    ranges=(1.6, 3.2),
)


@pytest.fixture
def tiny_config() -> RunConfig:
    return TINY_CONFIG


@pytest.fixture
def tiny_spec() -> VolumeSpec:
    return TINY_CONFIG.volume_spec()


@pytest.fixture
def intrinsics() -> CameraIntrinsics:
    return TINY_CONFIG.intrinsics()


@pytest.fixture
def generator():
    return make_torch_rng(1234)


@pytest.fixture
def tiny_sample():
    from app.services.dataset_service import build_sample
    return build_sample(TINY_CONFIG, seed=7, name="scene_0000")


@pytest.fixture
def workdir(tmp_path) -> Path:
    return tmp_path
