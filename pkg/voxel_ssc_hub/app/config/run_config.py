"""
Run configuration.

One frozen dataclass holds every knob of a run. On disk it is an INI file
with one section per concern; floats are written with ``repr`` so a saved
config loads back bit-identical.
"""

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from app.geometry.camera import CameraIntrinsics
from app.geometry.volume import VolumeSpec
from app.losses.metrics import range_window
from app.networks.features import FeatureExtractor
from app.networks.occupancy_net import QueryMode
from app.utils.errors import DatasetIOError, InvalidInputError

SECTIONS = ("volume", "camera", "model", "data", "query", "train", "eval")
TEMPORAL_MODES = ("online", "offline")


def _option(section: str, default, kind: Optional[str] = None):
    kind = kind or type(default).__name__
    return field(default=default, metadata={'section': section, 'kind': kind})


@dataclass(frozen=True)
class RunConfig:
    # [volume]
    origin: Tuple[float, float, float] = _option("volume", (0.0, -6.4, 0.0), "floats")
    voxel_size: float = _option("volume", 0.4)
    dims: Tuple[int, int, int] = _option("volume", (32, 32, 8), "ints")
    query_dims: Tuple[int, int, int] = _option("volume", (16, 16, 4), "ints")
    # [camera]
    image_width: int = _option("camera", 64)
    image_height: int = _option("camera", 48)
    fu: float = _option("camera", 32.0)
    fv: float = _option("camera", 32.0)
    cu: float = _option("camera", 32.0)
    cv: float = _option("camera", 24.0)
    camera_height: float = _option("camera", 1.6)
    # [model]
    feature_dim: int = _option("model", 32)
    sampling_points: int = _option("model", 8)
    heads: int = _option("model", 1)
    cross_layers: int = _option("model", 3)
    self_layers: int = _option("model", 2)
    feature_scale: float = _option("model", 0.25)
    sampling_radius: float = _option("model", 1.0)
    occupancy_channels: int = _option("model", 32)
    cross_attention: bool = _option("model", True)
    self_attention: bool = _option("model", True)
    # [data]
    class_count: int = _option("data", 4)
    object_min: int = _option("data", 2)
    object_max: int = _option("data", 6)
    frames: int = _option("data", 1)
    temporal_mode: str = _option("data", "online")
    frame_step: float = _option("data", 0.8)
    depth_noise: float = _option("data", 0.0)
    # [query]
    query_mode: str = _option("query", "occupancy")
    threshold: float = _option("query", 0.5)
    # [train]
    learning_rate: float = _option("train", 2e-4)
    stage1_steps: int = _option("train", 2000)
    stage2_steps: int = _option("train", 5000)
    seed: int = _option("train", 0)
    affinity: bool = _option("train", True)
    log_every: int = _option("train", 50)
    # [eval]
    ranges: Tuple[float, ...] = _option("eval", (3.2, 6.4, 12.8), "floats")

    def volume_spec(self) -> VolumeSpec:
        return VolumeSpec(self.origin, self.voxel_size, self.dims, self.query_dims)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fu, self.fv, self.cu, self.cv, self.image_width, self.image_height)

    def mode(self) -> QueryMode:
        return QueryMode.parse(self.query_mode)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict:
        data = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}

    def validate(self) -> "RunConfig":
        """
        Check every value against the operations that consume it.

        Returns:
            self, for chaining

        Raises:
            InvalidInputError: naming the offending option
        """
        spec = self.volume_spec()
        self.intrinsics()
        FeatureExtractor(self.feature_dim, self.feature_scale).check_extents(self.image_height, self.image_width)
        self.mode()
        if self.sampling_points < 1:
            raise InvalidInputError("model.sampling_points must be at least 1")
        if self.heads < 1 or self.feature_dim % self.heads:
            raise InvalidInputError(f"model.heads ({self.heads}) must divide model.feature_dim ({self.feature_dim})")
        if self.cross_layers < 0 or self.self_layers < 0:
            raise InvalidInputError("layer counts cannot be negative")
        if self.sampling_radius < 0 or self.occupancy_channels < 1:
            raise InvalidInputError("model.sampling_radius must be >= 0 and model.occupancy_channels >= 1")
        if not 2 <= self.class_count <= 254:
            raise InvalidInputError(f"data.class_count must be in [2, 254], got {self.class_count}")
        if not 0 <= self.object_min <= self.object_max:
            raise InvalidInputError("data.object_min/object_max must form a non-negative range")
        if self.frames < 1:
            raise InvalidInputError("data.frames must be at least 1")
        if self.temporal_mode not in TEMPORAL_MODES:
            raise InvalidInputError(f"data.temporal_mode must be one of {TEMPORAL_MODES}")
        if self.depth_noise < 0 or self.camera_height <= 0:
            raise InvalidInputError("data.depth_noise must be >= 0 and camera.camera_height > 0")
        if not 0.0 < self.threshold < 1.0:
            raise InvalidInputError("query.threshold must be in (0, 1)")
        if self.learning_rate <= 0:
            raise InvalidInputError("train.learning_rate must be positive")
        if self.stage1_steps < 0 or self.stage2_steps < 0 or self.log_every < 1:
            raise InvalidInputError("step counts cannot be negative and train.log_every must be >= 1")
        for range_m in self.ranges:
            range_window(spec, range_m)
        return self


def _format(value, kind: str) -> str:
    if kind in ("floats", "ints"):
        return ", ".join(repr(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    return repr(value) if kind == "float" else str(value)


def _parse(text: str, kind: str, name: str):
    try:
        if kind == "floats":
            return tuple(float(v) for v in text.split(",") if v.strip())
        if kind == "ints":
            return tuple(int(v) for v in text.split(",") if v.strip())
        if kind == "bool":
            lowered = text.strip().lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(text)
            return lowered in ("true", "1", "yes", "on")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text.strip()
    except ValueError:
        raise InvalidInputError(f"option '{name}' cannot parse '{text}' as {kind}") from None


def config_from_parser(parser: configparser.ConfigParser, base: Optional[RunConfig] = None) -> RunConfig:
    values = {}
    known = set()
    for f in fields(RunConfig):
        section, kind = f.metadata['section'], f.metadata['kind']
        known.add((section, f.name))
        if parser.has_option(section, f.name):
            values[f.name] = _parse(parser.get(section, f.name), kind, f"{section}.{f.name}")
    for section in parser.sections():
        if section not in SECTIONS:
            raise InvalidInputError(f"unknown config section [{section}]")
        for option in parser.options(section):
            if (section, option) not in known:
                raise InvalidInputError(f"unknown option '{option}' in [{section}]")
    return replace(base or RunConfig(), **values)


def load_config(path: Union[str, Path], base: Optional[RunConfig] = None) -> RunConfig:
    """Read and validate an INI config; missing options keep ``base`` values."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except OSError as e:
        raise DatasetIOError(f"cannot read config {path}: {e}") from e
    except configparser.Error as e:
        raise InvalidInputError(f"malformed config {path}: {e}") from e
    return config_from_parser(parser, base).validate()


def config_text(config: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    for section in SECTIONS:
        parser.add_section(section)
    for f in fields(RunConfig):
        parser.set(f.metadata['section'], f.name, _format(getattr(config, f.name), f.metadata['kind']))
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(section))
        lines.append("")
    return "\n".join(lines)


def save_config(config: RunConfig, path: Union[str, Path]) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(config_text(config))
    except OSError as e:
        raise DatasetIOError(f"cannot write config {path}: {e}") from e
