"""
Checkpoint container for trained networks.

Layout (little-endian)::

    magic  b"SSCK" | u32 version | u32 tensor count
    per tensor: u16 name length | name (utf-8) | u8 ndim | u32 extent * ndim
                | float64 payload, row-major

Parameters are stored under their module names. Adam state goes under
``adam/<name>/{step,exp_avg,exp_avg_sq}`` and the training step counter
under ``meta/step``.
"""

import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import torch
from torch import nn

from app.numerics.ops import DTYPE
from app.utils.errors import DatasetIOError, ShapeMismatchError
from app.utils.logging_setup import get_logger

logger = get_logger("checkpoint")

MAGIC = b"SSCK"
VERSION = 1
HEADER = struct.Struct("<4sII")
STEP_KEY = "meta/step"

PathLike = Union[str, Path]


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    parts = [HEADER.pack(MAGIC, VERSION, len(tensors))]
    for name, values in tensors.items():
        values = np.asarray(values, dtype='<f8')
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack(f"<B{values.ndim}I", values.ndim, *values.shape))
        parts.append(np.ascontiguousarray(values).tobytes())
    return b"".join(parts)


def decode_tensors(blob: bytes) -> Dict[str, np.ndarray]:
    if len(blob) < HEADER.size:
        raise DatasetIOError("checkpoint is truncated")
    magic, version, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetIOError("not a checkpoint file")
    if version != VERSION:
        raise DatasetIOError(f"unsupported checkpoint version {version}")

    tensors: Dict[str, np.ndarray] = OrderedDict()
    offset = HEADER.size
    try:
        for _ in range(count):
            (length,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset:offset + length].decode("utf-8")
            offset += length
            (ndim,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            values = np.frombuffer(blob, dtype='<f8', count=size, offset=offset)
            offset += 8 * size
            tensors[name] = values.reshape(shape).astype(np.float64)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise DatasetIOError(f"corrupt checkpoint: {e}") from e
    if offset != len(blob):
        raise DatasetIOError("checkpoint has trailing bytes")
    return tensors


def collect_state(model: nn.Module, optimizer: Optional[torch.optim.Optimizer] = None,
                  step: int = 0) -> Dict[str, np.ndarray]:
    """Parameters, optimizer moments and step counter as named arrays."""
    state: Dict[str, np.ndarray] = OrderedDict()
    named = list(model.named_parameters())
    for name, param in named:
        state[name] = param.detach().cpu().numpy().copy()
    if optimizer is not None:
        for name, param in named:
            moments = optimizer.state.get(param, {})
            if "exp_avg" not in moments:
                continue
            state[f"adam/{name}/step"] = np.asarray([float(moments["step"])])
            for key in ("exp_avg", "exp_avg_sq"):
                state[f"adam/{name}/{key}"] = moments[key].detach().cpu().numpy().copy()
    state[STEP_KEY] = np.asarray([float(step)])
    return state


def save_checkpoint(path: PathLike, model: nn.Module,
                    optimizer: Optional[torch.optim.Optimizer] = None, step: int = 0) -> None:
    blob = encode_tensors(collect_state(model, optimizer, step))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(blob)
    except OSError as e:
        raise DatasetIOError(f"cannot write checkpoint {path}: {e}") from e
    logger.info(f"saved {path} at step {step}")


def read_checkpoint(path: PathLike) -> Dict[str, np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DatasetIOError(f"cannot read checkpoint {path}: {e}") from e
    return decode_tensors(blob)


def restore_checkpoint(state: Dict[str, np.ndarray], model: nn.Module,
                       optimizer: Optional[torch.optim.Optimizer] = None) -> int:
    """
    Load named arrays into a model (and optimizer).

    Returns:
        The stored step counter

    Raises:
        ShapeMismatchError: a parameter is missing or has another shape
    """
    named = list(model.named_parameters())
    for name, param in named:
        if name not in state:
            raise ShapeMismatchError(name, tuple(param.shape))
        if tuple(state[name].shape) != tuple(param.shape):
            raise ShapeMismatchError(name, tuple(param.shape), tuple(state[name].shape))
    with torch.no_grad():
        for name, param in named:
            param.copy_(torch.as_tensor(state[name], dtype=DTYPE))

    step = int(state.get(STEP_KEY, np.zeros(1))[0])
    if optimizer is not None and step > 0:
        for name, param in named:
            avg = state.get(f"adam/{name}/exp_avg")
            avg_sq = state.get(f"adam/{name}/exp_avg_sq")
            param_step = state.get(f"adam/{name}/step")
            if avg is None or avg_sq is None or param_step is None:
                continue
            optimizer.state[param] = {
                'step': torch.tensor(float(param_step[0])),
                'exp_avg': torch.as_tensor(avg, dtype=DTYPE).clone(),
                'exp_avg_sq': torch.as_tensor(avg_sq, dtype=DTYPE).clone(),
            }
    return step


def load_checkpoint(path: PathLike, model: nn.Module,
                    optimizer: Optional[torch.optim.Optimizer] = None) -> int:
    return restore_checkpoint(read_checkpoint(path), model, optimizer)
