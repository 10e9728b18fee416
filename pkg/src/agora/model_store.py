"""On-disk formats for model weights and labeled datasets.

Weight files are binary and little-endian: a fixed magic, a format
version, the full model configuration, every parameter tensor as raw
float64 in declaration order, and a trailing CRC-32 over all preceding
bytes. Loading verifies the checksum before trusting anything else, so
a flipped byte anywhere in the file surfaces as ``ChecksumMismatch``
rather than as silently wrong weights.

Dataset files are line-oriented text so they can be inspected and
diffed: one sample per line, the label first, then one block of 1036
comma-separated feature values per timestep, timesteps separated by
semicolons. Floats are written with ``repr`` and round-trip bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import ChecksumMismatch, ConfigInvalid, ShapeMismatch, VersionMismatch
from .training import LabeledSample
from .transformer import ModelConfig, ModelWeights, parameter_shapes

WEIGHT_MAGIC = b"AGTT"
WEIGHT_VERSION = 1

# magic + u32 version + 7 u32 config ints + 2 f64 config floats.
_HEADER = struct.Struct("<4sI7Idd")

PathLike = Union[str, Path]


def _config_tuple(config: ModelConfig):
    return (
        config.input_dim,
        config.model_dim,
        config.heads,
        config.encoder_layers,
        config.decoder_layers,
        config.ff_dim,
        config.seq_len,
        config.dropout,
        config.layernorm_eps,
    )


def save_weights(weights: ModelWeights, path: PathLike) -> None:
    """Write ``weights`` to ``path``; the round trip is bit-exact."""
    parts = [_HEADER.pack(WEIGHT_MAGIC, WEIGHT_VERSION, *_config_tuple(weights.config))]
    for name, shape in parameter_shapes(weights.config):
        tensor = weights.params[name]
        if tensor.shape != shape:
            raise ShapeMismatch(f"tensor {name}: expected {shape}, found {tensor.shape}")
        parts.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    body = b"".join(parts)
    blob = body + struct.pack("<I", zlib.crc32(body))
    Path(path).write_bytes(blob)


def load_weights(path: PathLike, expected_config: Optional[ModelConfig] = None) -> ModelWeights:
    """Read a weight file, verifying checksum, version and shape.

    ``expected_config``, when given, must match the configuration stored
    in the file exactly (``ShapeMismatch`` otherwise).
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + 4:
        raise ChecksumMismatch(f"{path}: file too short to be a weight file")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != stored_crc:
        raise ChecksumMismatch(f"{path}: checksum mismatch")
    magic, version, *fields = _HEADER.unpack_from(body)
    if magic != WEIGHT_MAGIC:
        raise VersionMismatch(f"{path}: not a weight file (bad magic {magic!r})")
    if version != WEIGHT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {WEIGHT_VERSION}")
    ints, floats = fields[:7], fields[7:]
    config = ModelConfig(
        input_dim=ints[0],
        model_dim=ints[1],
        heads=ints[2],
        encoder_layers=ints[3],
        decoder_layers=ints[4],
        ff_dim=ints[5],
        seq_len=ints[6],
        dropout=floats[0],
        layernorm_eps=floats[1],
    )
    if expected_config is not None and _config_tuple(config) != _config_tuple(expected_config):
        raise ShapeMismatch(
            f"{path}: stored config {_config_tuple(config)} does not match "
            f"expected {_config_tuple(expected_config)}"
        )
    offset = _HEADER.size
    params = {}
    for name, shape in parameter_shapes(config):
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(body):
            raise ShapeMismatch(f"{path}: truncated tensor payload at {name}")
        params[name] = np.frombuffer(body[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(body):
        raise ShapeMismatch(f"{path}: {len(body) - offset} trailing payload bytes")
    return ModelWeights(config, params)


def _format_row(values: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in values)


def save_dataset(samples: Sequence[LabeledSample], path: PathLike) -> None:
    """Write samples as text: ``label;t0;...;tN`` with comma-joined rows."""
    lines = []
    for sample in samples:
        features = np.asarray(sample.features, dtype=np.float64)
        if features.ndim != 2:
            raise ShapeMismatch(f"sample features must be 2-D, got {features.shape}")
        blocks = [repr(float(sample.label))]
        blocks.extend(_format_row(row) for row in features)
        lines.append(";".join(blocks))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_dataset(path: PathLike) -> List[LabeledSample]:
    """Read a dataset file; every line must have the same shape."""
    samples: List[LabeledSample] = []
    shape = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            blocks = line.split(";")
            if len(blocks) < 2:
                raise ConfigInvalid(f"{path}:{lineno}: expected 'label;timesteps...'")
            try:
                label = float(blocks[0])
                rows = [
                    np.fromiter((float(v) for v in block.split(",")), dtype=np.float64)
                    for block in blocks[1:]
                ]
            except ValueError as exc:
                raise ConfigInvalid(f"{path}:{lineno}: non-numeric value ({exc})") from exc
            features = np.stack(rows)
            if shape is None:
                shape = features.shape
            elif features.shape != shape:
                raise ShapeMismatch(
                    f"{path}:{lineno}: sample shape {features.shape} differs from {shape}"
                )
            samples.append(LabeledSample(features=features, label=label))
    return samples
