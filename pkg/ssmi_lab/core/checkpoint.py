"""Named-tensor container used for checkpoints and dataset exports.

Layout (all integers little-endian)::

    "SSMI"                      4 bytes magic
    version                     u32
    metadata length, metadata   u32 + UTF-8 JSON (sorted keys, no whitespace)
    tensor count                u32
    per tensor:
        name length, name       u16 + UTF-8
        ndim                    u8
        dims                    ndim x u64
        data                    prod(dims) x f64, row-major
    crc32                       u32 over every preceding byte
"""

import json
import logging
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import config_hash, lvlm_config_from_dict, lvlm_config_to_dict
from .constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from .errors import CheckpointFormatError, CompatibilityError, ConfigError
from .lvlm import LvlmModel
from .models import FreezeMode, LvlmConfig, Stage

logger = logging.getLogger(__name__)


@dataclass
class Container:
    """Decoded container: JSON metadata plus tensors in file order."""

    metadata: dict[str, Any] = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def encode_container(metadata: dict[str, Any], tensors: dict[str, np.ndarray]) -> bytes:
    meta = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<I", len(tensors)),
    ]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        data = np.asarray(array, dtype="<f8", order="C")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(data.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, blob: bytes, end: int) -> None:
        self.blob = blob
        self.end = end
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if size < 0 or self.offset + size > self.end:
            raise CheckpointFormatError(f"truncated {what}", self.offset)
        chunk = self.blob[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_container(blob: bytes) -> Container:
    """Parse a container, checking magic, CRC, version and every length.

    Raises:
        CheckpointFormatError: Naming the failed check and its byte offset.
    """
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad magic", 0)
    if len(blob) < 12:
        raise CheckpointFormatError("truncated header", len(blob))
    (stored,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored:
        raise CheckpointFormatError("crc mismatch", len(blob) - 4)
    reader = _Reader(blob, len(blob) - 4)
    reader.take(4, "magic")
    (version,) = reader.unpack("<I", "version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported version {version}", 4)
    (meta_len,) = reader.unpack("<I", "metadata length")
    meta_at = reader.offset
    try:
        metadata = json.loads(reader.take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError("metadata is not UTF-8 JSON", meta_at) from exc
    (count,) = reader.unpack("<I", "tensor count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        name_at = reader.offset
        try:
            name = reader.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError("tensor name is not UTF-8", name_at) from exc
        if name in tensors:
            raise CheckpointFormatError(f"duplicate tensor {name!r}", name_at)
        (ndim,) = reader.unpack("<B", "ndim")
        dims = reader.unpack(f"<{ndim}Q", "dims")
        elements = int(np.prod(dims, dtype=np.uint64)) if dims else 1
        payload = reader.take(8 * elements, f"data of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    if reader.offset != reader.end:
        raise CheckpointFormatError("trailing bytes before crc", reader.offset)
    return Container(metadata=metadata, tensors=tensors)


def write_atomic(path: str | Path, blob: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path: str | Path) -> Container:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointFormatError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_container(blob)


@dataclass
class Checkpoint:
    """A model archive: metadata (config hash, stage, step, seed, ...) and tensors."""

    metadata: dict[str, Any]
    tensors: dict[str, np.ndarray]

    @property
    def stage(self) -> Stage:
        return Stage(self.metadata["stage"])

    @property
    def config_hash(self) -> str:
        return str(self.metadata["config_hash"])

    @property
    def model_config(self) -> LvlmConfig:
        try:
            return lvlm_config_from_dict(self.metadata["model"])
        except (KeyError, ConfigError) as exc:
            raise CheckpointFormatError("metadata lacks a valid model section") from exc


def save_checkpoint(model: LvlmModel, meta: dict[str, Any], path: str | Path) -> bytes:
    """Serialize ``model`` with ``meta`` and write it atomically.

    The model section, its hash and the freeze mode are always added to the
    metadata. Returns the bytes written.
    """
    metadata = {
        **meta,
        "kind": "model",
        "model": lvlm_config_to_dict(model.config),
        "config_hash": config_hash(model.config),
        "freeze_mode": model.freeze_mode.value,
    }
    blob = encode_container(metadata, model.state_dict())
    write_atomic(path, blob)
    logger.info(f"Wrote checkpoint {path} ({len(blob)} bytes, stage={metadata.get('stage')})")
    return blob


def load_checkpoint(path: str | Path) -> Checkpoint:
    container = read_container(path)
    if container.metadata.get("kind") != "model":
        raise CheckpointFormatError("not a model checkpoint")
    for key in ("stage", "config_hash", "model"):
        if key not in container.metadata:
            raise CheckpointFormatError(f"metadata missing {key!r}")
    return Checkpoint(metadata=container.metadata, tensors=container.tensors)


def check_compatible(checkpoint: Checkpoint, expected: LvlmConfig) -> None:
    """Raise CompatibilityError listing every model field that differs."""
    if checkpoint.config_hash == config_hash(expected):
        return
    stored = checkpoint.metadata["model"]
    wanted = lvlm_config_to_dict(expected)
    differing = {
        name: (stored.get(name), value)
        for name, value in wanted.items()
        if stored.get(name) != value
    }
    raise CompatibilityError(differing or {"config_hash": (checkpoint.config_hash, config_hash(expected))})


def restore_model(checkpoint: Checkpoint, expected: LvlmConfig | None = None) -> LvlmModel:
    """Rebuild the model a checkpoint describes, optionally checking compatibility."""
    if expected is not None:
        check_compatible(checkpoint, expected)
    config = checkpoint.model_config
    model = LvlmModel.from_state_dict(config, checkpoint.tensors)
    model.set_freeze_mode(FreezeMode(checkpoint.metadata.get("freeze_mode", FreezeMode.FROZEN.value)))
    return model
