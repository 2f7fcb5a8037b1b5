"""Unit tests for the checkpoint container."""

import struct
import zlib
from dataclasses import replace

import numpy as np
import pytest

from ssmi_lab.core.checkpoint import (
    check_compatible,
    decode_container,
    encode_container,
    load_checkpoint,
    restore_model,
    save_checkpoint,
    write_atomic,
)
from ssmi_lab.core.errors import CheckpointFormatError, CompatibilityError
from ssmi_lab.core.models import FreezeMode, Stage


def with_crc(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body))


@pytest.mark.unit
def test_save_load_is_bit_exact(tmp_path, micro_model):
    path = tmp_path / "model.ssmi"

    save_checkpoint(micro_model, {"stage": "pretrain", "step": 3}, path)
    checkpoint = load_checkpoint(path)
    restored = restore_model(checkpoint, micro_model.config)

    assert checkpoint.stage is Stage.PRETRAIN
    assert checkpoint.metadata["step"] == 3
    assert restored.freeze_mode is FreezeMode.FINETUNE_SSM
    for name, tensor in micro_model.params.items():
        assert restored.params[name].data.tobytes() == tensor.data.tobytes()


@pytest.mark.unit
def test_encoding_is_idempotent(micro_model):
    blob = encode_container({"b": 1, "a": [1.5, None]}, micro_model.state_dict())

    decoded = decode_container(blob)

    assert encode_container(decoded.metadata, decoded.tensors) == blob
    assert list(decoded.tensors) == list(micro_model.params)


@pytest.mark.unit
def test_zero_dimensional_and_empty_tensors_survive():
    blob = encode_container({}, {"scalar": np.array(2.5), "empty": np.zeros((0, 3))})

    tensors = decode_container(blob).tensors

    assert tensors["scalar"].shape == () and float(tensors["scalar"]) == 2.5
    assert tensors["empty"].shape == (0, 3)


@pytest.mark.unit
def test_single_byte_corruption_is_detected(micro_model):
    blob = bytearray(encode_container({"stage": "init"}, micro_model.state_dict()))
    blob[len(blob) // 2] ^= 0x01

    with pytest.raises(CheckpointFormatError, match="crc"):
        decode_container(bytes(blob))


@pytest.mark.unit
def test_bad_magic():
    with pytest.raises(CheckpointFormatError, match="magic") as info:
        decode_container(b"NOPE" + bytes(20))
    assert info.value.offset == 0


@pytest.mark.unit
def test_truncated_payload_is_reported():
    body = encode_container({}, {"x": np.ones(2)})[:-4]
    count_at = 4 + 4 + 4 + 2
    forged = body[:count_at] + struct.pack("<I", 2) + body[count_at + 4 :]

    with pytest.raises(CheckpointFormatError, match="truncated"):
        decode_container(with_crc(forged))


@pytest.mark.unit
def test_unknown_version_is_rejected():
    body = encode_container({}, {})[:-4]
    forged = body[:4] + struct.pack("<I", 99) + body[8:]

    with pytest.raises(CheckpointFormatError, match="version"):
        decode_container(with_crc(forged))


@pytest.mark.unit
def test_non_model_archives_are_rejected(tmp_path):
    path = tmp_path / "other.ssmi"
    write_atomic(path, encode_container({"kind": "dataset"}, {}))

    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "missing.ssmi")


@pytest.mark.unit
def test_compatibility_lists_differing_fields(tmp_path, micro_model):
    path = tmp_path / "model.ssmi"
    save_checkpoint(micro_model, {"stage": "pretrain"}, path)
    checkpoint = load_checkpoint(path)

    check_compatible(checkpoint, micro_model.config)
    with pytest.raises(CompatibilityError) as info:
        check_compatible(checkpoint, replace(micro_model.config, d=8, n=3))

    assert set(info.value.differing) == {"d", "n"}
    assert info.value.exit_code == 4


@pytest.mark.unit
def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "nested" / "file.bin"

    write_atomic(target, b"first")
    write_atomic(target, b"second")

    assert target.read_bytes() == b"second"
    assert [p.name for p in target.parent.iterdir()] == ["file.bin"]
