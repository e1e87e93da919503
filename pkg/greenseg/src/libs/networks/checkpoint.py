import json
import logging
import os
import struct
from typing import Any, Union

import numpy as np
import pydantic

from greenseg.src.libs.autodiff import ContractViolation

try:
    from .exceptions import CheckpointError, CheckpointVersionError
    from .models import NetworkSpec
    from .params import ParamStore, init_params
except (ImportError, ModuleNotFoundError):
    from exceptions import CheckpointError, CheckpointVersionError
    from models import NetworkSpec
    from params import ParamStore, init_params

MAGIC = b"GSCK"
VERSION = 1

_U32 = struct.Struct("<I")


class Checkpoint(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    version: int = VERSION
    spec: NetworkSpec
    params: ParamStore
    metadata: dict[str, Any] = pydantic.Field(default_factory=dict)
    """epoch, validation F1, decision threshold, training config echo"""


def save_checkpoint(path: Union[str, os.PathLike],
                    spec: NetworkSpec,
                    params: ParamStore,
                    metadata: dict[str, Any] = None) -> None:
    """Write every parameter (running statistics included) as little-endian
    float32 in name order, preceded by the spec and metadata as JSON."""
    header = json.dumps({"spec": json.loads(spec.summary()), "metadata": metadata or {}},
                        sort_keys=True).encode("utf-8")
    chunks = [MAGIC, _U32.pack(VERSION), _U32.pack(len(header)), header, _U32.pack(len(params))]
    for name, param in params.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)) + encoded)
        chunks.append(_U32.pack(param.data.ndim) + struct.pack(f"<{param.data.ndim}I", *param.data.shape))
        chunks.append(np.ascontiguousarray(param.data, dtype="<f4").tobytes())

    with open(path, "wb") as f:
        f.write(b"".join(chunks))
    logging.info("Checkpoint saved to %s (%d tensors)", path, len(params))


def load_checkpoint(path: Union[str, os.PathLike]) -> Checkpoint:
    """Rebuild the spec, then overwrite freshly initialised parameters with
    the stored values.

    Raises:
        CheckpointVersionError: the file was written by another format version
        CheckpointError: truncated file or parameters inconsistent with the spec
    """
    with open(path, "rb") as f:
        buffer = f.read()

    if buffer[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    reader = _Reader(buffer, 4, path)
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version} is not supported (expected {VERSION})")

    raw_header = reader.take(reader.u32())
    try:
        header = json.loads(raw_header.decode("utf-8"))
        spec = NetworkSpec.model_validate(header["spec"])
        metadata = dict(header["metadata"])
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header: {e}") from e
    except pydantic.ValidationError as e:
        raise CheckpointError(f"{path}: invalid network spec: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: header lacks spec or metadata ({e!r})") from e

    store = init_params(spec)
    expected = set(store)
    seen = set()
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(count * 4), dtype="<f4").reshape(shape)
        if name not in expected:
            raise CheckpointError(f"{path}: unknown parameter {name!r}")
        try:
            store[name].assign(values.astype(np.float32))
        except ContractViolation as e:
            raise CheckpointError(f"{path}: {e}") from e
        seen.add(name)
    if seen != expected:
        raise CheckpointError(f"{path}: missing parameters {sorted(expected - seen)}")

    return Checkpoint(version=version, spec=spec, params=store, metadata=metadata)


class _Reader:

    def __init__(self, buffer: bytes, offset: int, path) -> None:
        self.buffer = buffer
        self.offset = offset
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.buffer):
            raise CheckpointError(f"{self.path}: truncated at byte {len(self.buffer)}")
        chunk = self.buffer[self.offset:end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]
