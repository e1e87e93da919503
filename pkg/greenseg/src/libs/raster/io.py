import logging
import os
import struct
from typing import Union

import numpy as np

try:
    from .enums import DType
    from .exceptions import RasterParseError
    from .models import Affine, Raster
except (ImportError, ModuleNotFoundError):
    from enums import DType
    from exceptions import RasterParseError
    from models import Affine, Raster

MAGIC = b"GHSR"
VERSION = 1

_HEADER = struct.Struct("<5I6d")


def write_raster(raster: Raster, path: Union[str, os.PathLike]) -> None:
    header = _HEADER.pack(VERSION, raster.width, raster.height, raster.bands,
                          raster.dtype.code(), *raster.transform.to_tuple())
    payload = np.ascontiguousarray(raster.data, dtype=raster.dtype.numpy()).tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC + header + payload)
    logging.debug("Raster %dx%dx%d written to %s", raster.bands, raster.height, raster.width, path)


def read_raster(path: Union[str, os.PathLike]) -> Raster:
    """
    Raises:
        RasterParseError: bad magic, unknown version or dtype, truncated payload
    """
    with open(path, "rb") as f:
        buffer = f.read()
    return parse_raster(buffer)


def parse_raster(buffer: bytes) -> Raster:
    if len(buffer) < len(MAGIC) or buffer[:4] != MAGIC:
        raise RasterParseError("missing GHSR magic", 0)
    end = 4 + _HEADER.size
    if len(buffer) < end:
        raise RasterParseError("truncated header", len(buffer))

    version, width, height, bands, code, *coeffs = _HEADER.unpack_from(buffer, 4)
    if version != VERSION:
        raise RasterParseError(f"unsupported version {version}", 4)
    try:
        dtype = DType.from_code(code)
    except ValueError as e:
        raise RasterParseError(str(e), 20) from e

    expected = bands * height * width * dtype.numpy().itemsize
    if len(buffer) - end < expected:
        raise RasterParseError(
            f"truncated payload, {expected} bytes expected", len(buffer))

    data = np.frombuffer(buffer, dtype=dtype.numpy(), count=bands * height * width, offset=end)
    data = data.reshape(bands, height, width).astype(dtype.numpy().newbyteorder("="))
    try:
        transform = Affine.from_tuple(coeffs)
    except ValueError as e:
        raise RasterParseError("singular affine transform", 24) from e
    return Raster(data=data, transform=transform)
