"""
Binary PFLD field files
"""
import logging
import os
import struct
from typing import Optional

import numpy as np

from services.grid import Field, Grid
from utils.error_handlers import (
    BadMagicError,
    DimensionMismatchError,
    FieldError,
    OutputError,
    TruncatedPayloadError,
)

logger = logging.getLogger(__name__)

MAGIC = b'PFLD'
VERSION = 1


def encode_field(f: Field) -> bytes:
    """Serialize a field: header, then little-endian f64 samples"""
    dim = f.grid.dim
    header = MAGIC + struct.pack(
        f'<II{dim}II{dim}d',
        VERSION, dim, *f.grid.n, f.components, *f.grid.period,
    )
    return header + np.ascontiguousarray(f.data, dtype='<f8').tobytes()


def decode_field(blob: bytes, expected: Optional[Grid] = None) -> Field:
    """
    Parse PFLD bytes into a Field

    Args:
        blob: File contents
        expected: Optional grid the file must match

    Returns:
        Decoded Field
    """
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError("bad magic: not a PFLD file")
    offset = 4
    if len(blob) < offset + 8:
        raise TruncatedPayloadError("truncated payload: header ends early")
    version, dim = struct.unpack_from('<II', blob, offset)
    offset += 8
    if version != VERSION:
        raise DimensionMismatchError(f"Unsupported PFLD version {version}")
    if dim not in (2, 3):
        raise DimensionMismatchError(f"dimension mismatch: header declares dim = {dim}")

    rest = struct.calcsize(f'<{dim}II{dim}d')
    if len(blob) < offset + rest:
        raise TruncatedPayloadError("truncated payload: header ends early")
    values = struct.unpack_from(f'<{dim}II{dim}d', blob, offset)
    offset += rest
    sizes, components, periods = values[:dim], values[dim], values[dim + 1:]

    try:
        grid = Grid(sizes, periods)
    except FieldError as e:
        raise DimensionMismatchError(f"dimension mismatch: {e.message}") from e
    if components < 1:
        raise DimensionMismatchError("dimension mismatch: zero components")
    if expected is not None and (expected != grid):
        raise DimensionMismatchError(
            f"dimension mismatch: file grid {grid.describe()} differs from {expected.describe()}"
        )

    count = components * grid.size
    payload = blob[offset:]
    if len(payload) < 8 * count:
        raise TruncatedPayloadError(
            f"truncated payload: expected {8 * count} bytes, found {len(payload)}"
        )
    if len(payload) > 8 * count:
        raise DimensionMismatchError("dimension mismatch: payload longer than header describes")

    data = np.frombuffer(payload, dtype='<f8', count=count).astype(np.float64)
    return Field(grid, data.reshape((components,) + grid.shape))


def write_field(f: Field, path: str) -> None:
    """Write a field to path in PFLD format"""
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as handle:
            handle.write(encode_field(f))
    except OSError as e:
        raise OutputError(f"Cannot write field to {path}: {str(e)}") from e
    logger.debug(f"Wrote {f.components}-component field on {f.grid.describe()} to {path}")


def read_field(path: str, expected: Optional[Grid] = None) -> Field:
    """Read a PFLD file"""
    try:
        with open(path, 'rb') as handle:
            blob = handle.read()
    except OSError as e:
        raise OutputError(f"Cannot read field from {path}: {str(e)}") from e
    return decode_field(blob, expected)
