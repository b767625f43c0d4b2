"""
Tests for the PFLD field format
"""
import struct

import numpy as np
import pytest

from services.field_io import MAGIC, decode_field, encode_field, read_field, write_field
from services.grid import Grid
from utils.error_handlers import (
    BadMagicError,
    DimensionMismatchError,
    OutputError,
    TruncatedPayloadError,
)


class TestReadWrite:
    def test_file_keeps_samples_and_grid(self, tmp_path, taylor_green32):
        path = tmp_path / 'tg.pfld'
        write_field(taylor_green32, str(path))
        loaded = read_field(str(path), taylor_green32.grid)
        assert loaded.grid == taylor_green32.grid
        np.testing.assert_array_equal(loaded.data, taylor_green32.data)

    def test_header_layout(self, taylor_green32):
        blob = encode_field(taylor_green32)
        assert blob[:4] == MAGIC
        version, dim, nx, ny, components = struct.unpack_from('<IIIII', blob, 4)
        assert (version, dim, nx, ny, components) == (1, 2, 32, 32, 2)
        assert len(blob) == 4 + 20 + 16 + 8 * 2 * 32 * 32

    def test_missing_file(self, tmp_path):
        with pytest.raises(OutputError):
            read_field(str(tmp_path / 'absent.pfld'))


class TestDecodeErrors:
    def test_bad_magic(self, taylor_green32):
        blob = b'XFLD' + encode_field(taylor_green32)[4:]
        with pytest.raises(BadMagicError, match='bad magic'):
            decode_field(blob)

    def test_truncated_payload(self, taylor_green32):
        with pytest.raises(TruncatedPayloadError, match='truncated payload'):
            decode_field(encode_field(taylor_green32)[:-8])

    def test_truncated_header(self):
        with pytest.raises(TruncatedPayloadError):
            decode_field(MAGIC + b'\x01\x00')

    def test_extra_bytes(self, taylor_green32):
        with pytest.raises(DimensionMismatchError):
            decode_field(encode_field(taylor_green32) + b'\x00' * 8)

    def test_bad_dimension(self):
        blob = MAGIC + struct.pack('<II', 1, 4) + b'\x00' * 64
        with pytest.raises(DimensionMismatchError, match='dimension mismatch'):
            decode_field(blob)

    def test_unexpected_grid(self, taylor_green32):
        with pytest.raises(DimensionMismatchError, match='dimension mismatch'):
            decode_field(encode_field(taylor_green32), Grid((16, 16)))

    def test_invalid_grid_sizes(self):
        blob = MAGIC + struct.pack('<II2II2d', 1, 2, 12, 16, 1, 1.0, 1.0) + b'\x00' * (8 * 12 * 16)
        with pytest.raises(DimensionMismatchError):
            decode_field(blob)
