"""Matrix file format round trips and the TSV reader."""

import numpy as np
import pytest

from sketchlab import matio
from sketchlab.rng import RngStream


def test_real_roundtrip_is_bit_exact(tmp_path):
    M = RngStream(5).normal((7, 3))
    path = tmp_path / "m.sklb"
    matio.write_matrix(path, M)
    back = matio.read_matrix(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, M)


def test_complex_roundtrip(tmp_path):
    rng = RngStream(6)
    M = rng.normal((4, 5)) + 1j * rng.normal((4, 5))
    path = tmp_path / "c.sklb"
    matio.write_matrix(path, M)
    back = matio.read_matrix(path)
    assert np.iscomplexobj(back)
    assert np.array_equal(back, M)


def test_header_layout(tmp_path):
    path = tmp_path / "h.sklb"
    matio.write_matrix(path, np.ones((2, 3)))
    raw = path.read_bytes()
    assert raw[:4] == b"SKLB"
    # little-endian u32 rows, u32 cols, u8 field flag, then f64 payload
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    assert raw[12] == 0
    assert len(raw) == 13 + 6 * 8


def test_complex_field_flag(tmp_path):
    path = tmp_path / "cf.sklb"
    matio.write_matrix(path, np.ones((2, 2), dtype=complex))
    raw = path.read_bytes()
    assert raw[12] == 1
    assert len(raw) == 13 + 4 * 16


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.sklb"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(ValueError):
        matio.read_matrix(path)


def test_read_rejects_truncated_payload(tmp_path):
    path = tmp_path / "trunc.sklb"
    matio.write_matrix(path, np.ones((4, 4)))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        matio.read_matrix(path)


def test_tsv_reader_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "m.tsv"
    path.write_text("# header comment\n1\t2\t3\n\n4\t5\t6\n")
    M = matio.read_tsv(path)
    assert M.dtype == np.float64
    assert np.array_equal(M, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])


def test_tsv_reader_parses_complex_literals(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("1+2j\t3\n0\t-1j\n")
    M = matio.read_tsv(path)
    assert np.iscomplexobj(M)
    assert M[0, 0] == 1 + 2j
    assert M[1, 1] == -1j


def test_tsv_reader_rejects_ragged_rows(tmp_path):
    path = tmp_path / "ragged.tsv"
    path.write_text("1\t2\n3\n")
    with pytest.raises(ValueError):
        matio.read_tsv(path)


def test_tsv_reader_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("# nothing\n")
    with pytest.raises(ValueError):
        matio.read_tsv(path)
