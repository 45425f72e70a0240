"""Binary and TSV matrix file input/output.

Binary layout, little-endian throughout:

    bytes 0..3   magic "SKLB"
    bytes 4..7   u32 rows
    bytes 8..11  u32 cols
    byte  12     u8 field tag, 0 = real, 1 = complex
    then rows*cols float64 entries in row-major order,
    interleaved (re, im) pairs when complex.

The TSV reader accepts small plain-text inputs: one row per line,
tab-separated floats (complex entries as Python literals like 1+2j).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SKLB"
_HEADER = struct.Struct("<4sIIB")

FIELD_REAL = 0
FIELD_COMPLEX = 1


def write_matrix(path, M: np.ndarray) -> None:
    A = np.asarray(M)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    complex_field = bool(np.iscomplexobj(A))
    field = FIELD_COMPLEX if complex_field else FIELD_REAL
    header = _HEADER.pack(MAGIC, A.shape[0], A.shape[1], field)
    if complex_field:
        body = np.ascontiguousarray(A, dtype="<c16").tobytes()
    else:
        body = np.ascontiguousarray(A, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols, field = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if field not in (FIELD_REAL, FIELD_COMPLEX):
        raise ValueError(f"{path}: unknown field tag {field}")
    dtype = "<c16" if field == FIELD_COMPLEX else "<f8"
    count = rows * cols
    body = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size, count=count)
    if body.size != count:
        raise ValueError(f"{path}: expected {count} entries, got {body.size}")
    return body.reshape(rows, cols).copy()


def read_tsv(path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [complex(tok) for tok in line.split("\t")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ValueError(f"{path}:{lineno}: ragged row of width {len(cells)}")
        rows.append(cells)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    M = np.array(rows, dtype=complex)
    if np.all(M.imag == 0.0):
        return M.real.copy()
    return M
