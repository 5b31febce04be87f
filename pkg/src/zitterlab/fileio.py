"""Deterministic file output helpers: 17-digit floats, atomic writes, ZLAB frames."""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

ZLAB_MAGIC = b"ZLAB"
ZLAB_VERSION = 1


def fmt17(x) -> str:
    """Render a float with 17 significant digits (round-trip safe)."""
    return f"{float(x):.17g}"


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file + rename so readers never see partials."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    """rows: iterable of iterables; floats are formatted with fmt17, ints verbatim."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            elif isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(fmt17(cell))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_zlab_frame(path, values: np.ndarray, box_half_width: float, time: float) -> None:
    """Binary frame: magic 'ZLAB', u32 version, u32 N, f64 L, f64 t, then N*N
    complex values as interleaved little-endian f64 pairs, row-major."""
    values = np.asarray(values, dtype=np.complex128)
    n = values.shape[0]
    if values.shape != (n, n):
        raise ValueError(f"frame must be square, got {values.shape}")
    header = ZLAB_MAGIC + struct.pack("<IIdd", ZLAB_VERSION, n, float(box_half_width), float(time))
    interleaved = np.empty((n, n, 2), dtype="<f8")
    interleaved[..., 0] = values.real
    interleaved[..., 1] = values.imag
    atomic_write_bytes(path, header + interleaved.tobytes())


def read_zlab_frame(path):
    """Inverse of :func:`write_zlab_frame`; returns (values, box_half_width, time)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != ZLAB_MAGIC:
        raise ValueError("not a ZLAB frame")
    version, n, box_half_width, time = struct.unpack("<IIdd", blob[4 : 4 + 24])
    if version != ZLAB_VERSION:
        raise ValueError(f"unsupported ZLAB version {version}")
    flat = np.frombuffer(blob[28:], dtype="<f8")
    if flat.size != 2 * n * n:
        raise ValueError("ZLAB payload size mismatch")
    pairs = flat.reshape(n, n, 2)
    return pairs[..., 0] + 1j * pairs[..., 1], box_half_width, time
