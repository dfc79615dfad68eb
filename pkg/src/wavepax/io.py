"""Snapshot container and CSV emission.

Field snapshots use a small binary container: a magic tag, a little-endian
uint64 header length, a JSON header (grid descriptor, frame, dtype, shape)
and the raw little-endian array payload, components-major row-major.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .grids import Grid, ModalField

MAGIC = b"WPAX1\n"

_DTYPES = {"complex64": "<c8", "complex128": "<c16"}


def write_field(path, field: ModalField, dtype: str = "complex128") -> None:
    if dtype not in _DTYPES:
        raise ValueError("dtype must be complex64 or complex128")
    header = {
        "grid": field.grid.descriptor(),
        "frame": field.frame,
        "dtype": dtype,
        "shape": list(field.values.shape),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(field.values.astype(_DTYPES[dtype]))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload.tobytes())


def read_field(path) -> ModalField:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path} is not a field container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        raw = fh.read()
    values = np.frombuffer(raw, dtype=_DTYPES[header["dtype"]]).reshape(header["shape"])
    grid = Grid.from_descriptor(header["grid"])
    return ModalField(grid, values.astype(complex), frame=header["frame"])


def write_field_csv(path, field: ModalField) -> None:
    """1d spectra as CSV: k plus re/im per component."""
    if field.grid.dim != 1:
        raise ValueError("CSV slices support 1d grids")
    k = field.grid.k_axis()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["k"]
        for c in range(field.ncomp):
            header += [f"re_{c}", f"im_{c}"]
        writer.writerow(header)
        for j in range(k.size):
            row = [f"{k[j]:.12g}"]
            for c in range(field.ncomp):
                row += [f"{field.values[c, j].real:.12g}", f"{field.values[c, j].imag:.12g}"]
            writer.writerow(row)


def write_metrics_csv(path, rows: list[dict]) -> None:
    """UTF-8 CSV with a header row; '.' decimal via repr formatting."""
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    fields = list(rows[0].keys())
    for r in rows[1:]:
        for key in r:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (np.floating,)):
        return f"{float(v):.12g}"
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


__all__ = ["write_field", "read_field", "write_field_csv", "write_metrics_csv", "config_hash"]
