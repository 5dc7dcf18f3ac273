"""Checkpoint files for toy models and CSV/JSON result tables.

Checkpoint layout (all integers unsigned 32-bit little-endian)::

    b"CULCKPT1" | version | n_layers | (rows, cols) * n_layers | payload

The payload holds float64 little-endian values: for each layer its row-major
weight matrix followed by its bias vector.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from cul.errors import FormatError, InvalidArgument
from cul.unlearn.model import ToyModel

MAGIC = b"CULCKPT1"
VERSION = 1
_U32 = struct.Struct("<I")


def checkpoint_bytes(model: ToyModel) -> bytes:
    dims = model.layer_dims
    head = [MAGIC, _U32.pack(VERSION), _U32.pack(len(dims))]
    head += [struct.pack("<II", r, c) for r, c in dims]
    return b"".join(head) + model.flatten().astype("<f8").tobytes()


def save_checkpoint(model: ToyModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def parse_checkpoint(data: bytes) -> ToyModel:
    if len(data) < 8 or data[:8] != MAGIC:
        raise FormatError("bad magic tag", 0)
    pos = 8

    def u32() -> int:
        nonlocal pos
        if pos + 4 > len(data):
            raise FormatError("truncated header", pos)
        (v,) = _U32.unpack_from(data, pos)
        pos += 4
        return v

    version = u32()
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 8)
    n_layers = u32()
    if n_layers == 0:
        raise FormatError("checkpoint declares no layers", 12)
    dims = [(u32(), u32()) for _ in range(n_layers)]
    n_floats = sum(r * c + r for r, c in dims)
    payload = len(data) - pos
    if payload != 8 * n_floats:
        what = "truncated" if payload < 8 * n_floats else "oversized"
        raise FormatError(f"{what} payload: header declares {n_floats} floats, found {payload} bytes", pos)
    flat = np.frombuffer(data, dtype="<f8", count=n_floats, offset=pos).astype(np.float64)
    try:
        return ToyModel.from_flat(flat, dims)
    except InvalidArgument as exc:
        raise FormatError(f"inconsistent layer shapes: {exc}", 16) from exc


def load_checkpoint(path) -> ToyModel:
    return parse_checkpoint(Path(path).read_bytes())


# -- result tables -------------------------------------------------------------

HEADER = ("phase", "epsilon", "iter", "f1", "f2", "grad_f1_norm", "g_norm", "eta", "psi", "wall_ms")


@dataclass(frozen=True)
class ResultRow:
    phase: str
    epsilon: float | None
    iter: int
    f1: float
    f2: float
    grad_f1_norm: float
    g_norm: float
    eta: float
    psi: float
    wall_ms: int = 0


def rows_from_trajectory(traj, phase: str, epsilon: float | None = None) -> list[ResultRow]:
    return [
        ResultRow(phase, epsilon, r.iter, r.f1, r.f2, r.norm_grad_f1, r.norm_g, r.eta, r.psi, r.wall_ms)
        for r in traj
    ]


def fmt_real(x: float) -> str:
    """17 significant digits: parses back to the identical float64."""
    return format(float(x), ".17g")


def _csv_cells(row: ResultRow) -> list[str]:
    return [
        row.phase,
        "" if row.epsilon is None else fmt_real(row.epsilon),
        str(int(row.iter)),
        *(fmt_real(getattr(row, k)) for k in HEADER[3:9]),
        str(int(row.wall_ms)),
    ]


def results_text(rows, fmt: str = "csv") -> str:
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for row in rows:
            w.writerow(_csv_cells(row))
        return buf.getvalue()
    if fmt == "json":
        objs = []
        for row in rows:
            d = asdict(row)
            for k in HEADER[3:9]:
                if not math.isfinite(d[k]):
                    raise InvalidArgument(f"nonfinite {k} cannot be written as JSON")
            objs.append({k: d[k] for k in HEADER})
        return json.dumps(objs, indent=1) + "\n"
    raise InvalidArgument(f"unknown result format {fmt!r}")


def write_results(rows, path, fmt: str | None = None) -> None:
    """Write rows as CSV or JSON (format inferred from the suffix if not given)."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    text = results_text(rows, fmt)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_results(path) -> list[ResultRow]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return [ResultRow(**obj) for obj in json.loads(path.read_text(encoding="utf-8"))]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HEADER:
            raise InvalidArgument(f"{path}: unexpected header {header}")
        return [
            ResultRow(
                cells[0],
                float(cells[1]) if cells[1] else None,
                int(cells[2]),
                *(float(c) for c in cells[3:9]),
                int(cells[9]),
            )
            for cells in reader
        ]


def write_table(path, header, rows) -> None:
    """Generic CSV with the same numeric rendering as the result files."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_real(v) if isinstance(v, float) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
