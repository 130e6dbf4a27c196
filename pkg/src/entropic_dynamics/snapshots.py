"""Grid snapshots and CSV time series.

Binary grid snapshot layout, all little-endian:

    offset  size          content
    0       12            magic b"ENTROPICGRID"
    12      4             uint32 format version (1)
    16      8             uint64 number of axes D
    24      8             uint64 number of planes P (1 for a real field, 2 for re/im)
    32      8 D           uint64 points per axis
    ..      16 D          float64 (lower, upper) per axis
    ..      8             float64 time
    ..      8 P prod(n)   float64 data, plane-major then row-major (C order)
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .space import GridSpec

MAGIC = b"ENTROPICGRID"
VERSION = 1


@dataclass(frozen=True)
class Snapshot:
    grid: GridSpec
    planes: tuple
    t: float

    @property
    def complex_field(self) -> np.ndarray:
        if len(self.planes) != 2:
            raise ValueError("snapshot does not hold a complex field")
        return self.planes[0] + 1j * self.planes[1]


def encode(grid: GridSpec, planes, t: float = 0.0) -> bytes:
    planes = [np.ascontiguousarray(p, dtype="<f8") for p in planes]
    for p in planes:
        if p.shape != grid.shape:
            raise ValueError(f"plane shape {p.shape} does not match grid {grid.shape}")
    header = MAGIC + struct.pack("<I", VERSION)
    header += struct.pack("<QQ", grid.ndim, len(planes))
    header += struct.pack(f"<{grid.ndim}Q", *grid.points)
    for lo, hi in zip(grid.lower, grid.upper):
        header += struct.pack("<dd", lo, hi)
    header += struct.pack("<d", float(t))
    return header + b"".join(p.tobytes() for p in planes)


def decode(data: bytes) -> Snapshot:
    if data[:12] != MAGIC:
        raise ValueError("not a grid snapshot (bad magic)")
    (version,) = struct.unpack_from("<I", data, 12)
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    ndim, nplanes = struct.unpack_from("<QQ", data, 16)
    off = 32
    points = struct.unpack_from(f"<{ndim}Q", data, off)
    off += 8 * ndim
    bounds = struct.unpack_from(f"<{2 * ndim}d", data, off)
    off += 16 * ndim
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    grid = GridSpec(bounds[0::2], bounds[1::2], points)
    count = int(np.prod(points))
    expected = off + 8 * count * nplanes
    if len(data) != expected:
        raise ValueError(f"snapshot has {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=off).astype(float)
    planes = tuple(flat[i * count:(i + 1) * count].reshape(points) for i in range(nplanes))
    return Snapshot(grid, planes, t)


def write_snapshot(path, grid: GridSpec, planes, t: float = 0.0) -> Path:
    path = Path(path)
    path.write_bytes(encode(grid, planes, t))
    return path


def read_snapshot(path) -> Snapshot:
    return decode(Path(path).read_bytes())


def write_field_state(path, state) -> Path:
    return write_snapshot(path, state.grid, [state.rho, state.Phi], state.t)


def write_wave_state(path, wave) -> Path:
    return write_snapshot(path, wave.grid, [wave.psi.real, wave.psi.imag], wave.t)


def write_density(path, grid, values, t: float = 0.0) -> Path:
    return write_snapshot(path, grid, [values], t)


def write_csv(path, header, rows) -> Path:
    """CSV with a header row; floats at 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, np.asarray(rows)


def write_grid_csv(path, grid, columns: dict, t: float | None = None) -> Path:
    """Flattened grid fields, one row per node, coordinates first."""
    pts = grid.points_array().reshape(-1, grid.ndim)
    names = [f"x{a}" for a in range(grid.ndim)] + list(columns)
    data = [pts[:, a] for a in range(grid.ndim)] + [np.asarray(v).ravel() for v in columns.values()]
    rows = zip(*[[float(x) for x in col] for col in data])
    return write_csv(path, names, rows)
