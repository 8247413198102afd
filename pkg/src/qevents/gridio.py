"""Binary and CSV serialization of grid fields.

Binary layout (all little-endian)::

    8 bytes   magic "QEVGRID1"
    uint32    D (number of spacetime axes)
    uint32[D] shape
    f64[D]    spacing
    f64[D]    origin
    uint32    component count
    uint8     scalar type (0 = f64, 1 = complex128)
    ...       values, row-major over (t, x, y, z), component index fastest
"""

from __future__ import annotations

import csv
import itertools
import struct
from pathlib import Path

import numpy as np

from .emfield import GridField

MAGIC = b"QEVGRID1"
_SCALAR_TYPES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


def write_grid(path, grid: GridField) -> None:
    D = grid.dim
    complex_values = np.iscomplexobj(grid.values)
    code = 1 if complex_values else 0
    header = bytearray(MAGIC)
    header += struct.pack("<I", D)
    header += struct.pack(f"<{D}I", *grid.shape)
    header += struct.pack(f"<{D}d", *grid.spacing)
    header += struct.pack(f"<{D}d", *grid.origin)
    header += struct.pack("<IB", grid.ncomp, code)
    data = np.ascontiguousarray(grid.values, dtype=_SCALAR_TYPES[code])
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(data.tobytes(order="C"))


def read_grid(path) -> GridField:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a grid file (bad magic)")
    off = 8
    (D,) = struct.unpack_from("<I", raw, off)
    off += 4
    if D not in (2, 3, 4):
        raise ValueError(f"{path}: unsupported dimension {D}")
    shape = struct.unpack_from(f"<{D}I", raw, off)
    off += 4 * D
    spacing = struct.unpack_from(f"<{D}d", raw, off)
    off += 8 * D
    origin = struct.unpack_from(f"<{D}d", raw, off)
    off += 8 * D
    ncomp, code = struct.unpack_from("<IB", raw, off)
    off += 5
    if code not in _SCALAR_TYPES:
        raise ValueError(f"{path}: unknown scalar type {code}")
    dtype = _SCALAR_TYPES[code]
    count = int(np.prod(shape)) * ncomp
    if len(raw) - off != count * dtype.itemsize:
        raise ValueError(f"{path}: payload size does not match header")
    values = np.frombuffer(raw, dtype=dtype, count=count, offset=off).reshape(tuple(shape) + (ncomp,))
    return GridField(np.array(origin), np.array(spacing), values.astype(dtype.newbyteorder("=")))


_AXIS_NAMES = ("t", "x", "y", "z")


def export_csv(path, grid: GridField, component_names=None) -> None:
    """One row per grid point: coordinates followed by component values (re/im split if complex)."""
    D = grid.dim
    names = list(component_names) if component_names else [f"c{i}" for i in range(grid.ncomp)]
    if len(names) != grid.ncomp:
        raise ValueError("need one name per component")
    is_complex = np.iscomplexobj(grid.values)
    header = list(_AXIS_NAMES[:D])
    for n in names:
        header += [f"{n}_re", f"{n}_im"] if is_complex else [n]
    axes = grid.axes()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for idx in itertools.product(*(range(n) for n in grid.shape)):
            row = [repr(float(axes[a][i])) for a, i in enumerate(idx)]
            for v in grid.values[idx]:
                if is_complex:
                    row += [repr(float(v.real)), repr(float(v.imag))]
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)
