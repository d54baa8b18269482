"""Plain-text field dumps.

Format: a header line ``nx ny h x0 y0`` followed by ``ny`` rows of ``nx``
values, row j holding y = y0 + j*h. Nodes outside the fluid are written as
``nan``.
"""

import numpy as np

from .errors import InputError

FMT = "%.12e"


def write_field(path, values, h, x0, y0, mask=None):
    v = np.array(values, float)
    if mask is not None:
        v = np.where(mask, v, np.nan)
    ny, nx = v.shape
    with open(path, "w") as fh:
        fh.write(f"{nx} {ny} {FMT % h} {FMT % x0} {FMT % y0}\n")
        for row in v:
            fh.write(" ".join("nan" if not np.isfinite(x) else FMT % x for x in row))
            fh.write("\n")


def write_grid_field(path, grid, values):
    """Dump a node field of ``grid``, blanking exterior nodes."""
    write_field(path, values, grid.h, grid.x0, grid.y0, mask=grid.kind != 0)


def read_field(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 5:
            raise InputError(f"{path}: header must be 'nx ny h x0 y0'")
        nx, ny = int(head[0]), int(head[1])
        h, x0, y0 = map(float, head[2:])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (ny, nx):
        raise InputError(f"{path}: expected {ny}x{nx} values, found {data.shape[0]}x{data.shape[1]}")
    return data, h, x0, y0
