"""Field snapshot files.

Layout: one ASCII header line

    EPADM1 <dim> <n_1> .. <n_dim> <L_1> .. <L_dim> <ncomp> <name>

followed by little-endian float64 values in row-major grid order with the
components innermost.  Writes go to a temporary file that is renamed into
place, so readers never see a partial snapshot.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import Grid

MAGIC = "EPADM1"


class SnapshotError(ValueError):
    pass


def write_snapshot(path, grid: Grid, values: np.ndarray, name: str) -> Path:
    values = np.asarray(values, dtype=float)
    ncomp_shape = values.shape[: values.ndim - grid.dim]
    if values.shape[values.ndim - grid.dim:] != grid.shape:
        raise SnapshotError(f"field shape {values.shape} does not match grid {grid.shape}")
    if not name or any(c.isspace() for c in name):
        raise SnapshotError(f"field name must be a non-empty token, got {name!r}")
    ncomp = int(np.prod(ncomp_shape)) if ncomp_shape else 1
    flat = values.reshape((ncomp,) + grid.shape)
    # components innermost
    data = np.moveaxis(flat, 0, -1).astype("<f8", copy=False)
    header = " ".join(
        [MAGIC, str(grid.dim)]
        + [str(n) for n in grid.points]
        + [repr(L) for L in grid.extent]
        + [str(ncomp), name]
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".snap")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header.encode("ascii") + b"\n")
            fh.write(np.ascontiguousarray(data).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_snapshot(path) -> tuple[Grid, np.ndarray, str]:
    """Return ``(grid, values, name)``; values have components first."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SnapshotError("missing header line")
    tokens = raw[:nl].decode("ascii").split()
    if not tokens or tokens[0] != MAGIC:
        raise SnapshotError(f"bad magic string in {path}")
    try:
        dim = int(tokens[1])
        points = tuple(int(t) for t in tokens[2:2 + dim])
        extent = tuple(float(t) for t in tokens[2 + dim:2 + 2 * dim])
        ncomp = int(tokens[2 + 2 * dim])
        name = tokens[3 + 2 * dim]
    except (IndexError, ValueError) as exc:
        raise SnapshotError(f"malformed header in {path}: {exc}") from None
    grid = Grid(extent, points)
    data = np.frombuffer(raw[nl + 1:], dtype="<f8")
    expected = ncomp * int(np.prod(points))
    if data.size != expected:
        raise SnapshotError(f"expected {expected} values, found {data.size}")
    values = np.moveaxis(data.reshape(points + (ncomp,)), -1, 0).astype(float)
    if ncomp == 1:
        values = values[0]
    return grid, values, name
