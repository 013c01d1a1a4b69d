"""Periodic uniform Cartesian grids and the finite-difference toolkit.

Field layout convention used throughout the package: component axes come
first, grid axes last.  A scalar on a 2D grid of shape ``(nx, ny)`` is an
array of shape ``(nx, ny)``; a vector or one-form has shape ``(2, nx, ny)``;
a (symmetric) 2-tensor is stored in full as ``(2, 2, nx, ny)``.  Densities are
stored as their coefficient relative to ``d^D x``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Central first-derivative stencils: offsets 1..p/2, antisymmetric weights.
_FIRST_DERIV = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}

# Central second-derivative stencils: (center, offsets 1..p/2), symmetric.
_SECOND_DERIV = {
    2: (-2.0, (1.0,)),
    4: (-5 / 2, (4 / 3, -1 / 12)),
    6: (-49 / 18, (3 / 2, -3 / 20, 1 / 90)),
    8: (-205 / 72, (8 / 5, -1 / 5, 8 / 315, -1 / 560)),
}

_INTERP_ORDERS = (1, 3, 5)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the flat torus ``prod_a [0, L_a)``.

    Node ``i`` along axis ``a`` sits at ``i * spacing[a]``.
    """

    extent: tuple[float, ...]
    points: tuple[int, ...]
    fd_order: int = 4
    interp_order: int = 3
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        extent = tuple(float(L) for L in np.atleast_1d(self.extent))
        points = tuple(int(n) for n in np.atleast_1d(self.points))
        if len(extent) != len(points):
            raise GridError("extent and points must have one entry per axis")
        if not 1 <= len(points) <= 3:
            raise GridError(f"grid dimension must be 1, 2 or 3, got {len(points)}")
        if any(L <= 0 or not np.isfinite(L) for L in extent):
            raise GridError(f"extents must be positive, got {extent}")
        if any(n < 1 for n in points):
            raise GridError(f"points per axis must be positive, got {points}")
        if self.fd_order not in _FIRST_DERIV:
            raise GridError(f"fd_order must be one of {sorted(_FIRST_DERIV)}")
        if self.interp_order not in _INTERP_ORDERS:
            raise GridError(f"interp_order must be one of {_INTERP_ORDERS}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "spacing", tuple(L / n for L, n in zip(extent, points)))

    @classmethod
    def cube(cls, dim: int, n: int, length: float = 1.0, **kw) -> "Grid":
        return cls((length,) * dim, (n,) * dim, **kw)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.extent, tuple(n * factor for n in self.points),
                    fd_order=self.fd_order, interp_order=self.interp_order)

    def with_options(self, **kw) -> "Grid":
        opts = dict(fd_order=self.fd_order, interp_order=self.interp_order)
        opts.update(kw)
        return Grid(self.extent, self.points, **opts)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, *shape)``."""
        axes = [np.arange(n) * h for n, h in zip(self.points, self.spacing)]
        return np.array(np.meshgrid(*axes, indexing="ij"))

    def zeros(self, *components: int) -> np.ndarray:
        return np.zeros(tuple(components) + self.shape)

    def _check_field(self, f: np.ndarray) -> int:
        f = np.asarray(f)
        if f.shape[f.ndim - self.dim:] != self.shape:
            raise GridError(f"field shape {f.shape} does not end with grid shape {self.shape}")
        return f.ndim - self.dim

    def _array_axis(self, f: np.ndarray, axis: int) -> int:
        if not 0 <= axis < self.dim:
            raise GridError(f"axis {axis} out of range for a {self.dim}D grid")
        return self._check_field(f) + axis

    # -- derivatives -------------------------------------------------------

    def partial(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Central finite-difference derivative along ``axis`` with periodic wrap."""
        ax = self._array_axis(f, axis)
        h = self.spacing[axis]
        out = np.zeros_like(f, dtype=float)
        for k, c in enumerate(_FIRST_DERIV[self.fd_order], start=1):
            out += c * (np.roll(f, -k, axis=ax) - np.roll(f, k, axis=ax))
        return out / h

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Stack of partial derivatives; the new derivative axis is prepended."""
        return np.array([self.partial(f, a) for a in range(self.dim)])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        """``d_a v^a`` for a vector (density) field of shape ``(dim, *shape)``."""
        out = self.partial(v[0], 0)
        for a in range(1, self.dim):
            out = out + self.partial(v[a], a)
        return out

    def second_partial(self, f: np.ndarray, axis: int) -> np.ndarray:
        ax = self._array_axis(f, axis)
        h = self.spacing[axis]
        center, weights = _SECOND_DERIV[self.fd_order]
        out = center * np.asarray(f, dtype=float)
        for k, c in enumerate(weights, start=1):
            out = out + c * (np.roll(f, -k, axis=ax) + np.roll(f, k, axis=ax))
        return out / (h * h)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        out = self.second_partial(f, 0)
        for a in range(1, self.dim):
            out = out + self.second_partial(f, a)
        return out

    # -- reductions --------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Sum of values times cell volume (trapezoid rule on the torus).

        Reduces over the grid axes only; leading component axes are kept.
        The summation order is fixed, so repeated calls are bit-identical.
        """
        nlead = self._check_field(f)
        f = np.ascontiguousarray(f, dtype=float)
        total = f.reshape(f.shape[:nlead] + (-1,)).sum(axis=-1)
        out = total * self.cell_volume
        return float(out) if nlead == 0 else out

    def norm_l2(self, f: np.ndarray) -> float:
        """Volume-averaged RMS norm over all components."""
        f = np.asarray(f, dtype=float)
        return float(np.sqrt(np.sum(f * f) / f.size))

    # -- interpolation -----------------------------------------------------

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce points of shape ``(dim, ...)`` into the fundamental domain."""
        x = np.asarray(x, dtype=float)
        L = np.reshape(self.extent, (self.dim,) + (1,) * (x.ndim - 1))
        return np.mod(x, L)

    def interpolate(self, f: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Tensor-product Lagrange interpolation at arbitrary points.

        ``x`` has shape ``(dim,)`` or ``(dim, M)``; the result has the field's
        component shape followed by ``M`` (or no trailing axis for one point).
        Exact for polynomials of degree ``interp_order`` along each axis
        (locally), and reproduces node values exactly.
        """
        nlead = self._check_field(f)
        f = np.asarray(f, dtype=float)
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        pts = pts.reshape(self.dim, -1)
        if pts.shape[0] != self.dim:
            raise GridError(f"points must have leading axis {self.dim}")
        p = self.interp_order
        offsets = np.arange(-(p - 1) // 2, (p + 1) // 2 + 1)
        idx, wts = [], []
        for a in range(self.dim):
            s = np.mod(pts[a], self.extent[a]) / self.spacing[a]
            i0 = np.floor(s)
            xi = s - i0
            i0 = i0.astype(np.int64)
            # snap to the node when round-off leaves xi a hair below 1
            snap = xi > 1.0 - 1e-14
            i0 = np.where(snap, i0 + 1, i0)
            xi = np.where(snap, 0.0, xi)
            w = np.ones((len(offsets), pts.shape[1]))
            for j, oj in enumerate(offsets):
                for k, ok in enumerate(offsets):
                    if k != j:
                        w[j] *= (xi - ok) / (oj - ok)
            idx.append(np.mod(i0[None, :] + offsets[:, None], self.points[a]))
            wts.append(w)
        flat = f.reshape(f.shape[:nlead] + (-1,))
        strides = np.cumprod((1,) + self.points[::-1])[::-1][1:]
        out = np.zeros(f.shape[:nlead] + (pts.shape[1],))
        for combo in itertools.product(range(len(offsets)), repeat=self.dim):
            lin = np.zeros(pts.shape[1], dtype=np.int64)
            weight = np.ones(pts.shape[1])
            for a, j in enumerate(combo):
                lin += idx[a][j] * strides[a]
                weight = weight * wts[a][j]
            out += flat[..., lin] * weight
        return out[..., 0] if single else out

    def fourier_shift(self, f: np.ndarray, shift: Sequence[float]) -> np.ndarray:
        """Spectral evaluation of ``f(x - shift)`` on the grid nodes."""
        nlead = self._check_field(f)
        axes = tuple(range(nlead, nlead + self.dim))
        F = np.fft.fftn(f, axes=axes)
        phase = np.zeros(self.shape)
        for a, (n, L) in enumerate(zip(self.points, self.extent)):
            k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
            shape = [1] * self.dim
            shape[a] = n
            phase = phase + k.reshape(shape) * float(shift[a])
        return np.real(np.fft.ifftn(F * np.exp(-1j * phase), axes=axes))


def assert_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise FloatingPointError(f"{name}: non-finite value at index {tuple(bad)}")
