"""Material loops, Kelvin circulation and conserved-quantity readouts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Grid
from .lagrangian import EulerianFluid, constraint_residuals

MIN_MARKERS = 16
REMARK_FACTOR = 2.0


class DiagnosticsError(ValueError):
    pass


@dataclass
class MaterialLoop:
    """Closed polyline of markers on the torus.

    Markers are stored unwrapped (continuous in the covering space); the
    segment closing the loop runs from the last marker to
    ``markers[:, 0] + closure``, where ``closure = winding * extent``.
    """

    markers: np.ndarray
    extent: np.ndarray
    closure: np.ndarray = None
    name: str = "loop"
    ref_spacing: float = field(default=0.0)

    def __post_init__(self):
        self.markers = np.asarray(self.markers, dtype=float)
        self.extent = np.atleast_1d(np.asarray(self.extent, dtype=float))
        if self.markers.ndim != 2 or self.markers.shape[0] != self.extent.size:
            raise DiagnosticsError("markers must have shape (dim, N)")
        if self.markers.shape[1] < MIN_MARKERS:
            raise DiagnosticsError(f"a loop needs at least {MIN_MARKERS} markers")
        if self.closure is None:
            self.closure = np.zeros(self.extent.size)
        self.closure = np.asarray(self.closure, dtype=float)
        if not self.ref_spacing:
            self.ref_spacing = float(np.max(self.spacings()))

    @classmethod
    def circle(cls, center, radius: float, n: int, extent, axes=(0, 1), name: str = "loop"):
        extent = np.atleast_1d(np.asarray(extent, dtype=float))
        center = np.asarray(center, dtype=float)
        if extent.size < 2:
            raise DiagnosticsError("a circular loop needs dim >= 2")
        th = 2 * np.pi * np.arange(n) / n
        X = np.repeat(center[:, None], n, axis=1).astype(float)
        X[axes[0]] += radius * np.cos(th)
        X[axes[1]] += radius * np.sin(th)
        return cls(X, extent, name=name)

    @classmethod
    def winding_line(cls, extent, n: int, axis: int = 0, offset=None, name: str = "loop"):
        """Straight loop wrapping once around ``axis``."""
        extent = np.atleast_1d(np.asarray(extent, dtype=float))
        X = np.zeros((extent.size, n)) if offset is None else \
            np.repeat(np.asarray(offset, dtype=float)[:, None], n, axis=1)
        X[axis] = X[axis] + extent[axis] * np.arange(n) / n
        closure = np.zeros(extent.size)
        closure[axis] = extent[axis]
        return cls(X, extent, closure, name=name)

    @property
    def n(self) -> int:
        return self.markers.shape[1]

    @property
    def winding(self) -> np.ndarray:
        return np.rint(self.closure / self.extent).astype(int)

    def segments(self) -> np.ndarray:
        """Segment vectors ``(dim, N)``; segment i runs from marker i to i+1."""
        nxt = np.roll(self.markers, -1, axis=1)
        nxt[:, -1] += self.closure
        return nxt - self.markers

    def spacings(self) -> np.ndarray:
        return np.linalg.norm(self.segments(), axis=0)

    def length(self) -> float:
        return float(np.sum(self.spacings()))

    def moved(self, markers) -> "MaterialLoop":
        return MaterialLoop(markers, self.extent, self.closure.copy(), self.name, self.ref_spacing)

    def needs_remark(self) -> bool:
        return bool(np.max(self.spacings()) > REMARK_FACTOR * self.ref_spacing)

    def remarked(self, n: Optional[int] = None) -> "MaterialLoop":
        """Redistribute markers uniformly in arclength along a periodic cubic spline."""
        n = self.n if n is None else n
        seg = self.spacings()
        s = np.concatenate([[0.0], np.cumsum(seg)])
        S = s[-1]
        # periodic part of the curve: subtract the linear drift that closes it
        pts = np.concatenate([self.markers, self.markers[:, :1] + self.closure[:, None]], axis=1)
        periodic = pts - np.outer(self.closure, s / S)
        spline = CubicSpline(s, periodic, axis=1, bc_type="periodic")
        snew = S * np.arange(n) / n
        X = spline(snew) + np.outer(self.closure, snew / S)
        out = MaterialLoop(X, self.extent, self.closure.copy(), self.name)
        out.ref_spacing = max(self.ref_spacing, float(np.max(out.spacings())))
        return out


def _velocity_callable(grid: Optional[Grid], u) -> Callable:
    if callable(u):
        return u
    if grid is None:
        raise DiagnosticsError("a grid is needed to interpolate a sampled field")
    return lambda X, t=0.0: grid.interpolate(u, X)


def advect_loop(loop: MaterialLoop, u, dt: float, grid: Optional[Grid] = None, t: float = 0.0
                ) -> MaterialLoop:
    """One RK4 step of ``dX/dt = u(X, t)``.

    ``u`` is a callable ``(X, t) -> (dim, N)`` or a grid field (frozen in
    time).  Remarks the loop if a separation has doubled.
    """
    f = _velocity_callable(grid, u)
    X = loop.markers
    k1 = f(X, t)
    k2 = f(X + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(X + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(X + dt * k3, t + dt)
    new = loop.moved(X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    return new.remarked() if new.needs_remark() else new


def _gauss_nodes(points: int):
    if points == 1:
        return np.array([0.5]), np.array([1.0])
    xg, wg = np.polynomial.legendre.leggauss(points)
    return 0.5 * (xg + 1.0), 0.5 * wg


def line_integral(oneform, loop: MaterialLoop, grid: Optional[Grid] = None, points: int = 3,
                  absolute: bool = False) -> float:
    """``oint w_a dx^a`` over the polyline with ``points``-point Gauss-Legendre per segment.

    ``points=1`` is the midpoint rule.  ``oneform`` is a grid field
    ``(dim, *shape)`` or a callable on ``(dim, M)`` points.  With
    ``absolute=True`` returns ``oint |w| ds`` instead (the circulation scale).
    """
    f = _velocity_callable(grid, oneform)
    seg = loop.segments()
    nodes, weights = _gauss_nodes(points)
    terms = []
    for s, wgt in zip(nodes, weights):
        w = f(loop.markers + s * seg)
        if absolute:
            terms.append(wgt * np.linalg.norm(w, axis=0) * np.linalg.norm(seg, axis=0))
        else:
            terms.append(wgt * np.einsum("a...,a...->...", w, seg))
    return math.fsum(np.concatenate(terms))


def _check_density(model, state, loop):
    Jm = model.grid.interpolate(state.J0, loop.markers)
    floor = max(getattr(model, "floor", 0.0), 0.0)
    if np.any(~(Jm > floor)):
        raise DiagnosticsError(f"J0 at or below the floor on loop {loop.name!r}")


def circulation(loop: MaterialLoop, model, state, points: int = 3) -> float:
    """Kelvin circulation ``oint (1/J0) dl/du`` along a loop for an inertial model."""
    _check_density(model, state, loop)
    return line_integral(model.kelvin_oneform(state), loop, model.grid, points)


def circulation_moving(loop: MaterialLoop, model, state, points: int = 3) -> float:
    """Circulation of ``m_tilde / J0_tilde`` along a loop advected by ``u_tilde``.

    ``model`` is a MovingFrameModel; with the identity frame this is
    ``circulation`` exactly.
    """
    if getattr(model, "frame", None) is None:
        raise DiagnosticsError("circulation_moving needs a moving-frame model")
    return circulation(loop, model, state, points)


def circulation_scale(loop: MaterialLoop, model, state, points: int = 3) -> float:
    return line_integral(model.kelvin_oneform(state), loop, model.grid, points, absolute=True)


def conserved_report(model, state, loops: Sequence[MaterialLoop] = (), points: int = 3) -> dict:
    """Mass, circulation per loop and L2 norms of the constraint residuals.

    Constraint residuals are evaluated for inertial models (and translation
    frames, whose moved nodes form a shifted uniform grid); they are NaN
    when the background lacks curvature data or the frame deforms the grid.
    """
    rec = {"t": state.t, "mass": model.mass(state)}
    for loop in loops:
        rec[f"circ_{loop.name}"] = circulation(loop, model, state, points)
    ham = mom = float("nan")
    frame = getattr(model, "frame", None)
    try:
        if frame is None or frame.is_identity:
            bg = model.fields(state.t)
            u = model.recover(state)
            J = state.J0
        elif frame.map.name == "translation":
            u, J = model.physical(state)
            bg = model.frame_fields(state.t).bg
        else:
            bg = None
        if bg is not None and bg.K is not None and bg.R is not None:
            h, m = constraint_residuals(model.grid, EulerianFluid(u, J), bg, model.eos)
            ham, mom = model.grid.norm_l2(h), model.grid.norm_l2(m)
    except (FloatingPointError, ValueError):
        pass
    rec["ham_res_L2"], rec["mom_res_L2"] = ham, mom
    return rec


class DiagnosticsWriter:
    """CSV stream with header ``t,mass,circ_<loop>...,ham_res_L2,mom_res_L2``."""

    def __init__(self, path, loop_names: Sequence[str] = ()):
        self.columns = ["t", "mass"] + [f"circ_{n}" for n in loop_names] + ["ham_res_L2", "mom_res_L2"]
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.columns)

    def write(self, record: dict) -> None:
        self._w.writerow([repr(float(record[c])) for c in self.columns])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def convergence_orders(errors: Sequence[float], ratio: float = 2.0) -> np.ndarray:
    """Observed orders ``log(e_k / e_{k+1}) / log(ratio)`` between refinement levels."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def relative_drift(values: Sequence[float], scale: Optional[float] = None) -> float:
    """``max |c(t) - c(0)| / max(|c(0)|, scale)``."""
    v = np.asarray(values, dtype=float)
    denom = max(abs(v[0]), 0.0 if scale is None else scale)
    if denom == 0:
        return float(np.max(np.abs(v - v[0])))
    return float(np.max(np.abs(v - v[0])) / denom)
