"""Fluid dynamics seen from a moving frame ``O_t``.

The evolved fields live at frame labels ``x``: the transformed velocity
``u_tilde``, its momentum ``m_tilde = dl/du_tilde`` and the density
``J0_tilde``.  Physical (hatted) quantities sit at ``O_t(x)``:

    u_hat(O x)  = jac(x) u_tilde(x)
    J0_hat(O x) = J0_tilde(x) / det jac(x)

and the physical total velocity is ``v = beta + o + u_hat`` with the frame
velocity ``o(O x) = dO_t(x)/dt``.  Changing variables in the reduced action
gives, at labels,

    l = -int alpha sqrt(gamma)(O x) rho_tilde(J0_tilde w) d^D x,
    w = sqrt(alpha^2 - |v|^2)(O x),

where ``rho_tilde(n) = s rho(n / s)`` with ``s = det jac``.  This is the
inertial action with a rescaled closure, so the inertial kernels, Newton
recovery and Lie-derivative right-hand side all carry over, with Lie
derivatives taken along ``u_tilde``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import FluidState, InertialModel, recover_total_velocity
from .eos import EosError, ScaledEos
from .geometry import AdmBackground, BackgroundFields
from .grid import Grid
from .kinematics import (
    IdentityMap,
    KinematicsError,
    ShearMap,
    SpatialMap,
    TranslationMap,
    _solve,
)
from .lagrangian import density_from_total_velocity, dl_dJ_kernel, kelvin_kernel, momentum_kernel

FRAME_KINDS = ("identity", "translation", "shear_test")


class FrameError(ValueError):
    pass


class FrameMotion:
    """A curve of spatial maps ``O_t`` with frame velocity ``o``, ``o(O_t x) = dO_t(x)/dt``."""

    def __init__(self, hmap: SpatialMap):
        self.map = hmap
        self.dim = hmap.dim

    def map_at(self, t: float):
        """``O_t`` as a callable on points."""
        return lambda x: self.map.forward(x, t)

    def frame_velocity(self, y, t=0.0):
        return self.map.eulerian_velocity(y, t)

    def det_jacobian(self, x, t=0.0):
        return self.map.det_jacobian(x, t)

    @property
    def is_identity(self) -> bool:
        return self.map.is_identity

    @property
    def periodic(self) -> bool:
        return self.map.periodic

    def check(self, x, t=0.0, dt: float = 1e-5) -> float:
        """Max deviation of ``o(O_t x)`` from a centered difference of ``O_t(x)`` in t.

        Raises FrameError if the frame reverses orientation at ``x``.
        """
        if np.any(self.det_jacobian(x, t) <= 0):
            raise FrameError("frame map is not orientation preserving")
        fd = (self.map.forward(x, t + dt) - self.map.forward(x, t - dt)) / (2 * dt)
        o = self.frame_velocity(self.map.forward(x, t), t)
        return float(np.max(np.abs(fd - o)))


def make_frame(kind: str, dim: int, extent=None, velocity=None, amplitude: float = 0.05,
               omega: float = 2 * np.pi) -> FrameMotion:
    extent = np.ones(dim) if extent is None else np.atleast_1d(np.asarray(extent, dtype=float))
    if kind == "identity":
        return FrameMotion(IdentityMap(dim))
    if kind == "translation":
        c = np.zeros(dim)
        if velocity is not None:
            vel = np.atleast_1d(np.asarray(velocity, dtype=float))
            c[: min(dim, vel.size)] = vel[:dim]
        return FrameMotion(TranslationMap(c))
    if kind == "shear_test":
        if dim < 2:
            raise FrameError("shear_test frame needs dim >= 2")
        return FrameMotion(ShearMap(dim, length=float(extent[1]), amplitude=amplitude, omega=omega))
    raise FrameError(f"unknown frame kind {kind!r}; expected one of {FRAME_KINDS}")


def rho_tilde(eos, scale):
    """Rescaled closure ``rho_tilde(n) = rho(s n) / s`` (with ``rho_tilde'``, ``p_tilde``).

    Raises EosError for a non-positive ``s``.
    """
    return ScaledEos(eos, scale)


@dataclass
class MovingFrameState:
    m_tilde: np.ndarray
    J0_tilde: np.ndarray
    t: float = 0.0

    def as_fluid_state(self) -> FluidState:
        return FluidState(self.m_tilde, self.J0_tilde, self.t)

    @classmethod
    def from_fluid_state(cls, state: FluidState) -> "MovingFrameState":
        return cls(state.m, state.J0, state.t)


@dataclass
class FrameFields:
    """Frame and background data sampled at the labels of a grid at one time."""

    t: float
    points: np.ndarray       # O_t(x)
    jac: np.ndarray          # (D, D, ...)
    det: np.ndarray
    o: np.ndarray            # frame velocity at O_t(x)
    bg: BackgroundFields     # background at O_t(x)
    eos: object              # closure at labels (rescaled unless det == 1 identically)

    @property
    def vol(self):
        return self.bg.alpha * self.bg.sqrt_gamma


def _as_analytic(background) -> AdmBackground:
    if not isinstance(background, AdmBackground):
        raise FrameError("moving-frame formulas need an analytic background (evaluated at O_t(x))")
    return background


def frame_fields(grid_or_points, frame: FrameMotion, background: AdmBackground, eos, t: float = 0.0
                 ) -> FrameFields:
    x = grid_or_points.coords() if isinstance(grid_or_points, Grid) else np.asarray(grid_or_points)
    hmap = frame.map
    y = hmap.forward(x, t)
    jac = hmap.jacobian(x, t)
    det = hmap.det_jacobian(x, t)
    if np.any(~(det > 0)):
        raise FrameError("frame Jacobian determinant must be positive")
    bg = _as_analytic(background).evaluate(y, t)
    # the inverse scaling turns the physical action at O(x) into a label-space one
    closure = eos if np.all(det == 1.0) else ScaledEos(eos, 1.0 / det)
    return FrameFields(t, y, jac, det, hmap.velocity(x, t), bg, closure)


def _total_velocity(ff: FrameFields, u_tilde):
    u_hat = np.einsum("ca...,a...->c...", ff.jac, u_tilde)
    return ff.bg.beta + ff.o + u_hat


def _pull_oneform(ff: FrameFields, w):
    return np.einsum("c...,ca...->a...", w, ff.jac)


def hat_transform(u_tilde, J0_tilde, frame: FrameMotion, x, t=0.0):
    """``(u_hat, J0_hat)`` at the moved points ``O_t(x)``.

    The identity frame returns its inputs unchanged.
    """
    if frame.is_identity:
        return u_tilde, J0_tilde
    jac = frame.map.jacobian(x, t)
    det = frame.det_jacobian(x, t)
    if np.any(det == 0):
        raise KinematicsError("singular frame Jacobian")
    return np.einsum("ca...,a...->c...", jac, u_tilde), J0_tilde / det


def to_frame(frame: FrameMotion, x, u, J0, t=0.0):
    """Frame variables at labels ``x`` from physical callables ``u(y)``, ``J0(y)``.

    Inverts ``u(O x) = o + jac u_tilde`` and ``J0(O x) = J0_tilde / det``.
    """
    y = frame.map.forward(x, t)
    ut = _solve(frame.map.jacobian(x, t), u(y) - frame.map.velocity(x, t))
    return ut, J0(y) * frame.det_jacobian(x, t)


# -- Lagrangian data in the frame -------------------------------------------

def moving_reduced_lagrangian(grid: Grid, u_tilde, J0_tilde, frame: FrameMotion, background, eos,
                              t: float = 0.0) -> float:
    """Discrete moving-frame action, written in physical variables.

    ``-sum_x det(x) alpha sqrt(gamma)(O x) rho(J0_hat w) dV``; deliberately
    avoids the rescaled closure so it serves as an independent oracle.
    """
    x = grid.coords()
    y = frame.map.forward(x, t)
    bg = _as_analytic(background).evaluate(y, t)
    det = frame.det_jacobian(x, t)
    v = bg.beta + frame.map.velocity(x, t) + np.einsum("ca...,a...->c...", frame.map.jacobian(x, t), u_tilde)
    n_hat = density_from_total_velocity(v, J0_tilde / det, bg.alpha, bg.gamma)
    dens = -det * bg.alpha * bg.sqrt_gamma * eos.rho(n_hat)
    return math.fsum(dens.ravel()) * grid.cell_volume


def moving_dl_du(u_tilde, J0_tilde, ff: FrameFields):
    """``dl/du_tilde = jac^T alpha sqrt(gamma) rho_tilde'(n) J0_tilde^2 / n gamma v``."""
    v = _total_velocity(ff, u_tilde)
    n = density_from_total_velocity(v, J0_tilde, ff.bg.alpha, ff.bg.gamma)
    return _pull_oneform(ff, momentum_kernel(v, J0_tilde, n, ff.vol, ff.bg.gamma, ff.eos))


def moving_dl_dJ0(u_tilde, J0_tilde, ff: FrameFields):
    """``dl/dJ0_tilde``; equals the physical ``-alpha sqrt(gamma)(p + rho)/J0_hat`` at ``O x``."""
    if np.any(~(J0_tilde > 0)):
        raise ValueError("dl/dJ0 needs J0 > 0 everywhere")
    v = _total_velocity(ff, u_tilde)
    n = density_from_total_velocity(v, J0_tilde, ff.bg.alpha, ff.bg.gamma)
    return dl_dJ_kernel(J0_tilde, n, ff.vol, ff.eos)


def moving_recover(m_tilde, J0_tilde, ff: FrameFields):
    """``u_tilde`` from ``m_tilde``: solve for ``v`` against ``jac^-T m_tilde``, then pull back."""
    m_hat = _solve(np.swapaxes(ff.jac, 0, 1), m_tilde)
    v = recover_total_velocity(m_hat, J0_tilde, ff.bg.alpha, ff.vol, ff.bg.gamma_inv, ff.eos)
    return _solve(ff.jac, v - ff.bg.beta - ff.o)


# -- dynamics ----------------------------------------------------------------

class MovingFrameModel(InertialModel):
    """Euler-Poincare right-hand side for the frame variables.

    With the identity frame every method defers to the inertial model, so
    trajectories agree bit-for-bit.
    """

    def __init__(self, grid: Grid, background, eos, frame: Optional[FrameMotion] = None, **kw):
        super().__init__(grid, background, eos, **kw)
        self.frame = frame if frame is not None else FrameMotion(IdentityMap(grid.dim))
        if not self.frame.is_identity:
            _as_analytic(background)
            if not self.frame.periodic:
                raise FrameError("dynamics on the torus needs a periodic-compatible frame")
        self._ff_cache: dict = {}

    def frame_fields(self, t: float) -> FrameFields:
        ff = self._ff_cache.get(t)
        if ff is None:
            if len(self._ff_cache) > 8:
                self._ff_cache.clear()
            ff = frame_fields(self.grid, self.frame, self.background, self.eos, t)
            self._ff_cache[t] = ff
        return ff

    def momentum(self, u, J0, t: float = 0.0):
        if self.frame.is_identity:
            return super().momentum(u, J0, t)
        return moving_dl_du(u, J0, self.frame_fields(t))

    def recover(self, state):
        if self.frame.is_identity or state.u is not None:
            return super().recover(state)
        return moving_recover(state.m, state.J0, self.frame_fields(state.t))

    def dl_dJ0(self, state):
        if self.frame.is_identity:
            return super().dl_dJ0(state)
        return moving_dl_dJ0(self.recover(state), state.J0, self.frame_fields(state.t))

    def kelvin_oneform(self, state):
        """``m_tilde / J0_tilde`` evaluated from the recovered velocity."""
        if self.frame.is_identity:
            return super().kelvin_oneform(state)
        ff = self.frame_fields(state.t)
        v = _total_velocity(ff, self.recover(state))
        n = density_from_total_velocity(v, state.J0, ff.bg.alpha, ff.bg.gamma)
        return _pull_oneform(ff, kelvin_kernel(v, state.J0, n, ff.vol, ff.bg.gamma, ff.eos))

    def advection_speed(self, state):
        if self.frame.is_identity:
            return super().advection_speed(state)
        ff = self.frame_fields(state.t)
        u = self.recover(state)
        v = _total_velocity(ff, u)
        n = density_from_total_velocity(v, state.J0, ff.bg.alpha, ff.bg.gamma)
        cs = np.sqrt(ff.eos.sound_speed_squared(n))
        diag = np.array([ff.bg.gamma[a, a] for a in range(self.grid.dim)])
        return np.abs(u) + cs * ff.bg.alpha / np.sqrt(diag)

    def physical(self, state):
        """``(u, J0)`` at the moved points ``O_t(x)``."""
        u = self.recover(state)
        ff = None if self.frame.is_identity else self.frame_fields(state.t)
        if ff is None:
            return u, state.J0
        return _total_velocity(ff, u) - ff.bg.beta, state.J0 / ff.det


def moving_ep_rhs(grid: Grid, state, frame: FrameMotion, background, eos):
    """``(dm_tilde/dt, dJ0_tilde/dt)`` in the frame."""
    if isinstance(state, MovingFrameState):
        state = state.as_fluid_state()
    dm, dJ, _ = MovingFrameModel(grid, background, eos, frame).rhs(state)
    return dm, dJ


# -- twin-run comparison -------------------------------------------------------

def frame_equivalence_check(grid: Grid, inertial_run, moving_run, frame: FrameMotion) -> list[dict]:
    """Compare an inertial run with a translation-frame run of the same data.

    Each run is a sequence of ``(t, u, J0)`` on ``grid``.  Checks
    ``u(x, t) = c + u_tilde(x - c t, t)`` and ``J0(x, t) = J0_tilde(x - c t, t)``
    using a spectral shift; returns one record per output time.
    """
    if not isinstance(frame.map, TranslationMap):
        raise FrameError("frame equivalence is defined for translation frames")
    if len(inertial_run) != len(moving_run):
        raise FrameError("runs have different numbers of outputs")
    c = frame.map.c
    report = []
    for (t1, u, J), (t2, ut, Jt) in zip(inertial_run, moving_run):
        if abs(t1 - t2) > 1e-12 * max(1.0, abs(t1)):
            raise FrameError(f"output times differ: {t1} vs {t2}")
        if np.shape(u) != np.shape(ut) or np.shape(J) != np.shape(Jt) or np.shape(J) != grid.shape:
            raise FrameError("grid mismatch between runs")
        shift = c * t1
        u_pred = grid.fourier_shift(ut, shift) + np.reshape(c, (-1,) + (1,) * grid.dim)
        J_pred = grid.fourier_shift(Jt, shift)
        report.append({"t": t1,
                       "u": float(np.max(np.abs(u - u_pred))),
                       "J0": float(np.max(np.abs(J - J_pred)))})
    return report
