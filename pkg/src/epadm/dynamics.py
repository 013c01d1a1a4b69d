"""Time integration of the Euler-Poincare system on a fixed background.

Evolved state: the momentum one-form density ``m = dl/du`` and the density
``J0``.  Each right-hand-side evaluation recovers ``u`` pointwise from
``m`` and then applies

    dm/dt  = -L_u m + J0 d(dl/dJ0)
    dJ0/dt = -d_a (J0 u^a)

with periodic central differences.  The flow map ``h_t`` never appears.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import AdmBackground, BackgroundFields, raise_index
from .grid import Grid, assert_finite
from .lagrangian import (
    EulerianFluid,
    density_from_total_velocity,
    dl_dJ_kernel,
    kelvin_kernel,
    momentum_kernel,
)

LIGHT_CONE_MARGIN = 1e-12
RECOVERY_RTOL = 1e-13
RECOVERY_MAXITER = 100
_SCAN_POINTS = 64


class RecoveryError(FloatingPointError):
    pass


class StepRejected(RuntimeError):
    pass


@dataclass
class FluidState:
    m: np.ndarray
    J0: np.ndarray
    t: float = 0.0
    u: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def copy(self) -> "FluidState":
        return FluidState(self.m.copy(), self.J0.copy(), self.t,
                          None if self.u is None else self.u.copy())


# -- velocity recovery ------------------------------------------------------

def _speed_residual(s, M, J, alpha, vol, eos):
    """f(s) - M and f'(s) for f(s) = vol J rho'(J w) s / w, w = sqrt(alpha^2 - s^2)."""
    w2 = alpha * alpha - s * s
    w = np.sqrt(w2)
    n = J * w
    d1 = eos.drho_dn(n)
    d2 = eos.d2rho_dn2(n)
    f = vol * J * d1 * s / w
    df = vol * J * (alpha * alpha * d1 / (w2 * w) - d2 * J * s * s / w2)
    return f - M, df


def _restrict(eos, index, shape):
    return eos.restrict(index, shape) if hasattr(eos, "restrict") else eos


def recover_speed(M, J, alpha, vol, eos):
    """Solve ``f(s) = M`` for the metric speed ``s = |beta + u|`` pointwise.

    Safeguarded Newton inside a bracket ``[0, alpha (1 - 1e-12))``.  When
    ``f`` is not monotone (stiff polytropes) the smallest root is isolated
    by a coarse scan first.  Bisection replaces any Newton step that leaves
    the bracket.
    """
    M, J, alpha, vol = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (M, J, alpha, vol)))
    s = np.zeros(M.shape)
    todo = M > 0
    if not np.any(todo):
        return s
    M1, J1, a1, v1 = M[todo], J[todo], alpha[todo], vol[todo]
    e1 = _restrict(eos, todo, M.shape)
    lo = np.zeros_like(M1)
    hi = a1 * (1.0 - LIGHT_CONE_MARGIN)
    g_hi, _ = _speed_residual(hi, M1, J1, a1, v1, e1)
    bad = ~(g_hi > 0)
    if np.any(bad):
        # f is not monotone here: bracket the slow branch below the first
        # maximum of f, located by bisection on the sign of f'
        nb = int(bad.sum())
        eb = _restrict(e1, bad, M1.shape)
        Mb, Jb, ab, vb = M1[bad], J1[bad], a1[bad], v1[bad]
        top = hi[bad].copy()
        lo_d, hi_d = np.zeros(nb), top.copy()
        # first sign change of f' on a ladder, then refine
        found = np.zeros(nb, dtype=bool)
        prev = np.zeros(nb)
        for k in range(1, _SCAN_POINTS + 1):
            sk = top * k / _SCAN_POINTS
            _, dk = _speed_residual(sk, Mb, Jb, ab, vb, eb)
            hit = ~(dk > 0) & ~found
            lo_d[hit], hi_d[hit] = prev[hit], sk[hit]
            found |= hit
            prev = sk
        for _ in range(60):
            mid = 0.5 * (lo_d + hi_d)
            _, dm = _speed_residual(mid, Mb, Jb, ab, vb, eb)
            up = dm > 0
            lo_d = np.where(up, mid, lo_d)
            hi_d = np.where(up, hi_d, mid)
        peak = np.where(found, lo_d, top)
        g_peak, _ = _speed_residual(peak, Mb, Jb, ab, vb, eb)
        if np.any(g_peak < 0):
            raise RecoveryError(
                f"no subluminal velocity reproduces the momentum at {int((g_peak < 0).sum())} point(s)")
        hi[bad] = peak

    # small-velocity guess
    x = M1 * a1 / (v1 * J1 * e1.drho_dn(J1 * a1))
    x = np.where((x > lo) & (x < hi), x, 0.5 * (lo + hi))
    active = np.ones(x.shape, dtype=bool)
    for _ in range(RECOVERY_MAXITER):
        idx = np.nonzero(active)[0]
        ea = _restrict(e1, idx, M1.shape)
        xa = x[idx]
        g, dg = _speed_residual(xa, M1[idx], J1[idx], a1[idx], v1[idx], ea)
        neg = g < 0
        lo[idx] = np.where(neg, xa, lo[idx])
        hi[idx] = np.where(neg, hi[idx], xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xa - g / dg
        ok = (dg > 0) & (step > lo[idx]) & (step < hi[idx])
        new = np.where(ok, step, 0.5 * (lo[idx] + hi[idx]))
        done = (np.abs(new - xa) <= RECOVERY_RTOL * np.abs(new)) | (g == 0) \
            | (hi[idx] - lo[idx] <= RECOVERY_RTOL * np.abs(new))
        x[idx] = np.where(g == 0, xa, new)
        active[idx[done]] = False
        if not np.any(active):
            break
    else:
        raise RecoveryError(
            f"Newton recovery did not converge in {RECOVERY_MAXITER} iterations "
            f"at {int(active.sum())} point(s)")
    s[todo] = x
    return s


def recover_total_velocity(m, J, alpha, vol, gamma_inv, eos):
    """Invert ``m = vol rho'(n) J^2/n gamma v`` for the total velocity ``v``."""
    m_up = raise_index(m, gamma_inv)
    M = np.sqrt(np.maximum(np.einsum("a...,a...->...", m, m_up), 0.0))
    s = recover_speed(M, J, alpha, vol, eos)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(M > 0, s / M, 0.0)
    return ratio * m_up


def velocity_recovery(state: FluidState, bg: BackgroundFields, eos) -> np.ndarray:
    """Eulerian velocity ``u`` from the momentum; ``u = -beta`` where ``m = 0``."""
    v = recover_total_velocity(state.m, state.J0, bg.alpha, bg.alpha * bg.sqrt_gamma,
                               bg.gamma_inv, eos)
    return v - bg.beta


# -- Lie derivatives --------------------------------------------------------

def lie_derivative_oneform_density(grid: Grid, u: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``(L_u m)_a = d_b(u^b m_a) + m_b d_a u^b``."""
    out = np.empty_like(m, dtype=float)
    du = [grid.partial(u, a) for a in range(grid.dim)]  # du[a][b] = d_a u^b
    for a in range(grid.dim):
        flux = u * m[a]
        term = grid.divergence(flux)
        out[a] = term + np.einsum("b...,b...->...", m, du[a])
    return out


def lie_derivative_density(grid: Grid, u: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``L_u d = d_a(d u^a)`` in flux form."""
    return grid.divergence(d * u)


# -- models -----------------------------------------------------------------

class InertialModel:
    """Euler-Poincare right-hand side on a fixed (inertial) background.

    Parameters
    ----------
    grid : Grid
    background : AdmBackground or BackgroundFields
        Analytic backgrounds are sampled on the grid; time-dependent ones
        are re-sampled at every stage time.
    eos : Eos
    hyperdissipation : float
        Strength ``nu`` of the optional ``nu (-1)^(k+1) Laplacian^k``
        regularization applied to ``m`` and ``J0`` (0 disables it).
    hyper_order : int
        The power ``k``.
    floor : float
        Atmosphere floor for ``J0`` (applied after each accepted step).
    """

    frame = None

    def __init__(self, grid: Grid, background, eos, hyperdissipation: float = 0.0,
                 hyper_order: int = 2, floor: float = 0.0):
        self.grid = grid
        self.eos = eos
        self.hyperdissipation = float(hyperdissipation)
        self.hyper_order = int(hyper_order)
        self.floor = float(floor)
        if isinstance(background, AdmBackground):
            self.background = background
            self._static = None if background.time_dependent else background.sample(grid)
        else:
            self.background = None
            self._static = background

    def fields(self, t: float = 0.0) -> BackgroundFields:
        if self._static is not None:
            return self._static
        return self.background.sample(self.grid, t)

    def set_floor_from(self, J0: np.ndarray, factor: float = 1e-12) -> None:
        self.floor = factor * float(np.mean(J0))

    # state conversion
    def momentum(self, u: np.ndarray, J0: np.ndarray, t: float = 0.0) -> np.ndarray:
        bg = self.fields(t)
        v = bg.beta + u
        n = density_from_total_velocity(v, J0, bg.alpha, bg.gamma)
        return momentum_kernel(v, J0, n, bg.alpha * bg.sqrt_gamma, bg.gamma, self.eos)

    def initial_state(self, u, J0, t: float = 0.0) -> FluidState:
        u = np.asarray(u, dtype=float)
        J0 = np.asarray(J0, dtype=float)
        if self.floor == 0.0:
            self.set_floor_from(J0)
        return FluidState(self.momentum(u, J0, t), J0.copy(), t)

    def recover(self, state: FluidState) -> np.ndarray:
        if state.u is not None:
            return state.u
        bg = self.fields(state.t)
        return velocity_recovery(state, bg, self.eos)

    def recover_all(self, state: FluidState):
        """``(u, v, n, bg)``: velocity, total velocity, number density, background."""
        bg = self.fields(state.t)
        u = self.recover(state)
        v = bg.beta + u
        n = density_from_total_velocity(v, state.J0, bg.alpha, bg.gamma)
        return u, v, n, bg

    def dl_dJ0(self, state: FluidState) -> np.ndarray:
        _, _, n, bg = self.recover_all(state)
        return dl_dJ_kernel(state.J0, n, bg.alpha * bg.sqrt_gamma, self.eos)

    def kelvin_oneform(self, state: FluidState) -> np.ndarray:
        """Circulation integrand ``(1/J0) dl/du`` built from the recovered velocity."""
        _, v, n, bg = self.recover_all(state)
        return kelvin_kernel(v, state.J0, n, bg.alpha * bg.sqrt_gamma, bg.gamma, self.eos)

    def advection_speed(self, state: FluidState) -> np.ndarray:
        """Per-axis bound ``|u^a| + |beta^a| + c_s alpha / sqrt(gamma_aa)``."""
        u, v, n, bg = self.recover_all(state)
        cs = np.sqrt(self.eos.sound_speed_squared(n))
        diag = np.array([bg.gamma[a, a] for a in range(self.grid.dim)])
        return np.abs(u) + np.abs(bg.beta) + cs * bg.alpha / np.sqrt(diag)

    def _hyper(self, f: np.ndarray) -> np.ndarray:
        out = f
        for _ in range(self.hyper_order):
            out = self.grid.laplacian(out)
        return self.hyperdissipation * (-1) ** (self.hyper_order + 1) * out

    def rhs(self, state: FluidState):
        """``(dm/dt, dJ0/dt, u)``."""
        grid = self.grid
        u = self.recover(state)
        dlJ = self.dl_dJ0(state)
        dm = -lie_derivative_oneform_density(grid, u, state.m) + state.J0 * grid.gradient(dlJ)
        dJ = -lie_derivative_density(grid, u, state.J0)
        if self.hyperdissipation:
            dm = dm + self._hyper(state.m)
            dJ = dJ + self._hyper(state.J0)
        return dm, dJ, u

    def mass(self, state: FluidState) -> float:
        return self.grid.integrate(state.J0)


def ep_rhs(grid: Grid, state: FluidState, bg, eos):
    """``(dm/dt, dJ0/dt)`` of the inertial Euler-Poincare system."""
    dm, dJ, _ = InertialModel(grid, bg, eos).rhs(state)
    return dm, dJ


# -- integrator -------------------------------------------------------------

def _stage(state: FluidState, k, dt) -> FluidState:
    return FluidState(state.m + dt * k[0], state.J0 + dt * k[1], state.t + dt)


def rk4_step(model, state: FluidState, dt: float,
             markers: Sequence[np.ndarray] = ()) -> tuple[FluidState, list]:
    """One classical RK4 step of the fields, optionally co-advecting marker sets.

    Each marker array has shape ``(dim, N)`` and obeys ``dX/dt = u(X)`` with
    the stage velocity interpolated at the stage positions.  Returns the new
    state (with its recovered velocity cached) and the new marker arrays.

    Raises StepRejected if the new state is non-finite or its velocity
    cannot be recovered; the input state is left untouched.
    """
    grid = model.grid
    markers = [np.asarray(X, dtype=float) for X in markers]

    def marker_rates(u, Xs):
        return [grid.interpolate(u, X) for X in Xs]

    try:
        k1m, k1J, u1 = model.rhs(state)
        r1 = marker_rates(u1, markers)
        s2 = _stage(state, (k1m, k1J), dt / 2)
        k2m, k2J, u2 = model.rhs(s2)
        r2 = marker_rates(u2, [X + dt / 2 * r for X, r in zip(markers, r1)])
        s3 = _stage(state, (k2m, k2J), dt / 2)
        k3m, k3J, u3 = model.rhs(s3)
        r3 = marker_rates(u3, [X + dt / 2 * r for X, r in zip(markers, r2)])
        s4 = _stage(state, (k3m, k3J), dt)
        k4m, k4J, u4 = model.rhs(s4)
        r4 = marker_rates(u4, [X + dt * r for X, r in zip(markers, r3)])
    except (FloatingPointError, ValueError) as exc:
        raise StepRejected(f"stage evaluation failed at t={state.t:.6g}: {exc}") from exc
    m = state.m + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
    J0 = state.J0 + dt / 6 * (k1J + 2 * k2J + 2 * k3J + k4J)
    try:
        assert_finite("rk4_step", m, J0)
    except FloatingPointError as exc:
        raise StepRejected(str(exc)) from exc
    if model.floor > 0:
        J0 = np.maximum(J0, model.floor)
    new = FluidState(m, J0, state.t + dt)
    try:
        new.u = model.recover(new)
    except (FloatingPointError, ValueError) as exc:
        raise StepRejected(f"invariant violation after step to t={new.t:.6g}: {exc}") from exc
    new_markers = [X + dt / 6 * (a + 2 * b + 2 * c + d)
                   for X, a, b, c, d in zip(markers, r1, r2, r3, r4)]
    return new, new_markers


def cfl_dt(model, state: FluidState, safety: float = 0.5) -> float:
    """``safety * min_{points, axes} spacing / speed``.

    Falls back to ``safety * min spacing`` when every characteristic speed
    vanishes (e.g. dust at rest).
    """
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    speed = model.advection_speed(state)
    h = np.reshape(model.grid.spacing, (model.grid.dim,) + (1,) * model.grid.dim)
    with np.errstate(divide="ignore"):
        ratio = np.where(speed > 0, h / speed, np.inf)
    best = float(np.min(ratio))
    if not np.isfinite(best):
        best = min(model.grid.spacing)
    return safety * best


def evolve(model, state: FluidState, t_end: float, dt: Optional[float] = None, safety: float = 0.5,
           markers: Sequence[np.ndarray] = (), callback=None, max_steps: int = 10_000_000):
    """Integrate to ``t_end``; the last step is shortened to land exactly on it.

    ``callback(state, markers, step)`` is called after every accepted step.
    """
    markers = list(markers)
    step = 0
    while state.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        h = cfl_dt(model, state, safety) if dt is None else dt
        h = min(h, t_end - state.t)
        state, markers = rk4_step(model, state, h, markers)
        step += 1
        if callback is not None:
            callback(state, markers, step)
        if step >= max_steps:
            raise RuntimeError("maximum number of steps exceeded")
    return state, markers


def with_time(state: FluidState, t: float) -> FluidState:
    return replace(state, t=t)
