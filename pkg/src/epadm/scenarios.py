"""Bundled initial data and the linear acoustic reference speed.

Initial data are given as physical callables ``u(y)``, ``J0(y)``; the
evolved momentum is built from them once through the model's ``dl/du``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .diagnostics import MaterialLoop
from .dynamics import FluidState, InertialModel
from .eos import Eos
from .frames import FrameMotion, MovingFrameModel, make_frame, to_frame
from .geometry import AdmBackground, builtin_background
from .grid import Grid
from .lagrangian import lorentz_radicand

SCENARIOS = ("rest_state", "uniform_advection", "acoustic_1d", "vortex_2d", "shifted_rest",
             "moving_frame_twin")


class ScenarioError(ValueError):
    pass


def acoustic_dispersion(eos, n0: float) -> float:
    """Linear sound speed about rest in flat space, ``c_s^2 = n0 rho''(n0) / rho'(n0)``.

    Linearizing ``dm/dt = J0 d(dl/dJ0)``, ``dJ0/dt = -d(J0 u)`` about
    ``(u = 0, J0 = n0)`` gives ``rho'(n0) du/dt = -rho''(n0) d(dJ0)`` and
    ``d(dJ0)/dt = -n0 du``, a wave equation with the speed above.
    """
    if not n0 > 0:
        raise ScenarioError("reference density must be positive")
    return float(np.sqrt(eos.sound_speed_squared(np.asarray(float(n0)))))


@dataclass
class Scenario:
    name: str
    grid: Grid
    background: AdmBackground
    eos: Eos
    u: Callable
    J0: Callable
    loops: list = field(default_factory=list)
    t_end: float = 1.0
    output_every: float = 0.1
    safety: float = 0.4
    dt: Optional[float] = None
    frame: Optional[FrameMotion] = None
    hyperdissipation: float = 0.0
    params: dict = field(default_factory=dict)

    def build_model(self, frame: Optional[FrameMotion] = None):
        frame = self.frame if frame is None else frame
        kw = dict(hyperdissipation=self.hyperdissipation)
        if frame is None:
            return InertialModel(self.grid, self.background, self.eos, **kw)
        return MovingFrameModel(self.grid, self.background, self.eos, frame, **kw)

    def initial_fields(self, frame: Optional[FrameMotion] = None, t: float = 0.0):
        """``(u, J0)`` on the grid, expressed in ``frame`` when given."""
        x = self.grid.coords()
        if frame is None or frame.is_identity:
            return np.asarray(self.u(x), dtype=float), np.asarray(self.J0(x), dtype=float)
        return to_frame(frame, x, self.u, self.J0, t)

    def initial_state(self, model) -> FluidState:
        frame = getattr(model, "frame", None)
        u, J0 = self.initial_fields(frame)
        return model.initial_state(u, J0)

    def check(self) -> None:
        """Density positivity and the subluminal bound at t = 0."""
        x = self.grid.coords()
        u, J0 = np.asarray(self.u(x)), np.asarray(self.J0(x))
        if np.any(~(J0 > 0)):
            raise ScenarioError(f"{self.name}: initial J0 must be positive")
        bg = self.background.sample(self.grid)
        if np.any(~(lorentz_radicand(bg.beta + u, bg.alpha, bg.gamma) > 0)):
            raise ScenarioError(f"{self.name}: initial velocity violates the subluminal bound")


def _image_offsets(extent):
    return [np.array([i * extent[0], j * extent[1]]) for i in (-1, 0, 1) for j in (-1, 0, 1)]


def _gaussian_images(x, center, extent, width):
    """``(b, db/dx0, db/dx1)`` for a Gaussian column summed over neighbouring images.

    Periodic and axisymmetric about the core up to ``exp(-L^2 / 2 w^2)``.
    """
    b = 0.0
    d0 = d1 = 0.0
    for off in _image_offsets(extent):
        r0 = x[0] - center[0] - off[0]
        r1 = x[1] - center[1] - off[1]
        g = np.exp(-(r0 * r0 + r1 * r1) / (2 * width ** 2))
        b = b + g
        d0 = d0 - g * r0 / width ** 2
        d1 = d1 - g * r1 / width ** 2
    return b, d0, d1


def swirl(center, extent, width: float, speed: float):
    """Divergence-free swirl ``u = (d1 psi, -d0 psi)`` from ``psi = A b``, peak speed ``speed``.

    ``b`` is a periodic Gaussian column in axes 0, 1.  Near the core
    ``|u| = A r / w^2 exp(-r^2 / 2 w^2)``, maximal at ``r = w``.
    """
    center = np.asarray(center, dtype=float)
    extent = np.asarray(extent, dtype=float)
    A = speed * width * np.exp(0.5)

    def u(x):
        _, d0, d1 = _gaussian_images(x, center, extent, width)
        out = np.zeros(np.shape(x))
        out[0] = A * d1
        out[1] = -A * d0
        return out

    return u


def _balance_exponent(s2, a2, terms: int = 40):
    """``int_r^inf v^2 / (r (1 - v^2)) dr`` for ``v = a s exp(-s^2/2)``, ``s = r / w``.

    Expanding ``1 / (1 - v^2)`` term ``j`` integrates to
    ``a^(2j) Gamma(j, j s^2) / (2 j^j)``.
    """
    out = 0.0
    for j in range(1, terms + 1):
        c = a2 ** j * special.gamma(j) / (2.0 * j ** j)
        if c < 1e-18:
            break
        out = out + c * special.gammaincc(j, j * s2)
    return out


def _invert_enthalpy(eos, h, n_guess, iters: int = 60):
    """Solve ``rho'(n) = h`` pointwise by Newton from ``n_guess`` (needs ``rho'' > 0``)."""
    n = np.full(np.shape(h), float(n_guess))
    for _ in range(iters):
        step = (eos.drho_dn(n) - h) / eos.d2rho_dn2(n)
        n = np.maximum(n - step, 0.5 * n)
        if np.max(np.abs(step)) <= 1e-15 * np.max(n):
            break
    return n


def balanced_density(eos, background, velocity, center, extent, width: float, speed: float,
                     n0: float):
    """``J0(x)`` putting the swirl in cyclostrophic balance.

    A steady circular flow in flat space needs ``d ln rho'(n) / dr =
    v^2 / (r (1 - v^2))``; the enthalpy ``rho'`` is integrated inward from
    ``n0`` far from the core.  ``velocity`` returns the total velocity
    ``beta + u`` used to convert ``n`` into ``J0``.
    """
    a2 = (speed * np.exp(0.5)) ** 2
    h0 = float(eos.drho_dn(np.asarray(float(n0))))
    if not np.all(eos.d2rho_dn2(np.asarray(float(n0))) > 0):
        return lambda x: np.full(np.shape(x)[1:], n0)
    center = np.asarray(center, dtype=float)
    extent = np.asarray(extent, dtype=float)

    def J(x):
        x = np.asarray(x, dtype=float)
        # minimal-image radius; the profile is negligible at the cell boundary
        d = [(x[a] - center[a] + 0.5 * extent[a]) % extent[a] - 0.5 * extent[a] for a in (0, 1)]
        s2 = (d[0] ** 2 + d[1] ** 2) / width ** 2
        n = _invert_enthalpy(eos, h0 * np.exp(-_balance_exponent(s2, a2)), n0)
        f = background.evaluate(x, 0.0)
        return n / np.sqrt(lorentz_radicand(velocity(x), f.alpha, f.gamma))

    return J


def _vec(value, dim):
    v = np.zeros(dim)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    v[: min(dim, arr.size)] = arr[:dim]
    return v


def make_scenario(name: str, **params) -> Scenario:
    """Build a bundled scenario; ``params`` override the defaults listed per case."""
    p = dict(params)

    def take(key, default):
        return p.pop(key, default)

    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")

    if name in ("acoustic_1d", "moving_frame_twin"):
        dim = take("dim", 1)
        n = take("points", 128)
    elif name in ("vortex_2d", "shifted_rest"):
        dim = take("dim", 2)
        n = take("points", 128)
    else:
        dim = take("dim", 2)
        n = take("points", 32)
    L = float(take("extent", 1.0))
    # loop scenarios interpolate marker velocities at fifth order: cubic
    # Lagrange limits the circulation rate to second order
    interp = 5 if name in ("vortex_2d", "shifted_rest") else 3
    grid = Grid.cube(dim, n, L, fd_order=take("fd_order", 4), interp_order=take("interp_order", interp))
    extent = np.asarray(grid.extent, dtype=float)
    eos = take("eos", None)
    loops = []
    frame = None
    t_end, every = 1.0, 0.1

    if name == "rest_state":
        eos = eos or Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3)
        bg = builtin_background(take("background", "minkowski"), dim, extent)
        n0 = take("n0", 1.0)
        u_fn = lambda x: np.zeros(np.shape(x))
        J_fn = lambda x: np.full(np.shape(x)[1:], n0)

    elif name == "uniform_advection":
        eos = eos or Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3)
        bg = builtin_background(take("background", "minkowski"), dim, extent)
        c = _vec(take("velocity", 0.3), dim)
        n0 = take("n0", 1.0)
        u_fn = lambda x: np.broadcast_to(np.reshape(c, (-1,) + (1,) * (np.ndim(x) - 1)), np.shape(x)).copy()
        J_fn = lambda x: np.full(np.shape(x)[1:], n0)
        if take("comoving", False):
            frame = make_frame("translation", dim, extent, c)

    elif name in ("acoustic_1d", "moving_frame_twin"):
        eos = eos or Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3)
        bg = builtin_background(take("background", "minkowski"), dim, extent)
        n0 = take("n0", 1.0)
        amp = take("amplitude", 1e-4)
        mode = int(take("mode", 1))
        direction = take("direction", "right")
        cs = acoustic_dispersion(eos, n0)
        k = 2 * np.pi * mode / extent[0]
        sign = {"right": 1.0, "left": -1.0, "standing": 0.0}[direction]

        def J_fn(x):
            return n0 * (1.0 + amp * np.sin(k * x[0]))

        def u_fn(x):
            out = np.zeros(np.shape(x))
            out[0] = sign * cs * amp * np.sin(k * x[0])
            return out

        if name == "moving_frame_twin":
            frame = make_frame("translation", dim, extent, take("frame_velocity", 0.2))
        t_end = 1.0

    elif name == "vortex_2d":
        if dim < 2:
            raise ScenarioError("vortex_2d needs dim >= 2")
        eos = eos or Eos("polytrope", K=1.0, Gamma=4 / 3)
        bg = builtin_background(take("background", "minkowski"), dim, extent)
        center = _vec(take("center", 0.5 * extent), dim)
        width = take("width", 0.08 * L)
        speed = take("speed", 0.2)
        cap = take("cap", 0.5)
        n0 = take("n0", 1.0)
        if speed > cap:
            raise ScenarioError(f"vortex speed {speed} exceeds the cap {cap}")
        u_fn = swirl(center, extent, width, speed)
        if take("balanced", True):
            J_fn = balanced_density(eos, bg, u_fn, center, extent, width, speed, n0)
        else:
            J_fn = lambda x: np.full(np.shape(x)[1:], n0)
        loops.append(MaterialLoop.circle(center, take("loop_radius", 1.5 * width),
                                         take("markers", 256), extent, name="core"))
        # one turnover at the speed maximum
        t_end = 2 * np.pi * width / speed
        every = t_end / 10

    elif name == "shifted_rest":
        eos = eos or Eos("polytrope", K=1.0, Gamma=4 / 3)
        bg_params = {"velocity": take("shift", (0.3, 0.0, 0.0)),
                     "profile_amplitude": take("shift_profile", 0.0)}
        bg = builtin_background("shift_wind", dim, extent, **bg_params)
        pert = take("perturbation", 0.0)
        n0 = take("n0", 1.0)
        center = _vec(take("center", 0.5 * extent), dim)
        width = take("width", 0.08 * L)
        vort = swirl(center, extent, width, pert) if pert and dim >= 2 else None

        def u_fn(x):
            u = -np.asarray(bg.beta(x, 0.0), dtype=float) * np.ones(np.shape(x))
            return u + vort(x) if vort is not None else u

        if vort is not None and take("balanced", True):
            J_fn = balanced_density(eos, bg, vort, center, extent, width, pert, n0)
        else:
            J_fn = lambda x: np.full(np.shape(x)[1:], n0)
        if vort is not None:
            loops.append(MaterialLoop.circle(center, take("loop_radius", 1.5 * width),
                                             take("markers", 256), extent, name="core"))
            t_end = 2 * np.pi * width / pert
            every = t_end / 10

    sc = Scenario(name, grid, bg, eos, u_fn, J_fn, loops,
                  t_end=take("t_end", t_end), output_every=take("output_every", every),
                  safety=take("safety", 0.4), dt=take("dt", None), frame=frame,
                  hyperdissipation=take("hyperdissipation", 0.0), params=dict(params))
    if p:
        raise ScenarioError(f"unknown parameters for {name}: {sorted(p)}")
    sc.check()
    return sc
