"""Independent numerical oracles behind the ``verify`` suites.

Closed-form variational derivatives are compared with central differences
of the discrete actions, site by site.  A single-site perturbation changes
one term of the action; the difference of the two actions is formed with
``math.fsum`` over both term lists, so it is exact apart from the rounding
of the changed terms themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import recover_total_velocity
from .eos import Eos, ScaledEos
from .frames import (
    FrameMotion,
    frame_fields,
    moving_dl_dJ0,
    moving_dl_du,
    moving_recover,
)
from .geometry import BUILTIN_BACKGROUNDS, BackgroundFields, builtin_background
from .grid import Grid
from .kinematics import (
    MAP_CATALOG,
    appendix_a_residuals,
    builtin_map,
    _solve,
    four_form_oracle,
    number_current_from_map,
)
from .lagrangian import (
    EulerianFluid,
    density_from_total_velocity,
    dl_dJ0,
    dl_du,
    lagrangian_density,
    lorentz_radicand,
    matter_source_terms,
    stress_energy,
)

VARDERIV_TOL = 1e-5
PULLBACK_TOL = 1e-9
RECOVERY_TOL = 1e-10
EOS_TOL = 1e-12

EOS_MEMBERS = {
    "dust": Eos("dust", m=1.0),
    "polytrope_2": Eos("polytrope", K=1.0, Gamma=2.0),
    "polytrope_4/3": Eos("polytrope", K=1.0, Gamma=4 / 3),
    "linear_plus_polytrope": Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3),
}


@dataclass
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<58s} {self.error:10.3e}  (tol {self.tol:.0e})"


# -- random smooth data ---------------------------------------------------------

def smooth_random_field(grid: Grid, rng, components=(), modes: int = 2, amplitude: float = 1.0):
    """Sum of a few random low Fourier modes, scaled to max-norm ``amplitude``."""
    x = grid.coords()
    out = np.zeros(tuple(components) + grid.shape)
    for idx in np.ndindex(*components) if components else [()]:
        f = np.zeros(grid.shape)
        for _ in range(3):
            k = rng.integers(-modes, modes + 1, size=grid.dim)
            ph = rng.uniform(0, 2 * np.pi)
            arg = sum(2 * np.pi * k[a] * x[a] / grid.extent[a] for a in range(grid.dim))
            f = f + rng.normal() * np.cos(arg + ph)
        out[idx] = f
    scale = np.max(np.abs(out))
    return amplitude * out / scale if scale > 0 else out


def random_configuration(grid: Grid, bg: BackgroundFields, rng, speed_fraction: float = 0.5):
    """Smooth ``(u, J0)`` with ``max |beta + u|_gamma / alpha = speed_fraction``."""
    w = smooth_random_field(grid, rng, (grid.dim,))
    ratio = np.sqrt(np.einsum("a...,ab...,b...->...", w, bg.gamma, w)) / bg.alpha
    v = speed_fraction * w / max(float(np.max(ratio)), 1e-300)
    J0 = 1.0 + 0.3 * smooth_random_field(grid, rng)
    return v - bg.beta, J0


def _sites(grid: Grid, rng, count: int):
    flat = rng.choice(int(np.prod(grid.shape)), size=count, replace=False)
    return [np.unravel_index(int(i), grid.shape) for i in flat]


def _terms(dens):
    return dens.ravel().tolist()


def _diff(plus, minus):
    return math.fsum(plus + [-t for t in minus])


def _rel(fd, closed, norm):
    return float(np.max(np.abs(np.asarray(fd) - np.asarray(closed))) / max(norm, 1e-300))


# -- inertial variational derivatives ---------------------------------------------

def _bgf(alpha, beta, gamma):
    return BackgroundFields.from_arrays(alpha, beta, gamma)


def varderiv_inertial(grid: Grid, bg: BackgroundFields, eos, u, J0, rng, sites: int = 6,
                      label: str = "") -> list[Check]:
    """FD of ``l = -sum alpha sqrt(gamma) rho(n) dV`` against the closed forms."""
    dV = grid.cell_volume
    fluid = EulerianFluid(u, J0)
    pts = _sites(grid, rng, sites)
    checks = []

    def action_terms(uu=u, JJ=J0, alpha=bg.alpha, beta=bg.beta, gamma=bg.gamma):
        b = bg if (alpha is bg.alpha and beta is bg.beta and gamma is bg.gamma) else _bgf(alpha, beta, gamma)
        return _terms(lagrangian_density(EulerianFluid(uu, JJ), b, eos))

    def fd(field, idx, eps, build):
        p = field.copy()
        p[idx] += eps
        m = field.copy()
        m[idx] -= eps
        return _diff(build(p), build(m)) / (2 * eps)

    # dl/du
    closed = dl_du(fluid, bg, eos)
    eps = 1e-6 * max(float(np.max(np.abs(u))), 1.0)
    got, ref = [], []
    for s in pts:
        for a in range(grid.dim):
            got.append(fd(u, (a,) + s, eps, lambda p: action_terms(uu=p)))
            ref.append(closed[(a,) + s])
    checks.append(Check(f"{label}dl_du", _rel(got, ref, np.max(np.abs(closed))), VARDERIV_TOL))

    # dl/dJ0
    closed = dl_dJ0(fluid, bg, eos)
    eps = 1e-6 * max(float(np.max(np.abs(J0))), 1.0)
    got = [fd(J0, s, eps, lambda p: action_terms(JJ=p)) for s in pts]
    ref = [closed[s] for s in pts]
    checks.append(Check(f"{label}dl_dJ0", _rel(got, ref, np.max(np.abs(closed))), VARDERIV_TOL))

    # stress-energy: dl/dgamma_ab = alpha sqrt(gamma) T^ab / 2 with the label density fixed
    T = stress_energy(fluid, bg, eos)
    eps = 1e-6 * max(float(np.max(np.abs(bg.gamma))), 1.0)
    got, ref = [], []
    sqrtg = bg.sqrt_gamma
    for s in pts:
        for a in range(grid.dim):
            for b in range(a, grid.dim):
                vals = []
                for sign in (1, -1):
                    g = bg.gamma.copy()
                    g[(a, b) + s] += sign * eps
                    if b != a:
                        g[(b, a) + s] += sign * eps
                    bb = _bgf(bg.alpha, bg.beta, g)
                    JJ = J0 * sqrtg / bb.sqrt_gamma
                    vals.append(_terms(lagrangian_density(EulerianFluid(u, JJ), bb, eos)))
                dS = _diff(vals[0], vals[1]) / (2 * eps)
                # a symmetric pair moves gamma_ab and gamma_ba together
                factor = 2.0 if a == b else 1.0
                got.append(factor * dS / (bg.alpha[s] * sqrtg[s]))
                ref.append(T[(a, b) + s])
    checks.append(Check(f"{label}stress_energy", _rel(got, ref, np.max(np.abs(T))), VARDERIV_TOL))

    # matter sources
    d_alpha, d_beta = matter_source_terms(fluid, bg, eos)
    n = density_from_total_velocity(bg.beta + u, J0, bg.alpha, bg.gamma)
    rho = eos.rho(n)
    eps = 1e-6 * max(float(np.max(np.abs(bg.alpha))), 1.0)
    got, ref = [], []
    for s in pts:
        vals = []
        for sign in (1, -1):
            al = bg.alpha.copy()
            al[s] += sign * eps
            JJ = J0 * bg.alpha / al
            vals.append(_terms(lagrangian_density(EulerianFluid(u, JJ), _bgf(al, bg.beta, bg.gamma), eos)))
        dS = _diff(vals[0], vals[1]) / (2 * eps)
        got.append((-dS / sqrtg[s] - rho[s]) / bg.alpha[s])
        ref.append(d_alpha[s])
    checks.append(Check(f"{label}matter d_rho/d_alpha", _rel(got, ref, np.max(np.abs(d_alpha))), VARDERIV_TOL))

    eps = 1e-6 * max(float(np.max(np.abs(bg.beta))), 1.0)
    got, ref = [], []
    for s in pts:
        for a in range(grid.dim):
            dS = fd(bg.beta, (a,) + s, eps, lambda p: action_terms(beta=p))
            got.append(-dS / (bg.alpha[s] * sqrtg[s]))
            ref.append(d_beta[(a,) + s])
    checks.append(Check(f"{label}matter d_rho/d_beta", _rel(got, ref, np.max(np.abs(d_beta))), VARDERIV_TOL))
    return checks


# -- moving frames ------------------------------------------------------------------

def _moving_terms(grid, u_t, J_t, frame, background, eos, t, y, bgv, det, jac, o):
    """Terms of ``-det alpha sqrt(gamma)(O x) rho(J0_tilde / det w)``, physical variables only."""
    v = bgv.beta + o + np.einsum("ca...,a...->c...", jac, u_t)
    n_hat = J_t / det * np.sqrt(lorentz_radicand(v, bgv.alpha, bgv.gamma))
    return _terms(-det * bgv.alpha * bgv.sqrt_gamma * eos.rho(n_hat))


def varderiv_moving(grid: Grid, background, eos, frame: FrameMotion, rng, t: float = 0.3,
                    sites: int = 6, label: str = "") -> list[Check]:
    x = grid.coords()
    ff = frame_fields(grid, frame, background, eos, t)
    # random physical data at O(x), expressed in frame variables
    u_phys, J_phys = random_configuration(grid, ff.bg, rng)
    u_t = _solve(ff.jac, u_phys - ff.o)
    J_t = J_phys * ff.det
    y = frame.map.forward(x, t)
    bgv = background.evaluate(y, t)
    det = frame.det_jacobian(x, t)
    jac = frame.map.jacobian(x, t)
    o = frame.map.velocity(x, t)
    if np.any(~(lorentz_radicand(bgv.beta + o + np.einsum("ca...,a...->c...", jac, u_t),
                                 bgv.alpha, bgv.gamma) > 0)):
        raise FloatingPointError("random moving-frame data is not subluminal")
    args = (grid, frame, background, eos, t, y, bgv, det, jac, o)

    def terms(uu, JJ):
        return _moving_terms(grid, uu, JJ, *args[1:])

    pts = _sites(grid, rng, sites)
    closed_u = moving_dl_du(u_t, J_t, ff)
    closed_J = moving_dl_dJ0(u_t, J_t, ff)
    eps = 1e-6 * max(float(np.max(np.abs(u_t))), 1.0)
    got, ref = [], []
    for s in pts:
        for a in range(grid.dim):
            p, m = u_t.copy(), u_t.copy()
            p[(a,) + s] += eps
            m[(a,) + s] -= eps
            got.append(_diff(terms(p, J_t), terms(m, J_t)) / (2 * eps))
            ref.append(closed_u[(a,) + s])
    checks = [Check(f"{label}moving_dl_du", _rel(got, ref, np.max(np.abs(closed_u))), VARDERIV_TOL)]
    eps = 1e-6 * max(float(np.max(np.abs(J_t))), 1.0)
    got, ref = [], []
    for s in pts:
        p, m = J_t.copy(), J_t.copy()
        p[s] += eps
        m[s] -= eps
        got.append(_diff(terms(u_t, p), terms(u_t, m)) / (2 * eps))
        ref.append(closed_J[s])
    checks.append(Check(f"{label}moving_dl_dJ0", _rel(got, ref, np.max(np.abs(closed_J))), VARDERIV_TOL))
    back = moving_recover(closed_u, J_t, ff)
    checks.append(Check(f"{label}moving recovery", float(np.max(np.abs(back - u_t))), RECOVERY_TOL))
    return checks


MOVING_FRAMES = ("translation", "shear", "linear")


def suite_varderiv(seed: int = 0, points: int = 32, dim: int = 3, configs: int = 3,
                   sites: int = 6) -> list[Check]:
    """Inertial checks for ``configs`` random states per background, plus one moving frame each."""
    rng = np.random.default_rng(seed)
    n = points if dim > 1 else 256
    grid = Grid.cube(dim, n)
    eos_cycle = [EOS_MEMBERS["polytrope_2"], EOS_MEMBERS["linear_plus_polytrope"], EOS_MEMBERS["polytrope_4/3"]]
    checks = []
    for bname in BUILTIN_BACKGROUNDS:
        background = builtin_background(bname, dim, grid.extent)
        bg = background.sample(grid)
        for c in range(configs):
            eos = eos_cycle[c % len(eos_cycle)]
            u, J0 = random_configuration(grid, bg, rng)
            checks += varderiv_inertial(grid, bg, eos, u, J0, rng, sites, label=f"[{bname} #{c}] ")
            fname = MOVING_FRAMES[c % len(MOVING_FRAMES)]
            if fname == "shear" and dim < 2:
                fname = "translation"
            frame = FrameMotion(builtin_map(fname, dim, grid.extent))
            checks += varderiv_moving(grid, background, eos, frame, rng, sites=sites,
                                      label=f"[{bname} #{c} {fname} frame] ")
    return checks


# -- pull-back / four-form -------------------------------------------------------------

def suite_pullback(seed: int = 0, dim: int = 3, samples: int = 64, t: float = 0.37) -> list[Check]:
    rng = np.random.default_rng(seed)
    extent = np.ones(dim)
    checks = []

    def n0(x):
        return 1.0 + 0.25 * np.sin(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[-1])

    for bname in BUILTIN_BACKGROUNDS:
        bg = builtin_background(bname, dim, extent)
        for mname in MAP_CATALOG:
            hmap = builtin_map(mname, dim, extent)
            y = rng.uniform(0, 1, (dim, samples))
            J0, Ja = number_current_from_map(hmap, n0, bg, y, t)
            K0, Ka = four_form_oracle(hmap, n0, bg, y, t)
            scale = max(float(np.max(np.abs(J0))), 1e-300)
            err = max(float(np.max(np.abs(J0 - K0))), float(np.max(np.abs(Ja - Ka)))) / scale
            checks.append(Check(f"[{bname} x {mname}] current vs 4-form", err, PULLBACK_TOL))
    for mname in MAP_CATALOG:
        hmap = builtin_map(mname, dim, extent)
        x = rng.uniform(0, 1, (dim, samples))
        res = appendix_a_residuals(hmap, x, t)
        for key, val in res.items():
            checks.append(Check(f"[{mname}] pull-back identity {key}", val, PULLBACK_TOL))
    return checks


# -- eos identities ---------------------------------------------------------------------

def suite_eos(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    n = rng.uniform(0.05, 3.0, 200)
    checks = []
    for name, eos in EOS_MEMBERS.items():
        p = eos.pressure(n)
        ident = n * eos.drho_dn(n) - eos.rho(n)
        checks.append(Check(f"[{name}] p = n rho' - rho", float(np.max(np.abs(p - ident))), EOS_TOL))
        h = 1e-5 * n
        d1 = (eos.rho(n + h) - eos.rho(n - h)) / (2 * h)
        d2 = (eos.drho_dn(n + h) - eos.drho_dn(n - h)) / (2 * h)
        checks.append(Check(f"[{name}] rho' vs central difference",
                            float(np.max(np.abs(d1 - eos.drho_dn(n)) / np.abs(eos.drho_dn(n)))), 1e-8))
        scale = max(float(np.max(np.abs(eos.d2rho_dn2(n)))), 1.0)
        checks.append(Check(f"[{name}] rho'' vs central difference",
                            float(np.max(np.abs(d2 - eos.d2rho_dn2(n)))) / scale, 1e-8))
        for s in (0.5, 2.0):
            st = ScaledEos(eos, s)
            err = max(float(np.max(np.abs(st.rho(n) - eos.rho(s * n) / s))),
                      float(np.max(np.abs(st.pressure(n) - (n * st.drho_dn(n) - st.rho(n))))))
            checks.append(Check(f"[{name}] rescaled closure s={s}", err, EOS_TOL))
        one = ScaledEos(eos, 1.0)
        checks.append(Check(f"[{name}] unit rescaling is exact",
                            float(np.max(np.abs(one.rho(n) - eos.rho(n)))), 0.0))
    poly = Eos("polytrope", K=1.0, Gamma=2.0)
    checks.append(Check("rescaled polytrope det=2 at n=1 equals 2",
                        abs(float(ScaledEos(poly, 2.0).rho(np.array(1.0))) - 2.0), EOS_TOL))
    checks.append(Check("rescaled dust det=2 equals dust",
                        abs(float(ScaledEos(Eos("dust"), 2.0).rho(np.array(0.7))) - 0.7), EOS_TOL))
    return checks


# -- recovery round trip --------------------------------------------------------------------

def suite_recovery(seed: int = 0, dim: int = 3, points: int = 12, fraction: float = 0.9) -> list[Check]:
    """``dl_du`` then recovery on random velocities up to ``fraction`` of the light-cone bound.

    For ``Gamma > 2`` polytropes the momentum is not monotone in the speed;
    recovery returns the slow branch, so those members are sampled below
    the turning point (see ``max_unique_speed``).
    """
    rng = np.random.default_rng(seed)
    grid = Grid.cube(dim, points)
    checks = []
    members = dict(EOS_MEMBERS)
    members["polytrope_5/2"] = Eos("polytrope", K=1.0, Gamma=2.5)
    for bname in BUILTIN_BACKGROUNDS:
        bg = builtin_background(bname, dim, grid.extent).sample(grid)
        for name, eos in members.items():
            frac = fraction
            if eos.kind == "polytrope" and eos.Gamma > 2:
                frac = min(fraction, 0.95 * max_unique_speed(eos.Gamma))
            w = rng.normal(size=(dim,) + grid.shape)
            wn = np.sqrt(np.einsum("a...,ab...,b...->...", w, bg.gamma, w))
            r = rng.uniform(0.0, 1.0, grid.shape) ** 0.5
            v = frac * bg.alpha * r * w / wn
            J0 = rng.uniform(0.2, 2.0, grid.shape)
            u = v - bg.beta
            m = dl_du(EulerianFluid(u, J0), bg, eos)
            back = recover_total_velocity(m, J0, bg.alpha, bg.alpha * bg.sqrt_gamma, bg.gamma_inv, eos) - bg.beta
            err = float(np.max(np.abs(back - u)))
            checks.append(Check(f"[{bname} / {name}] recovery |v| <= {frac:.3g} alpha", err, RECOVERY_TOL))
    return checks


def max_unique_speed(Gamma: float) -> float:
    """Speed ratio ``s/alpha`` where ``f(s) = J rho'(J w) s / w`` peaks for a polytrope.

    ``f ~ s w^(Gamma-2)``; ``f' = 0`` at ``s^2 / alpha^2 = 1 / (Gamma - 1)`` (no peak for Gamma <= 2).
    """
    if Gamma <= 2:
        return 1.0
    return float(np.sqrt(1.0 / (Gamma - 1.0)))


SUITES = {
    "varderiv": suite_varderiv,
    "pullback": suite_pullback,
    "eos": suite_eos,
    "recovery": suite_recovery,
}


def run_suite(name: str, seed: int = 0, **kw) -> list[Check]:
    if name == "all":
        out = []
        for key in SUITES:
            out += SUITES[key](seed=seed)
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    return SUITES[name](seed=seed, **kw)
