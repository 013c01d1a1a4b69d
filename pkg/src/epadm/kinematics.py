"""Gauge-fixed fluid maps ``Psi(x, t) = (h_t(x), t)`` and their kinematics.

A map supplies analytic closures for ``h_t``, its inverse, its spatial
Jacobian ``jac[c, a] = d h^c / d x^a`` and the label-space time derivative
``velocity(x, t) = d h_t(x) / dt``.  The Eulerian velocity is
``(hdot h^-1)(y) = velocity(h_t^-1(y), t)``.

Evaluation points follow the pull-back definitions: a pull-back returns
values at labels ``x``, a push-forward returns values at images ``y``.
"""

from __future__ import annotations

import itertools

import numpy as np

_COMPLEX_STEP = 1e-30


class KinematicsError(ValueError):
    pass


def _col(v, ndim):
    return np.reshape(v, (-1,) + (1,) * (ndim - 1))


def _det(jac):
    return np.linalg.det(np.moveaxis(np.moveaxis(jac, 0, -1), 0, -1))


def _solve(jac, b):
    """Solve ``jac x = b`` pointwise; jac has shape (D, D, ...)."""
    A = np.moveaxis(np.moveaxis(jac, 0, -1), 0, -1)
    rhs = np.moveaxis(b, 0, -1)[..., None]
    return np.moveaxis(np.linalg.solve(A, rhs)[..., 0], -1, 0)


class SpatialMap:
    """Base class; subclasses implement forward, inverse, jacobian, velocity."""

    dim: int
    periodic: bool = True
    name: str = "map"

    def forward(self, x, t=0.0):
        raise NotImplementedError

    def inverse(self, y, t=0.0):
        raise NotImplementedError

    def jacobian(self, x, t=0.0):
        raise NotImplementedError

    def velocity(self, x, t=0.0):
        raise NotImplementedError

    def det_jacobian(self, x, t=0.0):
        return _det(self.jacobian(x, t))

    def eulerian_velocity(self, y, t=0.0):
        """``(hdot_t h_t^-1)(y)``."""
        return self.velocity(self.inverse(y, t), t)

    @property
    def is_identity(self) -> bool:
        return False


class IdentityMap(SpatialMap):
    name = "identity"

    def __init__(self, dim: int):
        self.dim = dim

    def forward(self, x, t=0.0):
        return np.array(x, copy=True)

    def inverse(self, y, t=0.0):
        return np.array(y, dtype=float, copy=True)

    def jacobian(self, x, t=0.0):
        x = np.asarray(x)
        return np.broadcast_to(np.eye(self.dim).reshape((self.dim, self.dim) + (1,) * (x.ndim - 1)),
                               (self.dim,) + x.shape).copy()

    def velocity(self, x, t=0.0):
        return np.zeros(np.shape(x))

    def det_jacobian(self, x, t=0.0):
        return np.ones(np.shape(x)[1:])

    @property
    def is_identity(self) -> bool:
        return True


class TranslationMap(IdentityMap):
    """``h_t(x) = x + c t``."""

    name = "translation"

    def __init__(self, velocity):
        c = np.atleast_1d(np.asarray(velocity, dtype=float))
        super().__init__(c.size)
        self.c = c

    def forward(self, x, t=0.0):
        return x + _col(self.c, np.ndim(x)) * t

    def inverse(self, y, t=0.0):
        y = np.asarray(y, dtype=float)
        return y - _col(self.c, y.ndim) * t

    def velocity(self, x, t=0.0):
        return np.broadcast_to(_col(self.c, np.ndim(x)), np.shape(x)).astype(float)

    @property
    def is_identity(self) -> bool:
        return not np.any(self.c)


class ShearMap(SpatialMap):
    """``h^0 = x^0 + a(t) sin(2 pi x^1 / L)`` with ``a(t) = eps sin(omega t + phase)``.

    Area preserving and periodic-compatible.
    """

    name = "shear"

    def __init__(self, dim: int, length: float = 1.0, amplitude: float = 0.05,
                 omega: float = 2 * np.pi, phase: float = 0.0):
        if dim < 2:
            raise KinematicsError("shear map needs at least two dimensions")
        self.dim = dim
        self.k = 2 * np.pi / float(length)
        self.eps, self.omega, self.phase = float(amplitude), float(omega), float(phase)

    def a(self, t):
        return self.eps * np.sin(self.omega * t + self.phase)

    def adot(self, t):
        return self.eps * self.omega * np.cos(self.omega * t + self.phase)

    def forward(self, x, t=0.0):
        y = np.array(x, copy=True)
        y[0] = x[0] + self.a(t) * np.sin(self.k * x[1])
        return y

    def inverse(self, y, t=0.0):
        x = np.array(y, dtype=float, copy=True)
        x[0] = y[0] - self.a(t) * np.sin(self.k * y[1])
        return x

    def jacobian(self, x, t=0.0):
        jac = IdentityMap(self.dim).jacobian(x)
        jac[0, 1] = self.a(t) * self.k * np.cos(self.k * np.asarray(x)[1])
        return jac

    def velocity(self, x, t=0.0):
        v = np.zeros(np.shape(x))
        v[0] = self.adot(t) * np.sin(self.k * np.asarray(x)[1])
        return v

    def det_jacobian(self, x, t=0.0):
        return np.ones(np.shape(x)[1:])


class LinearMap(SpatialMap):
    """``h_t(x) = (A0 + t A1) x``; not periodic, for local test patches only."""

    name = "linear"
    periodic = False

    def __init__(self, A0, A1=None):
        self.A0 = np.asarray(A0, dtype=float)
        self.dim = self.A0.shape[0]
        self.A1 = np.zeros_like(self.A0) if A1 is None else np.asarray(A1, dtype=float)

    def matrix(self, t):
        return self.A0 + t * self.A1

    def forward(self, x, t=0.0):
        return np.einsum("ca,a...->c...", self.matrix(t), x)

    def inverse(self, y, t=0.0):
        return np.einsum("ca,a...->c...", np.linalg.inv(self.matrix(t)), y)

    def jacobian(self, x, t=0.0):
        x = np.asarray(x)
        A = self.matrix(t).reshape((self.dim, self.dim) + (1,) * (x.ndim - 1))
        return np.broadcast_to(A, (self.dim,) + x.shape).copy()

    def velocity(self, x, t=0.0):
        return np.einsum("ca,a...->c...", self.A1, x)


class SmoothPeriodicMap(SpatialMap):
    """``h_t(x) = x + sum_j (a_j + b_j t) e_j sin(k_j . x + phi_j)``.

    A sum of sine displacements with integer wave numbers on the torus of
    side lengths ``extent``.  The inverse is computed by Newton iteration.
    """

    name = "smooth"

    def __init__(self, extent, amplitudes, rates, directions, modes, phases):
        self.extent = np.atleast_1d(np.asarray(extent, dtype=float))
        self.dim = self.extent.size
        self.a = np.asarray(amplitudes, dtype=float)
        self.b = np.asarray(rates, dtype=float)
        self.e = np.asarray(directions, dtype=float)          # (J, D)
        self.kvec = 2 * np.pi * np.asarray(modes, dtype=float) / self.extent  # (J, D)
        self.phi = np.asarray(phases, dtype=float)

    @classmethod
    def random(cls, extent, n_modes: int = 3, strength: float = 0.3, seed: int = 0,
               max_mode: int = 2, t_max: float = 1.0):
        """Random map with ``sum_j |a_j(t)| |k_j| <= strength`` for ``0 <= t <= t_max``."""
        rng = np.random.default_rng(seed)
        extent = np.atleast_1d(np.asarray(extent, dtype=float))
        D = extent.size
        modes = rng.integers(-max_mode, max_mode + 1, size=(n_modes, D))
        modes[np.all(modes == 0, axis=1), 0] = 1
        dirs = rng.normal(size=(n_modes, D))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        kn = np.linalg.norm(2 * np.pi * modes / extent, axis=1)
        budget = strength / (n_modes * kn)
        a = budget * rng.uniform(0.2, 0.6, n_modes) * rng.choice([-1, 1], n_modes)
        b = budget * rng.uniform(0.1, 0.4, n_modes) / max(t_max, 1e-300) * rng.choice([-1, 1], n_modes)
        phases = rng.uniform(0, 2 * np.pi, n_modes)
        return cls(extent, a, b, dirs, modes, phases)

    def _phase(self, x):
        return np.tensordot(self.kvec, x, axes=(1, 0)) + _col(self.phi, np.ndim(x))

    def _amp(self, t):
        return self.a + self.b * t

    def forward(self, x, t=0.0):
        s = np.sin(self._phase(x))
        amp = _col(self._amp(t), np.ndim(x))
        return x + np.tensordot(self.e.T, amp * s, axes=(1, 0))

    def jacobian(self, x, t=0.0):
        c = np.cos(self._phase(x)) * _col(self._amp(t), np.ndim(x))  # (J, ...)
        jac = IdentityMap(self.dim).jacobian(np.real(x)).astype(np.result_type(x, float))
        return jac + np.einsum("jc,ja,j...->ca...", self.e, self.kvec, c)

    def velocity(self, x, t=0.0):
        s = np.sin(self._phase(x))
        return np.tensordot(self.e.T, _col(self.b, np.ndim(x)) * s, axes=(1, 0))

    def inverse(self, y, t=0.0, tol: float = 1e-15, maxiter: int = 50):
        y = np.asarray(y, dtype=float)
        x = y.copy()
        for _ in range(maxiter):
            r = self.forward(x, t) - y
            dx = _solve(self.jacobian(x, t), r)
            x = x - dx
            if np.max(np.abs(dx)) <= tol * max(1.0, float(np.max(np.abs(y)))):
                break
        return x


MAP_CATALOG = ("identity", "translation", "shear", "linear", "smooth")


def builtin_map(name: str, dim: int, extent=None, **params) -> SpatialMap:
    extent = np.ones(dim) if extent is None else np.atleast_1d(np.asarray(extent, dtype=float))
    if name == "identity":
        return IdentityMap(dim)
    if name == "translation":
        v = np.zeros(dim)
        vel = np.atleast_1d(params.get("velocity", 0.1 * np.arange(1, dim + 1)))
        v[: min(dim, vel.size)] = vel[:dim]
        return TranslationMap(v)
    if name == "shear":
        return ShearMap(dim, length=float(extent[1 if dim > 1 else 0]), **params)
    if name == "linear":
        A0 = np.asarray(params.get("A0", np.eye(dim) + 0.1 * np.triu(np.ones((dim, dim)), 1)))
        A1 = np.asarray(params.get("A1", 0.05 * np.eye(dim) - 0.02 * np.tril(np.ones((dim, dim)), -1)))
        return LinearMap(A0, A1)
    if name == "smooth":
        return SmoothPeriodicMap.random(extent, **params)
    raise KinematicsError(f"unknown map {name!r}; expected one of {MAP_CATALOG}")


# -- transport of tensors -----------------------------------------------------

def pushforward_vector(hmap: SpatialMap, v, y, t=0.0):
    """``(h_* v)(y) = jac(x) v(x)`` with ``x = h^-1(y)``; ``v`` is a callable on labels."""
    x = hmap.inverse(y, t)
    jac = hmap.jacobian(x, t)
    if np.any(np.abs(_det(jac)) == 0):
        raise KinematicsError("singular Jacobian")
    return np.einsum("ca...,a...->c...", jac, v(x))


def pullback_oneform(hmap: SpatialMap, w, x, t=0.0):
    """``(h^* w)_a(x) = w_c(h(x)) jac[c, a](x)``."""
    jac = hmap.jacobian(x, t)
    if np.any(np.abs(_det(jac)) == 0):
        raise KinematicsError("singular Jacobian")
    return np.einsum("c...,ca...->a...", w(hmap.forward(x, t)), jac)


def pullback_density(hmap: SpatialMap, d, x, t=0.0):
    """``(h^* d)(x) = det(jac)(x) d(h(x))`` for a scalar density coefficient."""
    det = hmap.det_jacobian(x, t)
    if np.any(det == 0):
        raise KinematicsError("singular Jacobian")
    return det * d(hmap.forward(x, t))


def pairing(w, v):
    return np.einsum("a...,a...->...", w, v)


# -- number density current ----------------------------------------------------

def _label_density(n0_tilde, x):
    vals = n0_tilde(x) if callable(n0_tilde) else np.broadcast_to(n0_tilde, np.shape(x)[1:])
    vals = np.asarray(vals, dtype=float)
    if np.any(~(vals > 0)):
        raise KinematicsError("reference label density must be positive")
    return vals


def number_current_from_map(hmap: SpatialMap, n0_tilde, bg, y, t=0.0):
    """Closed-form ``(J0, J^a)`` at Eulerian points ``y``.

    ``J0(h(x)) = n0(x) / (det jac(x) * alpha sqrt(gamma)(h(x)))`` and
    ``J^a = J0 (hdot h^-1)^a``.  The label density and the Jacobian are
    evaluated at the label ``x = h^-1(y)``; the volume element at ``y``.
    """
    y = np.asarray(y, dtype=float)
    x = hmap.inverse(y, t)
    det = hmap.det_jacobian(x, t)
    if np.any(det == 0):
        raise KinematicsError("singular Jacobian")
    fields = bg.evaluate(y, t)
    J0 = _label_density(n0_tilde, x) / (det * fields.alpha * fields.sqrt_gamma)
    return J0, J0 * hmap.velocity(x, t)


def spacetime_pushforward(hmap: SpatialMap, x, t=0.0):
    """Matrix ``P[mu, nu] = d Psi^mu / d X^nu`` of ``Psi(t, x) = (t, h_t(x))``.

    Index 0 is time.  Computed by complex-step differentiation of the forward
    map alone, so it is independent of the analytic Jacobian and velocity.
    """
    x = np.asarray(x, dtype=float)
    D = hmap.dim
    h = _COMPLEX_STEP
    P = np.zeros((D + 1, D + 1) + x.shape[1:])
    P[0, 0] = 1.0
    P[1:, 0] = np.imag(hmap.forward(x.astype(complex), t + 1j * h)) / h
    for b in range(D):
        xc = x.astype(complex)
        xc[b] = xc[b] + 1j * h
        P[1:, b + 1] = np.imag(hmap.forward(xc, t)) / h
    return P


def four_form_oracle(hmap: SpatialMap, n0_tilde, bg, y, t=0.0):
    """``(J0, J^a)`` at ``y`` from the defining 4-form relation, brute force.

    For every choice of ``D`` label basis vectors ``(V_1..V_D)`` out of
    ``{d_t, d_1, .., d_D}`` imposes

        n0 det(pi_* V_1, .., pi_* V_D) = alpha sqrt(gamma) det(J, Psi_* V_1, .., Psi_* V_D)

    and solves the resulting ``(D+1) x (D+1)`` linear system for ``J``.
    """
    y = np.asarray(y, dtype=float)
    D = hmap.dim
    x = hmap.inverse(y, t)
    P = np.moveaxis(np.moveaxis(spacetime_pushforward(hmap, x, t), 0, -1), 0, -1)  # (..., D+1, D+1)
    Pi = np.zeros((D, D + 1))
    Pi[:, 1:] = np.eye(D)
    fields = bg.evaluate(y, t)
    eps = (fields.alpha * fields.sqrt_gamma)[..., None]
    n0 = _label_density(n0_tilde, x)
    pts = P.shape[:-2]
    A = np.zeros(pts + (D + 1, D + 1))
    b = np.zeros(pts + (D + 1,))
    for row, S in enumerate(itertools.combinations(range(D + 1), D)):
        S = list(S)
        b[..., row] = n0 * np.linalg.det(Pi[:, S])
        for mu in range(D + 1):
            M = np.zeros(pts + (D + 1, D + 1))
            M[..., mu, 0] = 1.0
            M[..., :, 1:] = P[..., :, S]
            A[..., row, mu] = np.linalg.det(M)
        A[..., row, :] *= eps
    cond = np.abs(np.linalg.det(A))
    if np.any(cond == 0):
        raise KinematicsError("degenerate basis system")
    J = np.linalg.solve(A, b[..., None])[..., 0]
    J = np.moveaxis(J, -1, 0)
    return J[0], J[1:]


def appendix_a_residuals(hmap: SpatialMap, x, t=0.0, rho0: float = 1.0) -> dict:
    """Max residuals of the gauge-fixed pull-back identities at labels ``x``.

    Basis evaluations of ``Psi^* dt = dt``,
    ``Psi^* dx^a = (hdot h^-1)^a dt + (Psi_* d_b)^a dx^b`` and
    ``Psi^*(rho0 d^{D+1}x) = det(jac) rho0 d^{D+1}x``.
    """
    x = np.asarray(x, dtype=float)
    P = spacetime_pushforward(hmap, x, t)
    jac = hmap.jacobian(x, t)
    u_img = hmap.eulerian_velocity(hmap.forward(x, t), t)
    vol_lhs = rho0 * np.linalg.det(np.moveaxis(np.moveaxis(P, 0, -1), 0, -1))
    vol_rhs = hmap.det_jacobian(x, t) * rho0
    return {
        "dt(d_t)": float(np.max(np.abs(P[0, 0] - 1.0))),
        "dt(d_b)": float(np.max(np.abs(P[0, 1:]))),
        "dx(d_t)": float(np.max(np.abs(P[1:, 0] - u_img))),
        "dx(d_b)": float(np.max(np.abs(P[1:, 1:] - jac))),
        "volume": float(np.max(np.abs(vol_lhs - vol_rhs))),
    }
