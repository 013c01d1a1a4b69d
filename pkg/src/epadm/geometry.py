"""Prescribed ADM backgrounds and spatial-metric algebra.

A background is a set of analytic closures ``f(x, t)`` for the lapse,
shift and spatial metric (plus first derivatives, and optionally the
extrinsic curvature and the Ricci scalar).  Points ``x`` have shape
``(dim, ...)``.  Derivative arrays carry the derivative index first:
``d_gamma[c, a, b] = d_c gamma_ab``.

The geometry is held fixed during evolution; the optional ``t`` argument is
a hook for time-dependent analytic backgrounds and is ignored by every
bundled background.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import Grid

TWO_PI = 2.0 * np.pi


class BackgroundError(ValueError):
    pass


# -- metric algebra ---------------------------------------------------------

def _to_last(t):
    return np.moveaxis(np.moveaxis(t, 0, -1), 0, -1)


def _from_last(t):
    return np.moveaxis(np.moveaxis(t, -1, 0), -1, 0)


def leading_minors(gamma: np.ndarray) -> list[np.ndarray]:
    d = gamma.shape[0]
    return [np.linalg.det(_to_last(gamma[:k, :k])) for k in range(1, d + 1)]


def is_positive_definite(gamma: np.ndarray) -> bool:
    return all(np.all(m > 0) for m in leading_minors(np.asarray(gamma, dtype=float)))


def metric_det(gamma: np.ndarray) -> np.ndarray:
    return np.linalg.det(_to_last(np.asarray(gamma, dtype=float)))


def inverse_metric(gamma: np.ndarray) -> np.ndarray:
    """Pointwise inverse of a positive-definite metric of shape ``(D, D, ...)``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim < 2 or gamma.shape[0] != gamma.shape[1]:
        raise BackgroundError(f"metric must have shape (D, D, ...), got {gamma.shape}")
    if not is_positive_definite(gamma):
        raise BackgroundError("metric is not positive definite")
    return _from_last(np.linalg.inv(_to_last(gamma)))


def lower(v: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return np.einsum("ab...,b...->a...", gamma, v)


def raise_index(w: np.ndarray, gamma_inv: np.ndarray) -> np.ndarray:
    return np.einsum("ab...,b...->a...", gamma_inv, w)


def norm_squared(v: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``gamma_ab v^a v^b``."""
    return np.einsum("a...,a...->...", v, lower(v, gamma))


# -- sampled background -----------------------------------------------------

@dataclass
class BackgroundFields:
    """Background quantities evaluated at a set of points (grid or scattered)."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    sqrt_gamma: np.ndarray
    K: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None

    @property
    def volume_element(self) -> np.ndarray:
        return self.alpha * self.sqrt_gamma

    @classmethod
    def from_arrays(cls, alpha, beta, gamma, K=None, R=None) -> "BackgroundFields":
        alpha = np.asarray(alpha, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        if np.any(~(alpha > 0)):
            raise BackgroundError("lapse must be positive everywhere")
        gamma_inv = inverse_metric(gamma)
        return cls(alpha, np.asarray(beta, dtype=float), gamma, gamma_inv,
                   np.sqrt(metric_det(gamma)), K, R)


# -- analytic background ----------------------------------------------------

Closure = Callable[..., np.ndarray]


@dataclass
class AdmBackground:
    dim: int
    alpha: Closure
    beta: Closure
    gamma: Closure
    d_alpha: Optional[Closure] = None
    d_beta: Optional[Closure] = None
    d_gamma: Optional[Closure] = None
    extrinsic: Optional[Closure] = None
    ricci: Optional[Closure] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    time_dependent: bool = False

    def evaluate(self, x: np.ndarray, t: float = 0.0, check: bool = True) -> BackgroundFields:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dim:
            raise BackgroundError(f"points must have leading axis {self.dim}")
        alpha = np.broadcast_to(self.alpha(x, t), x.shape[1:]).astype(float)
        beta = np.broadcast_to(self.beta(x, t), x.shape).astype(float)
        gamma = np.broadcast_to(self.gamma(x, t), (self.dim,) + x.shape).astype(float)
        K = None if self.extrinsic is None else np.broadcast_to(
            self.extrinsic(x, t), (self.dim,) + x.shape).astype(float)
        R = None if self.ricci is None else np.broadcast_to(
            self.ricci(x, t), x.shape[1:]).astype(float)
        if check:
            return BackgroundFields.from_arrays(alpha, beta, gamma, K, R)
        det = metric_det(gamma)
        return BackgroundFields(alpha, beta, gamma, _from_last(np.linalg.inv(_to_last(gamma))),
                                np.sqrt(det), K, R)

    def sample(self, grid: Grid, t: float = 0.0) -> BackgroundFields:
        if grid.dim != self.dim:
            raise BackgroundError(f"background is {self.dim}D but grid is {grid.dim}D")
        return self.evaluate(grid.coords(), t)


def volume_element(bg, grid: Optional[Grid] = None, t: float = 0.0) -> np.ndarray:
    """``alpha sqrt(det gamma)`` from a sampled or analytic background."""
    if isinstance(bg, AdmBackground):
        if grid is None:
            raise BackgroundError("an analytic background needs a grid to sample on")
        bg = bg.sample(grid, t)
    return bg.alpha * bg.sqrt_gamma


# -- built-in catalogue -----------------------------------------------------

def _vec(values, dim, name):
    v = np.zeros(dim)
    vals = np.atleast_1d(np.asarray(values, dtype=float))
    if vals.size > dim and np.any(vals[dim:] != 0):
        raise BackgroundError(f"{name} has nonzero components beyond dimension {dim}")
    v[: min(dim, vals.size)] = vals[:dim]
    return v


def _wavevector(mode, extent):
    mode = _vec(mode, len(extent), "mode")
    return TWO_PI * mode / np.asarray(extent, dtype=float)


def _phase(x, k):
    return np.tensordot(k, x, axes=(0, 0))


def _eye(dim, shape):
    return np.broadcast_to(np.eye(dim).reshape((dim, dim) + (1,) * len(shape)),
                           (dim, dim) + shape)


def minkowski(dim: int) -> AdmBackground:
    return AdmBackground(
        dim,
        alpha=lambda x, t=0.0: np.ones(x.shape[1:]),
        beta=lambda x, t=0.0: np.zeros(x.shape),
        gamma=lambda x, t=0.0: _eye(dim, x.shape[1:]).copy(),
        d_alpha=lambda x, t=0.0: np.zeros(x.shape),
        d_beta=lambda x, t=0.0: np.zeros((dim,) + x.shape),
        d_gamma=lambda x, t=0.0: np.zeros((dim, dim) + x.shape),
        extrinsic=lambda x, t=0.0: np.zeros((dim,) + x.shape),
        ricci=lambda x, t=0.0: np.zeros(x.shape[1:]),
        name="minkowski",
    )


def gauge_lapse(dim: int, extent, amplitude: float = 0.1, mode=(1, 0, 0)) -> AdmBackground:
    if not abs(amplitude) < 1:
        raise BackgroundError("gauge_lapse amplitude must satisfy |A| < 1 to keep alpha > 0")
    k = _wavevector(mode, extent)
    bg = minkowski(dim)
    bg.alpha = lambda x, t=0.0: 1.0 + amplitude * np.sin(_phase(x, k))
    bg.d_alpha = lambda x, t=0.0: amplitude * np.cos(_phase(x, k)) * k.reshape((dim,) + (1,) * (x.ndim - 1))
    bg.name = "gauge_lapse"
    bg.params = {"amplitude": amplitude, "mode": tuple(mode)}
    return bg


def shift_wind(dim: int, extent, velocity=(0.3, 0.0, 0.0), profile_amplitude: float = 0.0,
               profile_axis: Optional[int] = None) -> AdmBackground:
    """Constant shift plus an optional sinusoidal profile in the first component.

    The profile ``b1 sin(2 pi x_axis / L)`` varies along ``profile_axis``
    (default: the second axis when there is one).
    """
    v0 = _vec(velocity, dim, "velocity")
    axis = (1 if dim > 1 else 0) if profile_axis is None else int(profile_axis)
    if not 0 <= axis < dim:
        raise BackgroundError(f"profile_axis {axis} out of range")
    kx = TWO_PI / float(np.atleast_1d(extent)[axis])
    if np.sqrt(np.sum(v0 ** 2)) + abs(profile_amplitude) >= 1:
        raise BackgroundError("shift_wind must keep |beta| < alpha = 1")
    bg = minkowski(dim)

    def beta(x, t=0.0):
        b = np.broadcast_to(v0.reshape((dim,) + (1,) * (x.ndim - 1)), x.shape).copy()
        b[0] = b[0] + profile_amplitude * np.sin(kx * x[axis])
        return b

    def d_beta(x, t=0.0):
        d = np.zeros((dim,) + x.shape)
        d[axis, 0] = profile_amplitude * kx * np.cos(kx * x[axis])
        return d

    bg.beta, bg.d_beta = beta, d_beta
    bg.name = "shift_wind"
    bg.params = {"velocity": tuple(v0), "profile_amplitude": profile_amplitude, "profile_axis": axis}
    return bg


def conformal(dim: int, extent, epsilon: float = 0.05, mode=(1, 0, 0)) -> AdmBackground:
    """``gamma_ab = psi^4 delta_ab`` with ``psi = 1 + eps cos(k.x)``; K = 0, R analytic."""
    if not abs(epsilon) < 1:
        raise BackgroundError("conformal epsilon must satisfy |eps| < 1")
    k = _wavevector(mode, extent)
    k2 = float(k @ k)
    bg = minkowski(dim)

    def kcol(x):
        return k.reshape((dim,) + (1,) * (x.ndim - 1))

    def psi(x):
        return 1.0 + epsilon * np.cos(_phase(x, k))

    def gamma(x, t=0.0):
        return psi(x) ** 4 * _eye(dim, x.shape[1:])

    def d_gamma(x, t=0.0):
        dpsi = -epsilon * np.sin(_phase(x, k)) * kcol(x)
        return (4 * psi(x) ** 3 * dpsi)[:, None, None] * _eye(dim, x.shape[1:])[None]

    def ricci(x, t=0.0):
        # gamma = exp(2 phi) delta with phi = 2 ln psi
        p = psi(x)
        s = np.sin(_phase(x, k))
        c = np.cos(_phase(x, k))
        grad_psi_sq = epsilon ** 2 * s ** 2 * k2
        lap_psi = -epsilon * c * k2
        grad_phi_sq = 4 * grad_psi_sq / p ** 2
        lap_phi = 2 * lap_psi / p - 2 * grad_psi_sq / p ** 2
        return -(2 * (dim - 1) * lap_phi + (dim - 2) * (dim - 1) * grad_phi_sq) / p ** 4

    bg.gamma, bg.d_gamma, bg.ricci = gamma, d_gamma, ricci
    bg.name = "conformal"
    bg.params = {"epsilon": epsilon, "mode": tuple(mode)}
    return bg


BUILTIN_BACKGROUNDS = ("minkowski", "gauge_lapse", "shift_wind", "conformal")


def builtin_background(name: str, dim: int, extent=None, **params) -> AdmBackground:
    extent = (1.0,) * dim if extent is None else tuple(np.atleast_1d(extent).astype(float))
    if name == "minkowski":
        if params:
            raise BackgroundError(f"minkowski takes no parameters, got {sorted(params)}")
        return minkowski(dim)
    if name == "gauge_lapse":
        return gauge_lapse(dim, extent, **params)
    if name == "shift_wind":
        return shift_wind(dim, extent, **params)
    if name == "conformal":
        return conformal(dim, extent, **params)
    raise BackgroundError(f"unknown background {name!r}; expected one of {BUILTIN_BACKGROUNDS}")


def sampled_background(grid: Grid, alpha, beta, gamma, K=None, R=None, name="sampled") -> AdmBackground:
    """Background from grid samples; off-grid values come from interpolation."""
    fields = BackgroundFields.from_arrays(alpha, beta, gamma, K, R)

    def closure(arr):
        def f(x, t=0.0):
            x = np.asarray(x, dtype=float)
            vals = grid.interpolate(arr, x.reshape(grid.dim, -1))
            return vals.reshape(arr.shape[: arr.ndim - grid.dim] + x.shape[1:])
        return f

    return AdmBackground(
        grid.dim,
        alpha=closure(fields.alpha), beta=closure(fields.beta), gamma=closure(fields.gamma),
        d_alpha=closure(grid.gradient(fields.alpha)),
        d_beta=closure(grid.gradient(fields.beta)),
        d_gamma=closure(grid.gradient(fields.gamma)),
        extrinsic=None if K is None else closure(np.asarray(K, dtype=float)),
        ricci=None if R is None else closure(np.asarray(R, dtype=float)),
        name=name,
    )


# -- curvature from finite differences --------------------------------------

def christoffel(grid: Grid, gamma: np.ndarray, gamma_inv: Optional[np.ndarray] = None) -> np.ndarray:
    """``Gamma^a_bc`` with shape ``(D, D, D, *grid.shape)``."""
    if gamma_inv is None:
        gamma_inv = inverse_metric(gamma)
    dg = grid.gradient(gamma)  # dg[c, a, b] = d_c gamma_ab
    # lowered symbols Gamma_dbc = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = 0.5 * (np.einsum("bdc...->dbc...", dg) + np.einsum("cdb...->dbc...", dg)
                 - np.einsum("dbc...->dbc...", dg))
    return np.einsum("ad...,dbc...->abc...", gamma_inv, low)


def ricci_scalar(grid: Grid, gamma: np.ndarray) -> np.ndarray:
    gamma_inv = inverse_metric(gamma)
    G = christoffel(grid, gamma, gamma_inv)
    dG = grid.gradient(G)  # dG[e, a, b, c] = d_e Gamma^a_bc
    ricci = (np.einsum("aabc...->bc...", dG) - np.einsum("caba...->bc...", dG)
             + np.einsum("aad...,dbc...->bc...", G, G) - np.einsum("acd...,dba...->bc...", G, G))
    return np.einsum("bc...,bc...->...", gamma_inv, ricci)


def covariant_divergence(grid: Grid, S: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``D_b S^{ab}`` for a contravariant 2-tensor field."""
    G = christoffel(grid, gamma)
    div = np.zeros(S.shape[1:])
    for b in range(grid.dim):
        div = div + grid.partial(S[:, b], b)
    return div + np.einsum("abc...,cb...->a...", G, S) + np.einsum("bbc...,ac...->a...", G, S)
