"""Reduced fluid Lagrangian and its closed-form variational derivatives.

All quantities are pointwise in the Eulerian fields ``u`` (coordinate
velocity) and ``J0`` (number-density coefficient of ``d^D x``) on a sampled
background.  The kernels take the *total* velocity ``v = beta + u`` so the
moving-frame code can reuse them with ``beta + o + u_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BackgroundFields, covariant_divergence, lower
from .grid import Grid


class SubluminalError(FloatingPointError):
    """The velocity violates ``alpha^2 - |beta + u|^2 > 0`` somewhere."""


@dataclass
class EulerianFluid:
    u: np.ndarray
    J0: np.ndarray

    def copy(self) -> "EulerianFluid":
        return EulerianFluid(self.u.copy(), self.J0.copy())


# -- kernels on the total velocity -----------------------------------------

def lorentz_radicand(v, alpha, gamma):
    """``alpha^2 - gamma_ab v^a v^b``."""
    return alpha * alpha - np.einsum("a...,a...->...", v, lower(v, gamma))


def density_from_total_velocity(v, J, alpha, gamma):
    w2 = lorentz_radicand(v, alpha, gamma)
    if np.any(~(w2 > 0)):
        idx = np.unravel_index(np.argmin(np.where(np.isnan(w2), -np.inf, w2)), np.shape(w2))
        raise SubluminalError(
            f"subluminal bound violated at index {tuple(int(i) for i in idx)}: "
            f"alpha^2 - |beta+u|^2 = {float(np.asarray(w2)[idx]):.6g}")
    return J * np.sqrt(w2)


def momentum_kernel(v, J, n, vol, gamma, eos):
    """``vol rho'(n) J^2 / n gamma_ab v^b``."""
    return (vol * eos.drho_dn(n) * J * J / n) * lower(v, gamma)


def kelvin_kernel(v, J, n, vol, gamma, eos):
    """Circulation one-form ``vol rho'(n) J / n gamma_ab v^b`` (momentum over J)."""
    return (vol * eos.drho_dn(n) * J / n) * lower(v, gamma)


def dl_dJ_kernel(J, n, vol, eos):
    return -vol * eos.drho_dn(n) * n / J


# -- public operations ------------------------------------------------------

def number_density(fluid: EulerianFluid, bg: BackgroundFields) -> np.ndarray:
    """``n = J0 sqrt(alpha^2 - gamma_ab (beta+u)^a (beta+u)^b)``."""
    return density_from_total_velocity(bg.beta + fluid.u, fluid.J0, bg.alpha, bg.gamma)


def lagrangian_density(fluid: EulerianFluid, bg: BackgroundFields, eos) -> np.ndarray:
    """Integrand of ``l = -int alpha sqrt(gamma) rho(n) d^D x``."""
    n = number_density(fluid, bg)
    return -bg.alpha * bg.sqrt_gamma * eos.rho(n)


def reduced_lagrangian(grid: Grid, fluid: EulerianFluid, bg: BackgroundFields, eos) -> float:
    """Discrete reduced Lagrangian, summed with ``math.fsum`` (correctly rounded)."""
    dens = lagrangian_density(fluid, bg, eos)
    return math.fsum(dens.ravel()) * grid.cell_volume


def dl_du(fluid: EulerianFluid, bg: BackgroundFields, eos) -> np.ndarray:
    """Momentum one-form density ``delta l / delta u^a``."""
    v = bg.beta + fluid.u
    n = density_from_total_velocity(v, fluid.J0, bg.alpha, bg.gamma)
    return momentum_kernel(v, fluid.J0, n, bg.alpha * bg.sqrt_gamma, bg.gamma, eos)


def dl_dJ0(fluid: EulerianFluid, bg: BackgroundFields, eos, form: str = "drho") -> np.ndarray:
    """``delta l / delta J0`` at fixed (alpha, gamma).

    ``form="drho"`` evaluates ``-alpha sqrt(gamma) rho'(n) n / J0``;
    ``form="enthalpy"`` evaluates ``-alpha sqrt(gamma) (p + rho) / J0``.
    """
    if np.any(~(fluid.J0 > 0)):
        raise ValueError("dl_dJ0 needs J0 > 0 everywhere")
    n = number_density(fluid, bg)
    vol = bg.alpha * bg.sqrt_gamma
    if form == "drho":
        return dl_dJ_kernel(fluid.J0, n, vol, eos)
    if form == "enthalpy":
        return -vol * (eos.pressure(n) + eos.rho(n)) / fluid.J0
    raise ValueError(f"unknown form {form!r}")


def stress_energy(fluid: EulerianFluid, bg: BackgroundFields, eos) -> np.ndarray:
    """``T^ab = p gamma^ab + (J0^2 / n) rho'(n) (beta+u)^a (beta+u)^b``."""
    v = bg.beta + fluid.u
    n = density_from_total_velocity(v, fluid.J0, bg.alpha, bg.gamma)
    coef = fluid.J0 ** 2 / n * eos.drho_dn(n)
    return eos.pressure(n) * bg.gamma_inv + coef * np.einsum("a...,b...->ab...", v, v)


def matter_source_terms(fluid: EulerianFluid, bg: BackgroundFields, eos):
    """``(delta rho / delta alpha, delta rho / delta beta^a)``.

    The lapse derivative accounts for ``J0 ~ 1 / alpha`` (the label density
    is held fixed); the shift derivative holds ``J0`` fixed.
    """
    v = bg.beta + fluid.u
    n = density_from_total_velocity(v, fluid.J0, bg.alpha, bg.gamma)
    drho = eos.drho_dn(n)
    J2n = fluid.J0 ** 2 / n
    d_alpha = drho * (J2n * bg.alpha - n / bg.alpha)
    d_beta = -(drho * J2n) * lower(v, bg.gamma)
    return d_alpha, d_beta


def constraint_residuals(grid: Grid, fluid: EulerianFluid, bg: BackgroundFields, eos):
    """LHS minus RHS of the Hamiltonian and momentum constraints.

    Hamiltonian: ``K_ab K^ab - K^2 + R - (rho + alpha d rho/d alpha)``.
    Momentum: ``-2 gamma_ac D_b (K^cb - gamma^cb K) - alpha d rho/d beta^a``;
    the divergence (an upper-index vector) is lowered with gamma before the
    comparison.
    """
    if bg.K is None or bg.R is None:
        raise ValueError("constraint residuals need the extrinsic curvature and Ricci scalar")
    n = number_density(fluid, bg)
    d_alpha, d_beta = matter_source_terms(fluid, bg, eos)
    K_up = np.einsum("ac...,bd...,cd...->ab...", bg.gamma_inv, bg.gamma_inv, bg.K)
    trK = np.einsum("ab...,ab...->...", bg.gamma_inv, bg.K)
    KK = np.einsum("ab...,ab...->...", bg.K, K_up)
    ham = KK - trK ** 2 + bg.R - (eos.rho(n) + bg.alpha * d_alpha)
    S = K_up - bg.gamma_inv * trK
    div = covariant_divergence(grid, S, bg.gamma)
    mom = -2.0 * lower(div, bg.gamma) - bg.alpha * d_beta
    return ham, mom
