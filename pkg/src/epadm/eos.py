"""Barotropic equations of state rho(n).

Three closures are supported, each with analytic first and second
derivatives:

    dust                   rho = m n
    polytrope              rho = K n**Gamma
    linear_plus_polytrope  rho = m n + K n**Gamma / (Gamma - 1)

Pressure is always the thermodynamic one, p = n rho'(n) - rho(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("dust", "polytrope", "linear_plus_polytrope")


class EosError(ValueError):
    pass


def _check_density(n):
    n = np.asarray(n, dtype=float)
    if np.any(~(n > 0)):
        raise EosError("number density must be positive")
    return n


@dataclass(frozen=True)
class Eos:
    kind: str = "polytrope"
    m: float = 1.0
    K: float = 1.0
    Gamma: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EosError(f"unknown eos kind {self.kind!r}; expected one of {KINDS}")
        if self.m < 0 or self.K < 0:
            raise EosError("eos coefficients m and K must be non-negative")
        if self.kind != "dust" and not self.Gamma > 1:
            raise EosError("adiabatic index Gamma must exceed 1")
        if self.kind == "dust" and self.m <= 0:
            raise EosError("dust needs a positive rest-mass coefficient m")
        if self.kind == "polytrope" and self.K <= 0:
            raise EosError("polytrope needs a positive constant K")
        if self.kind == "linear_plus_polytrope" and self.m == 0 and self.K == 0:
            raise EosError("linear_plus_polytrope with m = K = 0 is degenerate")

    def rho(self, n):
        n = _check_density(n)
        if self.kind == "dust":
            return self.m * n
        if self.kind == "polytrope":
            return self.K * n ** self.Gamma
        return self.m * n + self.K * n ** self.Gamma / (self.Gamma - 1)

    def drho_dn(self, n):
        n = _check_density(n)
        if self.kind == "dust":
            return np.full_like(n, self.m)
        if self.kind == "polytrope":
            return self.K * self.Gamma * n ** (self.Gamma - 1)
        return self.m + self.K * self.Gamma / (self.Gamma - 1) * n ** (self.Gamma - 1)

    def d2rho_dn2(self, n):
        n = _check_density(n)
        if self.kind == "dust":
            return np.zeros_like(n)
        if self.kind == "polytrope":
            return self.K * self.Gamma * (self.Gamma - 1) * n ** (self.Gamma - 2)
        return self.K * self.Gamma * n ** (self.Gamma - 2)

    def pressure(self, n):
        n = _check_density(n)
        return n * self.drho_dn(n) - self.rho(n)

    def sound_speed_squared(self, n):
        """``n rho'' / rho'`` clipped to [0, 1]."""
        n = _check_density(n)
        return np.clip(n * self.d2rho_dn2(n) / self.drho_dn(n), 0.0, 1.0)


class ScaledEos:
    """Frame-rescaled closure ``rho_s(n) = rho(s n) / s`` for a Jacobian determinant ``s``.

    ``s`` may be an array broadcasting against ``n``.  Derivatives follow by
    the chain rule: ``rho_s' = rho'(s n)`` and ``rho_s'' = s rho''(s n)``.
    """

    def __init__(self, eos: Eos, scale):
        scale = np.asarray(scale, dtype=float)
        if np.any(~(scale > 0)):
            raise EosError("frame Jacobian determinant must be positive")
        self.eos = eos
        self.scale = scale

    def restrict(self, index, shape) -> "ScaledEos":
        """Closure restricted to ``np.broadcast_to(scale, shape)[index]``."""
        return ScaledEos(self.eos, np.broadcast_to(self.scale, shape)[index])

    def rho(self, n):
        return self.eos.rho(self.scale * n) / self.scale

    def drho_dn(self, n):
        return self.eos.drho_dn(self.scale * n)

    def d2rho_dn2(self, n):
        return self.scale * self.eos.d2rho_dn2(self.scale * n)

    def pressure(self, n):
        return n * self.drho_dn(n) - self.rho(n)

    def sound_speed_squared(self, n):
        return np.clip(n * self.d2rho_dn2(n) / self.drho_dn(n), 0.0, 1.0)
