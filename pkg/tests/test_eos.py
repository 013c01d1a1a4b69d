import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epadm.eos import Eos, EosError, ScaledEos
from epadm.frames import rho_tilde
from epadm.scenarios import acoustic_dispersion

DUST = Eos("dust", m=1.0)
POLY2 = Eos("polytrope", K=1.0, Gamma=2.0)
LPP = Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3)
ALL = [DUST, POLY2, LPP, Eos("polytrope", K=0.7, Gamma=4 / 3)]


def test_rho_examples():
    assert DUST.rho(2.0) == 2.0
    assert POLY2.rho(3.0) == pytest.approx(9.0)
    assert LPP.rho(1.0) == pytest.approx(1.15, rel=1e-14)


def test_drho_examples():
    assert np.all(DUST.drho_dn(np.array([0.1, 5.0])) == 1.0)
    assert POLY2.drho_dn(3.0) == pytest.approx(6.0)


def test_pressure_examples():
    assert np.all(DUST.pressure(np.array([0.3, 2.0])) == 0.0)
    assert POLY2.pressure(3.0) == pytest.approx(9.0)
    n = np.linspace(0.1, 3, 7)
    assert np.allclose(LPP.pressure(n), LPP.K * n ** LPP.Gamma, rtol=1e-13)


@pytest.mark.parametrize("eos", ALL)
def test_derivatives_match_finite_differences(eos):
    n = np.random.default_rng(0).uniform(0.1, 3.0, 50)
    h = 1e-5 * n
    fd1 = (eos.rho(n + h) - eos.rho(n - h)) / (2 * h)
    fd2 = (eos.drho_dn(n + h) - eos.drho_dn(n - h)) / (2 * h)
    assert np.max(np.abs(fd1 / eos.drho_dn(n) - 1)) < 1e-8
    assert np.max(np.abs(fd2 - eos.d2rho_dn2(n))) < 1e-7 * max(1.0, np.max(np.abs(eos.d2rho_dn2(n))))


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.sampled_from(ALL))
def test_thermodynamic_pressure_identity(n, eos):
    assert eos.pressure(n) == pytest.approx(n * eos.drho_dn(n) - eos.rho(n), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [0.0, -1.0, np.nan])
def test_nonpositive_density_rejected(n):
    for eos in ALL:
        with pytest.raises(EosError):
            eos.rho(n)
        with pytest.raises(EosError):
            eos.drho_dn(np.array([1.0, n]))


@pytest.mark.parametrize("kw", [dict(kind="gas"), dict(kind="polytrope", Gamma=1.0), dict(kind="dust", m=0.0),
                                dict(kind="polytrope", K=0.0), dict(kind="polytrope", K=-1.0)])
def test_bad_parameters(kw):
    with pytest.raises(EosError):
        Eos(**kw)


def test_sound_speed():
    assert acoustic_dispersion(DUST, 1.0) == 0.0
    assert POLY2.sound_speed_squared(1.0) == pytest.approx(1.0)
    # the polytrope's n rho''/rho' is Gamma - 1 at every density
    assert POLY2.sound_speed_squared(0.25) == pytest.approx(1.0)
    cs = acoustic_dispersion(LPP, 1.0)
    assert cs ** 2 == pytest.approx(LPP.K * LPP.Gamma / (LPP.m + LPP.K * LPP.Gamma / (LPP.Gamma - 1)))


def test_scaled_closure_examples():
    n = np.array([0.3, 1.0, 2.2])
    assert np.array_equal(rho_tilde(LPP, 1.0).rho(n), LPP.rho(n))
    assert np.allclose(ScaledEos(DUST, 2.0).rho(n), n)
    assert ScaledEos(POLY2, 2.0).rho(1.0) == pytest.approx(2.0)
    with pytest.raises(EosError):
        ScaledEos(POLY2, np.array([1.0, -0.5]))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.05, 4.0))
def test_scaled_closure_derivatives(s, n):
    sc = ScaledEos(LPP, s)
    h = 1e-6 * n
    assert sc.drho_dn(n) == pytest.approx((sc.rho(n + h) - sc.rho(n - h)) / (2 * h), rel=1e-7)
    assert sc.d2rho_dn2(n) == pytest.approx((sc.drho_dn(n + h) - sc.drho_dn(n - h)) / (2 * h), rel=1e-6)
    assert sc.pressure(n) == pytest.approx(LPP.pressure(s * n) / s, rel=1e-12)


def test_restrict():
    sc = ScaledEos(POLY2, np.array([1.0, 2.0, 3.0]))
    sub = sc.restrict(np.array([2]), (3,))
    assert sub.rho(np.array([1.0]))[0] == pytest.approx(3.0)
