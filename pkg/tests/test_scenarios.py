import math

import numpy as np
import pytest

from epadm.diagnostics import convergence_orders, relative_drift
from epadm.eos import Eos
from epadm.lagrangian import lorentz_radicand
from epadm.runner import integrate
from epadm.scenarios import SCENARIOS, ScenarioError, acoustic_dispersion, make_scenario


@pytest.mark.parametrize("name", SCENARIOS)
def test_every_scenario_builds_and_is_valid(name):
    sc = make_scenario(name, points=32)
    model = sc.build_model()
    state = sc.initial_state(model)
    assert np.all(state.J0 > 0) and np.all(np.isfinite(state.m))


def test_rest_state_defaults():
    sc = make_scenario("rest_state")
    x = sc.grid.coords()
    assert np.all(sc.u(x) == 0) and np.all(sc.J0(x) == 1) and sc.background.name == "minkowski"


def test_acoustic_is_subluminal():
    sc = make_scenario("acoustic_1d")
    x = sc.grid.coords()
    bg = sc.background.sample(sc.grid)
    assert np.all(lorentz_radicand(bg.beta + sc.u(x), bg.alpha, bg.gamma) > 0)
    assert sc.params == {}


def test_vortex_respects_cap():
    sc = make_scenario("vortex_2d", points=64)
    speed = np.linalg.norm(sc.u(sc.grid.coords()), axis=0)
    assert np.max(speed) <= 0.5
    assert np.max(speed) == pytest.approx(0.2, rel=0.02)
    with pytest.raises(ScenarioError):
        make_scenario("vortex_2d", speed=0.6)


def test_balanced_vortex_is_steady_to_truncation_error():
    """Cyclostrophic balance: the momentum tendency vanishes at the difference order."""
    tend = []
    for n in (32, 64, 128):
        sc = make_scenario("vortex_2d", points=n)
        model = sc.build_model()
        dm, _, _ = model.rhs(sc.initial_state(model))
        tend.append(np.max(np.abs(dm)))
    assert np.all(convergence_orders(tend) > 3.5), tend
    sc = make_scenario("vortex_2d", points=64, balanced=False)
    model = sc.build_model()
    dm, _, _ = model.rhs(sc.initial_state(model))
    assert np.max(np.abs(dm)) > 100 * tend[1]


def test_errors():
    with pytest.raises(ScenarioError):
        make_scenario("tornado")
    with pytest.raises(ScenarioError):
        make_scenario("rest_state", colour="blue")
    with pytest.raises(ScenarioError):
        make_scenario("vortex_2d", dim=1)
    with pytest.raises(ScenarioError):
        make_scenario("uniform_advection", velocity=1.2)


def test_acoustic_dispersion_values():
    assert acoustic_dispersion(Eos("dust"), 1.0) == 0.0
    assert acoustic_dispersion(Eos("polytrope", K=1.0, Gamma=2.0), 1.0) == pytest.approx(1.0)
    eos = Eos("linear_plus_polytrope", m=1.0, K=0.1, Gamma=5 / 3)
    assert acoustic_dispersion(eos, 1.0) == pytest.approx(0.36514837167, rel=1e-10)


def test_comoving_uniform_advection_is_a_frame():
    sc = make_scenario("uniform_advection", comoving=True, velocity=(0.2, 0.1))
    assert sc.frame is not None and np.allclose(sc.frame.map.c, [0.2, 0.1])
    ut, _ = sc.initial_fields(sc.frame)
    assert np.allclose(ut, 0.0)


def test_sheared_shift_half_turnover_convergence():
    """Shifted vortex on a shift profile of 0.05: drift at half a turnover converges at order >= 2."""
    drifts = []
    for n in (32, 64, 128):
        sc = make_scenario("shifted_rest", points=n, markers=2 * n, perturbation=0.2, shift_profile=0.05)
        model = sc.build_model()
        T = 0.5 * sc.t_end
        steps = math.ceil(T / (0.4 * sc.grid.spacing[0]))
        res = integrate(model, sc.initial_state(model), T, sc.loops, dt=T / steps, every=T / 5)
        drifts.append(relative_drift([r["circ_core"] for r in res.records]))
    assert drifts[-1] < 1e-4
    assert np.all(convergence_orders(drifts) >= 2.0), drifts
