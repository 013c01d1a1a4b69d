import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epadm.diagnostics import (
    DiagnosticsError,
    DiagnosticsWriter,
    MaterialLoop,
    advect_loop,
    circulation,
    circulation_scale,
    conserved_report,
    convergence_orders,
    line_integral,
    read_diagnostics,
    relative_drift,
)
from epadm.dynamics import InertialModel
from epadm.eos import Eos
from epadm.geometry import builtin_background
from epadm.grid import Grid
from epadm.scenarios import make_scenario

EXT = (1.0, 1.0)


def loop(n=64, r=0.2):
    return MaterialLoop.circle((0.5, 0.5), r, n, EXT, name="c")


def test_loop_construction_and_errors():
    lp = loop()
    assert lp.n == 64 and lp.length() == pytest.approx(2 * np.pi * 0.2, rel=1e-3)
    with pytest.raises(DiagnosticsError):
        MaterialLoop.circle((0.5, 0.5), 0.2, 8, EXT)
    with pytest.raises(DiagnosticsError):
        MaterialLoop.circle((0.5,), 0.2, 32, (1.0,))
    with pytest.raises(DiagnosticsError):
        MaterialLoop(np.zeros((3, 20)), EXT)
    w = MaterialLoop.winding_line(EXT, 32, axis=1, offset=(0.3, 0.0))
    assert np.array_equal(w.winding, [0, 1]) and w.length() == pytest.approx(1.0)


def test_advect_zero_and_uniform():
    lp = loop()
    same = advect_loop(lp, lambda X, t=0.0: np.zeros_like(X), 0.1)
    assert np.array_equal(same.markers, lp.markers)
    c = np.array([[0.3], [-0.2]])
    moved = advect_loop(lp, lambda X, t=0.0: np.broadcast_to(c, X.shape), 0.1)
    assert np.allclose(moved.markers, lp.markers + 0.1 * c, atol=1e-15)


def test_advect_solid_body_period_converges():
    def rot(X, t=0.0):
        return 2 * np.pi * np.stack([-(X[1] - 0.5), X[0] - 0.5])

    errs = []
    for steps in (20, 40, 80):
        lp = loop(32)
        for i in range(steps):
            lp = advect_loop(lp, rot, 1.0 / steps)
        errs.append(np.max(np.abs(lp.markers - loop(32).markers)))
    assert np.all(convergence_orders(errs) > 3.8)


def test_remarking_preserves_curve():
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    # cluster the markers, then remark uniformly in arclength
    s = th + 0.4 * np.sin(th)
    X = np.stack([0.5 + 0.2 * np.cos(s), 0.5 + 0.2 * np.sin(s)])
    lp = MaterialLoop(X, EXT)
    re = lp.remarked(128)
    r = np.hypot(re.markers[0] - 0.5, re.markers[1] - 0.5)
    assert np.max(np.abs(r - 0.2)) < 1e-5
    assert np.ptp(re.spacings()) < 0.05 * np.mean(re.spacings())
    w = MaterialLoop.winding_line(EXT, 32)
    assert np.allclose(w.remarked(40).segments()[0].sum(), 1.0)


def test_line_integral_exact_forms():
    lp = loop(256)

    def df(x):
        return np.stack([2 * np.pi * np.cos(2 * np.pi * x[0]), -2 * np.pi * np.sin(2 * np.pi * x[1])])

    assert abs(line_integral(df, lp)) < 1e-12
    const = lambda x: np.broadcast_to(np.array([[1.0], [0.0]]), x.shape)
    w = MaterialLoop.winding_line(EXT, 32)
    assert line_integral(const, w) == pytest.approx(1.0, abs=1e-14)


def test_line_integral_circulation_of_rotation():
    lp = loop(256, 0.25)
    rot = lambda x: np.stack([-(x[1] - 0.5), x[0] - 0.5])
    # the polygon inscribed in the circle has area (n/2) r^2 sin(2 pi / n)
    n, r = 256, 0.25
    assert line_integral(rot, lp) == pytest.approx(n * r * r * np.sin(2 * np.pi / n), rel=1e-13)
    assert line_integral(rot, lp, absolute=True) == pytest.approx(2 * np.pi * r * r, rel=1e-4)
    with pytest.raises(DiagnosticsError):
        line_integral(np.zeros((2, 4, 4)), lp)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.4), st.floats(0, 1), st.floats(0, 1))
def test_gradient_circulation_vanishes(r, cx, cy):
    lp = MaterialLoop.circle((cx, cy), r, 128, EXT)

    def df(x):
        return np.stack([np.cos(2 * np.pi * (x[0] + x[1])), np.cos(2 * np.pi * (x[0] + x[1]))])

    assert abs(line_integral(df, lp)) < 1e-10


def test_circulation_trivial_cases():
    sc = make_scenario("shifted_rest", points=16)
    model = sc.build_model()
    state = sc.initial_state(model)
    lp = MaterialLoop.circle((0.5, 0.5), 0.2, 64, sc.grid.extent, name="c")
    assert circulation(lp, model, state) == 0.0
    rest = make_scenario("rest_state")
    m = rest.build_model()
    s = rest.initial_state(m)
    rep = conserved_report(m, s, [lp])
    assert rep["circ_c"] == 0.0 and rep["mass"] == pytest.approx(m.grid.integrate(s.J0))
    assert rep["mom_res_L2"] == 0.0


def test_circulation_floor_violation():
    g = Grid.cube(2, 16)
    model = InertialModel(g, builtin_background("minkowski", 2), Eos("dust"), floor=0.5)
    state = model.initial_state(np.zeros((2,) + g.shape), np.full(g.shape, 0.4))
    with pytest.raises(DiagnosticsError):
        circulation(loop(), model, state)


def test_vortex_circulation_matches_high_resolution_reference():
    vals = {}
    for n in (128, 512):
        sc = make_scenario("vortex_2d", points=n)
        model = sc.build_model()
        vals[n] = circulation(sc.loops[0], model, sc.initial_state(model))
    assert abs(vals[128] - vals[512]) < 1e-6
    assert circulation_scale(sc.loops[0], model, sc.initial_state(model)) >= abs(vals[512])


def test_writer_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    with DiagnosticsWriter(path, ["a"]) as w:
        w.write({"t": 0.0, "mass": 1.0, "circ_a": 0.1, "ham_res_L2": float("nan"), "mom_res_L2": 0.0})
        w.write({"t": 0.1, "mass": 1.0 + 1e-16, "circ_a": 0.1 + 1 / 3, "ham_res_L2": 1.0, "mom_res_L2": 0.0})
    d = read_diagnostics(path)
    assert d["circ_a"][1] == 0.1 + 1 / 3 and d["mass"][1] == 1.0 + 1e-16 and np.isnan(d["ham_res_L2"][0])


def test_drift_and_orders():
    assert relative_drift([2.0, 2.1, 1.8]) == pytest.approx(0.1)
    assert relative_drift([0.0, 1e-3], scale=0.5) == pytest.approx(2e-3)
    assert relative_drift([0.0, 1e-3]) == pytest.approx(1e-3)
    assert np.allclose(convergence_orders([1.0, 0.25, 0.0625]), 2.0)
