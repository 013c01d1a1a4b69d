import numpy as np
import pytest

from epadm.oracles import Check, max_unique_speed, run_suite, smooth_random_field, suite_varderiv
from epadm.grid import Grid


def test_check_line():
    assert Check("a", 1e-12, 1e-10).passed and "PASS" in Check("a", 1e-12, 1e-10).line()
    assert not Check("b", float("nan"), 1.0).passed


def test_eos_suite_passes():
    assert all(c.passed for c in run_suite("eos"))


def test_varderiv_is_deterministic():
    a = suite_varderiv(seed=3, points=8, dim=2, configs=1, sites=2)
    b = suite_varderiv(seed=3, points=8, dim=2, configs=1, sites=2)
    assert [c.error for c in a] == [c.error for c in b]
    assert all(c.passed for c in a), [c.line() for c in a if not c.passed]


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_random_field_is_normalised():
    f = smooth_random_field(Grid.cube(2, 16), np.random.default_rng(0), (2,), amplitude=0.7)
    assert np.max(np.abs(f)) == pytest.approx(0.7)


def test_turning_point():
    assert max_unique_speed(2.0) == 1.0
    assert max_unique_speed(3.0) == pytest.approx(np.sqrt(0.5))
