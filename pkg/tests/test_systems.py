from fractions import Fraction

import numpy as np
import pytest

from cubelab.systems import (GOLDEN, CocycleError, StepFunction, SkewExtension, TorusRotation,
                             WeylTower, binom, broken_skew_cocycle, cocycle_check,
                             coboundary_twist, cyclic_rotation, frac_mul, skew_cocycle, skew_torus,
                             system_from_json, torus_diff, twisted_skew_torus)


def test_frac_mul_exact():
    x = 0.123456789012345
    for n in (1, 7, 10 ** 9, -3 * 10 ** 11):
        exact = (Fraction(x) * n) % 1
        assert abs(frac_mul(n, x) - float(exact)) < 1e-15


def test_binom_generalised():
    assert binom(5, 2) == 10
    assert binom(-3, 2) == 6
    assert binom(0, 2) == 0 and binom(1, 2) == 0


def test_cyclic_rotation():
    X = cyclic_rotation(12, 5)
    assert X.act(3, 4) == (4 + 15) % 12
    assert X.act(-3, X.act(3, 7)) == 7


def test_weyl_closed_form_matches_iteration(rng):
    W = WeylTower(3)
    x = rng.random(3)
    it = W.step_iterate(x, 9)
    assert np.max(np.abs(torus_diff(it[-1], W.act(9, x)))) < 1e-12
    assert np.max(np.abs(torus_diff(W.act(-4, W.act(4, x)), x))) < 1e-12


def test_cocycle_identity(rng):
    base = TorusRotation(GOLDEN)
    assert cocycle_check(skew_cocycle(base), 200, rng) < 1e-12
    assert cocycle_check(broken_skew_cocycle(base), 200, rng) > 0.1
    tw = coboundary_twist(skew_cocycle(base), StepFunction())
    assert cocycle_check(tw, 200, rng) < 1e-12


def test_broken_extension_rejected():
    with pytest.raises(CocycleError):
        SkewExtension(broken_skew_cocycle(TorusRotation(GOLDEN)))


def test_skew_torus_action(rng):
    S = skew_torus()
    x, a = rng.random(), rng.random()
    y, b = S.act(5, (np.array([x]), np.array([a])))
    assert abs(torus_diff(y[0], x + 5 * GOLDEN)) < 1e-12
    assert abs(torus_diff(b[0], a + 5 * x + 10 * GOLDEN)) < 1e-12


def test_twisted_cocycle_closed_form(rng):
    T = twisted_skew_torus()
    beta = T.beta
    for _ in range(20):
        x = rng.random(1)
        n = int(rng.integers(1, 6))
        it = beta.generator(x)
        y = x
        for _ in range(n - 1):
            y = T.base.act(1, y)
            it = it + beta.generator(y)
        assert abs(torus_diff(beta.eval(n, x)[0], it[0])) < 1e-12


def test_step_function():
    h = StepFunction()
    assert h(np.array([0.25])) == 0.5 and h(np.array([0.75])) == 0.0
    assert h.discontinuities() == (0.0, 0.5)


def test_system_json():
    assert isinstance(system_from_json({"system": "rotation", "alpha": 0.3}), TorusRotation)
    with pytest.raises(ValueError):
        system_from_json({"system": "mystery"})
    with pytest.raises(CocycleError):
        system_from_json({"system": "skew_torus", "broken": True})
