import numpy as np
import pytest

from cubelab.cubespace import sample_cube
from cubelab.model import (ModelError, ModelPoint, TestFamily, action_laws, bundle_pseudometric,
                           continuity_probe, difference_map, energy_statistic, epsilon_net,
                           features, measure_preservation, model_act, product_distance,
                           q_uniqueness_check, sample_stream)
from cubelab.nilcycle import nilcycle_for, perturbed_nilcycle
from cubelab.systems import skew_torus, torus_diff, twisted_skew_torus


def test_default_family():
    T = TestFamily.default(2)
    assert T.k == 2 and len(T.chars) == 6 and len(T.monomials) == 41
    with pytest.raises(ModelError):
        TestFamily((0.5,), ((0, 0, 0, 0),))
    with pytest.raises(ModelError):
        TestFamily((1,), ((0, 0), (0, 0, 0)))


def test_characters_are_homomorphisms(rng):
    assert TestFamily.default(2).check_characters(rng) < 1e-12


def test_model_act_and_laws(rng):
    E = twisted_skew_torus()
    p = ModelPoint(0.2, 0.7)
    q = model_act(E, 1, p)
    assert abs(torus_diff(q.x, 0.2 + E.base.alpha[0])) < 1e-12
    dev = action_laws(E, 300, rng)
    assert max(dev.values()) < 1e-12, dev


def test_difference_map(rng):
    E = twisted_skew_torus()
    rho = nilcycle_for(E, 2)
    c0 = sample_cube(E.base, 3, rng)
    x = float(c0.values[0][0])
    c1 = sample_cube(E.base, 3, rng)
    c1 = type(c1)(3, tuple(v - c1.values[0] + c0.values[0] for v in c1.values))
    d = difference_map(rho, ModelPoint(x, 0.3), ModelPoint(x, 0.1), c0, c1)
    want = float(rho(c1)[0]) - float(rho(c0)[0]) + 0.2
    assert abs(torus_diff(d, want)) < 1e-12
    with pytest.raises(ModelError):
        difference_map(rho, ModelPoint(x, 0.3), ModelPoint(x + 0.1, 0.1), c0, c1)


def test_pseudometric_basics(rng):
    E = twisted_skew_torus()
    rho = nilcycle_for(E, 2)
    T = TestFamily.default(2)
    ts = sample_stream(2, 4000, rng)
    p, q = ModelPoint(0.3, 0.1), ModelPoint(0.3, 0.6)
    assert bundle_pseudometric(rho, p, p, T, 0, rng, ts) == 0.0
    assert bundle_pseudometric(rho, p, q, T, 0, rng, ts) == pytest.approx(
        bundle_pseudometric(rho, q, p, T, 0, rng, ts))
    # for the zero nilcycle a half-turn flips the odd characters against F = 1
    zero = nilcycle_for(skew_torus(), 2)
    assert bundle_pseudometric(zero, p, q, T, 0, rng, ts) == pytest.approx(2.0)
    assert product_distance(p, q) == pytest.approx(0.5)
    with pytest.raises(ModelError):
        features(rho, p, TestFamily.default(1), ts)


def test_q_uniqueness(rng):
    E = twisted_skew_torus()
    assert q_uniqueness_check(nilcycle_for(E, 2), E, 30, rng).passed
    bad = q_uniqueness_check(perturbed_nilcycle(nilcycle_for(E, 2)), E, 30, rng)
    assert bad.max_dev > 1e-4


def test_energy_statistic(rng):
    good = energy_statistic(rng.random((20000, 2)))
    assert good.passed
    skewed = rng.random((20000, 2)) ** 2
    assert not energy_statistic(skewed).passed
    assert measure_preservation(skew_torus(), 3000, rng).passed


def test_continuity_probe_small(rng):
    E = twisted_skew_torus()
    rho = nilcycle_for(E, 2)
    rep = continuity_probe(E, rho, TestFamily.default(2), 6, (0.1, 0.02), rng, n_samples=2000)
    assert len(rep.bundle) == 2 and rep.delta_grid == [0.1, 0.02]
    assert max(rep.product) > 0.2  # the twist jumps, so product closeness is not preserved
    assert rep.to_json()["modulus"]["bundle"] == rep.bundle


def test_epsilon_net(rng):
    E = skew_torus()
    rho = nilcycle_for(E, 2)
    pts = [ModelPoint(float(x), float(a)) for x, a in rng.random((30, 2))]
    rows = epsilon_net(rho, pts, TestFamily.default(2), [3.0, 0.5, 0.1], 1000, rng)
    sizes = [s for _, s in rows]
    assert sizes[0] == 1 and sizes == sorted(sizes)
