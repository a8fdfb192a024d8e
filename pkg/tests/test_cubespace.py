import numpy as np
import pytest

from cubelab import cube as cb
from cubelab.cube import Corner, CubeConfig, glue
from cubelab.cubespace import (CompletionError, UnsupportedSystem, affine_cube, conditional_sampler,
                               conditional_tricube, corner_complete, finite_cube_set,
                               glueable_pair_sample, is_cube, nrp_classes, omega, psi, sample_cube,
                               tricube_sample)
from cubelab.systems import (TorusRotation, WeylTower, cyclic_rotation, product_extension,
                             skew_torus, torus_diff)


def test_rotation_cubes(rng):
    X = TorusRotation(0.3819660112501051)
    for k in (1, 2, 3):
        for _ in range(20):
            assert is_cube(X, sample_cube(X, k, rng))
    c = sample_cube(X, 2, rng)
    vals = list(c.values)
    vals[3] = vals[3] + 0.01
    assert not is_cube(X, CubeConfig(2, tuple(vals)))


def test_orbit_cubes_of_extensions(rng):
    for X in (skew_torus(), WeylTower(2)):
        for _ in range(10):
            assert is_cube(X, sample_cube(X, 3, rng))


def test_product_fibre_is_constant(rng):
    P = product_extension()
    c = sample_cube(P, 2, rng)
    vals = list(c.values)
    x, u = vals[1]
    vals[1] = (x, u + 0.2)
    assert not is_cube(P, CubeConfig(2, tuple(vals)))


def test_cyclic_cube_set():
    X = cyclic_rotation(6, 2)
    cubes = finite_cube_set(X, 2)
    for cfg in cubes:
        assert is_cube(X, CubeConfig(2, cfg))
    # steps are multiples of gcd(2, 6) = 2
    assert not is_cube(X, CubeConfig(2, (0, 1, 0, 1)))


def test_corner_completion(rng):
    X = TorusRotation(0.2)
    c = sample_cube(X, 3, rng)
    top = corner_complete(X, Corner.of_cube(c))
    assert abs(torus_diff(top, c.values[-1])[0]) < 1e-12
    Y = cyclic_rotation(7, 1)
    c = affine_cube(Y, 2, [3, 5])
    assert corner_complete(Y, Corner.of_cube(c)) == c.values[-1]
    pts = tuple(np.array([v, 0.3 * v * v]) for v in (0.0, 0.1, 0.7, 0.2, 0.9, 0.4, 0.55))
    with pytest.raises(CompletionError):
        corner_complete(WeylTower(2), Corner(3, pts))


def test_tricube_pullbacks_are_cubes(rng):
    X = TorusRotation(0.7)
    t = tricube_sample(X, 2, rng)
    for v in range(4):
        assert is_cube(X, psi(t, v))
    assert is_cube(X, omega(t))


def test_conditional_tricube(rng):
    X = TorusRotation(0.7)
    c = sample_cube(X, 3, rng)
    t = conditional_tricube(X, c, rng)
    assert all(np.array_equal(a, b) for a, b in zip(omega(t).values, c.values))
    for v in range(8):
        assert is_cube(X, psi(t, v))


def test_glueable_pairs(rng):
    X = TorusRotation(0.41)
    for _ in range(10):
        b1, b2 = glueable_pair_sample(X, 2, rng)
        assert is_cube(X, b1) and is_cube(X, b2)
        assert is_cube(X, glue(b1, b2, dist=X.dist))


def test_conditional_sampler(rng):
    X = TorusRotation(0.41)
    s = conditional_sampler(X, 3, np.array([0.25]))
    c = s.sample(rng)
    assert c.values[0][0] == 0.25 and is_cube(X, c)
    with pytest.raises(UnsupportedSystem):
        conditional_sampler(skew_torus(), 2, None)


def test_nrp_rotation():
    rep = nrp_classes(cyclic_rotation(12, 1), 1)
    assert rep.classes == [[i] for i in range(12)] and rep.transitive
    # a rotation by 2 on Z/4 splits into cosets, and cubes never mix them
    assert len(nrp_classes(cyclic_rotation(4, 2), 1).classes) == 4
