import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cubelab.cube import CubeConfig, theta
from cubelab.groups import (Cyclic, FiniteAbelian, GroupError, HeisenbergZ, Integers, HaarCoset,
                            cube_mul, diagonal_element, edge_decompose, edge_resum,
                            group_from_json, hk_generate_finite,
                            hk_member_abelian, hk_plus_member_abelian, hk_sample, theta_value)


def test_hk_sizes():
    assert len(hk_generate_finite(Cyclic(5), 2)) == 125
    assert len(hk_generate_finite(Cyclic(3), 3)) == 81
    assert len(hk_generate_finite(Cyclic(2), 1)) == 4
    with pytest.raises(GroupError):
        hk_generate_finite(Integers(), 2)


def test_hk_membership(rng):
    G = Integers()
    for _ in range(50):
        c = hk_sample(G, 3, 12, rng)
        ok, _ = hk_member_abelian(G, c)
        assert ok
    bad = CubeConfig(2, (0, 0, 0, 1))
    assert not hk_member_abelian(G, bad)[0]
    assert hk_plus_member_abelian(G, diagonal_element(G, 4, 2))
    assert not hk_plus_member_abelian(G, CubeConfig(2, (0, 1, 0, 1)))


def test_heisenberg():
    H = HeisenbergZ()
    g, h, k = (1, 2, 3), (-1, 4, 0), (2, -3, 5)
    assert H.compose(H.compose(g, h), k) == H.compose(g, H.compose(h, k))
    assert H.compose(g, H.invert(g)) == H.identity()
    comm = H.compose(H.compose((1, 0, 0), (0, 1, 0)), H.compose(H.invert((1, 0, 0)),
                                                                 H.invert((0, 1, 0))))
    assert H.lower_central_member(comm, 2)
    assert not H.lower_central_member((1, 0, 0), 2)
    assert H.lower_central_member((0, 0, 0), 3)


def test_group_json():
    assert group_from_json({"group": "cyclic", "n": 6}).elements() == list(range(6))
    with pytest.raises(Exception):
        group_from_json({"group": "nope"})


def _ker_element(A, n, rng, m):
    vals = [int(x) for x in rng.integers(0, m, size=1 << n)]
    s = theta(vals) % m
    vals[-1] = (vals[-1] - (-1) ** n * s) % m
    return CubeConfig(n, tuple(vals))


def test_edge_decomposition(rng):
    A = Cyclic(7)
    for n in (1, 2, 3, 4):
        for _ in range(20):
            u = _ker_element(A, n, rng, 7)
            assert theta_value(A, u) == 0
            assert edge_resum(A, edge_decompose(A, u), n) == u
    with pytest.raises(GroupError):
        edge_decompose(A, CubeConfig(2, (1, 0, 0, 0)))


def test_edge_decomposition_exhaustive_z2():
    A = Cyclic(2)
    for n in (1, 2, 3):
        for vals in itertools.product(range(2), repeat=1 << n):
            u = CubeConfig(n, vals)
            if theta_value(A, u) == 0:
                assert edge_resum(A, edge_decompose(A, u), n) == u


def test_haar_coset():
    A = FiniteAbelian((4, 6))
    m = HaarCoset(A, [(2, 0)], (1, 1))
    assert m.support == [(1, 1), (3, 1)]
    assert m.prob((3, 1)) == Fraction(1, 2) and m.prob((0, 0)) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_hk_closed_under_product(seed):
    rng = np.random.default_rng(seed)
    G = Cyclic(6)
    a, b = hk_sample(G, 2, 6, rng), hk_sample(G, 2, 6, rng)
    assert hk_member_abelian(G, cube_mul(G, a, b))[0]
