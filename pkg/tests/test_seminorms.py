import itertools

import numpy as np
import pytest

from cubelab.seminorms import (Arc, Character, NonRealAverage, QuadraticPhase, SizeCapError, Table,
                               TrigPolynomial, fourier_u2_power, gowers_naive, gowers_naive_power,
                               gowers_recursive, gowers_recursive_power, hk_integral_empirical,
                               kronecker_limit_rotation, nonconventional_average,
                               observable_from_json)
from cubelab.systems import GOLDEN, TorusRotation, cyclic_rotation


def brute_power(f, k):
    N = len(f)
    total = 0
    for x in range(N):
        for h in itertools.product(range(N), repeat=k):
            p = 1
            for v in itertools.product((0, 1), repeat=k):
                val = f[(x + sum(a * b for a, b in zip(v, h))) % N]
                p *= np.conj(val) if sum(v) % 2 else val
            total += p
    return total / N ** (k + 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_routes_match_brute_force(rng, k):
    N = 5
    f = rng.normal(size=N) + 1j * rng.normal(size=N)
    ref = brute_power(f, k)
    assert abs(gowers_naive_power(f, k) - ref) < 1e-10
    assert abs(gowers_recursive_power(f, k) - ref.real) < 1e-10


def test_sign_fast_path_is_exact(rng):
    f = rng.choice([-1.0, 1.0], size=16)
    for k in (2, 3, 4):
        a = gowers_naive_power(f, k)
        b = gowers_recursive_power(f, k)
        c = gowers_naive_power(f.astype(complex) * (1 + 1e-300j), k)
        assert abs(a - b) < 1e-12 and abs(a - c) < 1e-12


def test_u2_fourier_identity(rng):
    f = rng.normal(size=32) + 1j * rng.normal(size=32)
    assert abs(gowers_naive_power(f, 2).real - fourier_u2_power(f)) < 1e-10


def test_character_and_quadratic_phase():
    N = 64
    assert gowers_naive(Character(5, N), 1, N).value < 1e-7
    assert abs(gowers_naive(Character(5, N), 2, N).value - 1) < 1e-12
    q = QuadraticPhase(1, N)
    # N = 0 mod 4: the Gauss sum has weight 2/N on half the frequencies
    assert abs(gowers_recursive(q, 2, N).value - (2 / N) ** 0.25) < 1e-9
    assert abs(gowers_recursive(q, 3, N).value - 1) < 1e-9


def test_seminorm_monotone_in_k(rng):
    f = rng.normal(size=12)
    vals = [gowers_recursive(f, k).value for k in (1, 2, 3, 4)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_caps():
    with pytest.raises(SizeCapError):
        gowers_naive_power(np.ones(1 << 9), 3)
    with pytest.raises(SizeCapError):
        gowers_recursive_power(np.ones(1 << 14), 2)
    with pytest.raises(ValueError):
        gowers_naive_power(np.ones(4), 0)


def test_nonreal_average_rejected():
    # without vertex conjugation this product is not real; the guard must catch it
    from cubelab import seminorms as sm
    with pytest.raises(NonRealAverage):
        sm._root(complex(0.5, 0.1), 2, "naive")


def test_observables_roundtrip():
    for obs in (Character(3, 8), QuadraticPhase(2, 8), Arc(0.1, 0.6), Table([1, -1, 0, 1]),
                TrigPolynomial({1: 0.5, -2: 1j})):
        again = observable_from_json(obs.to_json(), N=8)
        xs = np.arange(4) if isinstance(obs, Table) else np.linspace(0, 0.99, 7)
        assert np.allclose(obs(xs), again(xs))
    assert np.all(Arc(0.25, 0.5)(np.array([0.2, 0.3, 0.5])) == [0, 1, 0])


def test_empirical_matches_exact_cyclic(rng):
    X = cyclic_rotation(8, 1)
    f = Table(rng.choice([-1.0, 1.0], size=8))
    exact = gowers_naive_power(f, 2, 8).real
    rep = hk_integral_empirical(X, 2, f, 200000, rng)
    assert abs(rep.estimate.real - exact) < 5 * rep.stderr + 1e-3


def test_empirical_on_rotation(rng):
    # for a rotation of T^1 the 2-cube integral of a character is 1
    X = TorusRotation(GOLDEN)
    ch = Character(3)
    rep = hk_integral_empirical(X, 2, ch, 5000, rng, conjugate_odd=True)
    assert abs(rep.estimate - 1) < 1e-9
    with pytest.raises(ValueError):
        hk_integral_empirical(X, 2, [ch] * 3, 10, rng)


def test_kronecker_limit():
    X = TorusRotation(GOLDEN)
    fs = [TrigPolynomial({2: 1.0, 1: 0.3}), TrigPolynomial({-1: 1.0, 4: 0.5})]
    lim = kronecker_limit_rotation(fs)
    assert lim.coeffs == {1: 1.0}
    x = 0.37
    (M, A), = nonconventional_average(X, x, fs, 200000)
    assert abs(A - lim(np.array([x]))[0]) < 1e-3
    none = kronecker_limit_rotation([TrigPolynomial({1: 1.0}), TrigPolynomial({1: 1.0})])
    assert none.coeffs == {}


def test_average_checkpoints():
    X = TorusRotation(GOLDEN)
    out = nonconventional_average(X, 0.1, [TrigPolynomial.constant()], 100, checkpoints=[10, 100])
    assert [m for m, _ in out] == [10, 100] and all(abs(a - 1) < 1e-12 for _, a in out)
    with pytest.raises(ValueError):
        nonconventional_average(X, 0.1, [TrigPolynomial.constant()], 10, checkpoints=[20])
