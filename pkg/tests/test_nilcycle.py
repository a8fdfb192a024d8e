import numpy as np
import pytest

from cubelab import cube as cb
from cubelab.cube import CubeConfig
from cubelab.cubespace import sample_cube
from cubelab.groups import Cyclic, edge_resum
from cubelab.nilcycle import (ExtractionError, NilcycleError, coboundary_nilcycle, extract_nilcycle,
                              kernel_project, nilcycle_for, perturbed_nilcycle, verify_nilcycle,
                              zero_nilcycle)
from cubelab.systems import (StepFunction, TorusRotation, product_extension, skew_torus,
                             torus_diff, twisted_skew_torus)


def test_degree_and_dimension_guards(rng):
    X = TorusRotation(0.3)
    with pytest.raises(cb.DimensionError):
        zero_nilcycle(X, 4)
    rho = zero_nilcycle(X, 1)
    with pytest.raises(cb.DimensionError):
        rho(sample_cube(X, 3, rng))
    with pytest.raises(NilcycleError):
        nilcycle_for(skew_torus(), 1)


def test_coboundary_batch_matches_scalar(rng):
    X = TorusRotation(0.3)
    rho = coboundary_nilcycle(X, StepFunction(), 2)
    for _ in range(20):
        c = sample_cube(X, 3, rng)
        row = np.array([[float(v[0]) for v in c.values]])
        assert abs(torus_diff(rho.eval_batch(row)[0], float(rho(c)[0]))) < 1e-12


def test_closed_forms_satisfy_identities(rng):
    for E, k in ((twisted_skew_torus(), 2), (skew_torus(), 2), (product_extension(), 1)):
        rep = verify_nilcycle(nilcycle_for(E, k), E, 60, rng)
        assert rep.passed, rep.rows


def test_mutations_are_caught(rng):
    E = twisted_skew_torus()
    wrong_ext = verify_nilcycle(nilcycle_for(E, 2), skew_torus(), 60, rng)
    assert wrong_ext.dev("equivariance") > 0.1
    bent = verify_nilcycle(perturbed_nilcycle(nilcycle_for(E, 2)), E, 60, rng)
    assert bent.dev("glueing") > 1e-3 and not bent.passed


def test_base_mismatch(rng):
    with pytest.raises(NilcycleError):
        verify_nilcycle(zero_nilcycle(TorusRotation(0.1), 2), skew_torus(), 1, rng)


def test_extraction_skew_torus(rng):
    E = skew_torus()
    rho, rep = extract_nilcycle(E, 2, 40, 3, rng)
    assert rep.n_flagged == 0 and rep.max_dev < 1e-9
    c = sample_cube(E.base, 3, rng)
    assert abs(torus_diff(float(rho(c)[0]), 0.0)) < 1e-9
    rows = list(rep.csv_rows())
    assert rows[0][0] == "cell" and len(rows) == 41 and rep.to_json()["n"] == 40


def test_extraction_twisted_matches_closed_form(rng):
    E = twisted_skew_torus()
    rho, rep = extract_nilcycle(E, 2, 40, 3, rng)
    assert rep.flagged_fraction <= 0.02
    oracle = nilcycle_for(E, 2)
    mism = 0
    for cell, params, value, spread, flagged in rep.bins:
        if flagged:
            continue
        row = np.array([[params[0] + sum(t * b for t, b in zip(params[1:], v))
                         for v in cb.vertices(3)]]) % 1.0
        mism += abs(torus_diff(value, oracle.eval_batch(row)[0])) > 1e-6
    assert mism == 0
    # the evaluator is deterministic per cube
    c = sample_cube(E.base, 3, rng)
    assert np.array_equal(rho(c), rho(c))


def test_extraction_rejects_non_constant_fibres(rng):
    # a negative flag tolerance flags every bin, so the 2% gate must trip
    E = twisted_skew_torus()
    with pytest.raises(ExtractionError) as err:
        extract_nilcycle(E, 2, 30, 3, rng, flag_tol=-1.0)
    assert err.value.report.n_flagged == 30


def test_kernel_project_resums():
    A = Cyclic(7)
    for n in (1, 2, 3):
        vals = tuple(int(v) for v in np.random.default_rng(n).integers(0, 7, size=1 << n))
        a = CubeConfig(n, vals)
        sp = kernel_project(A, a)
        u = edge_resum(A, sp.edges, n)
        total = tuple(A.compose(x, y) for x, y in zip(sp.d.values, u.values))
        assert total == vals
