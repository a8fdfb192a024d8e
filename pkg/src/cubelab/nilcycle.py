"""Nilcycles over rotation bases: closed forms, extraction from skew extensions, axiom checks."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import cube as cb
from .cube import CubeConfig, CubeIsomorphism
from .cubespace import (affine_params, act_hk, cube_array, glueable_pair_sample, omega, psi,
                        sample_cube, tricube_sample)
from .groups import Group, GroupError, Integers, edge_decompose, hk_affine_sample, theta_value
from .systems import (FiniteSystem, SkewExtension, System, TorusGroup, TorusRotation, frac,
                      torus_diff)

MAX_DEGREE = 3
TAU_AXIOM = 1e-6


class NilcycleError(ValueError):
    pass


class ExtractionError(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


def _theta_A(A, vals):
    total = A.zero()
    for i, x in enumerate(vals):
        total = A.sub(total, x) if cb.weight(i) & 1 else A.add(total, x)
    return total


def _torus_theta_rows(arr: np.ndarray) -> np.ndarray:
    """theta of each row of an (n, 2^m) array, reduced to [0, 1)."""
    m = int(np.log2(arr.shape[1]))
    s = np.array(cb.signs(m), dtype=float)
    return frac(arr @ s)


@dataclass(frozen=True)
class Nilcycle:
    """rho on (k+1)-cubes of ``base`` with values in ``A``."""

    k: int
    base: System
    A: object
    evaluator: Callable
    kind: str = "closed"
    batch: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, c: CubeConfig):
        return self.eval(c)

    def eval(self, c: CubeConfig):
        if c.dim != self.k + 1:
            raise cb.DimensionError(f"degree-{self.k} nilcycle takes {self.k + 1}-cubes, got {c.dim}")
        return self.A.reduce(self.evaluator(c))

    def eval_batch(self, pts: np.ndarray) -> np.ndarray:
        """Values on an (n, 2^{k+1}) array of T^1 cube vertices, as floats in [0, 1)."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[1] != 1 << (self.k + 1):
            raise cb.DimensionError("wrong number of vertices")
        if self.batch is not None:
            return frac(self.batch(pts))
        out = np.empty(len(pts))
        for i, row in enumerate(pts):
            c = CubeConfig(self.k + 1, tuple(np.array([v]) for v in row))
            out[i] = float(np.atleast_1d(self.eval(c))[0])
        return out

    def to_json(self):
        return {"kind": self.kind, "k": self.k, **self.meta}


def _check_degree(k: int):
    if not 0 <= k <= MAX_DEGREE:
        raise cb.DimensionError(f"nilcycle degree {k} outside [0, {MAX_DEGREE}]")


def zero_nilcycle(X: System, k: int, A=None) -> Nilcycle:
    _check_degree(k)
    A = A or TorusGroup(1)
    return Nilcycle(k, X, A, lambda c: A.zero(), "zero",
                    batch=lambda pts: np.zeros(len(pts)))


def coboundary_nilcycle(X: System, h: Callable, k: int) -> Nilcycle:
    """rho(c) = sum_v (-1)^|v| h(c_v)."""
    _check_degree(k)
    A = TorusGroup(1)

    def ev(c):
        vals = np.array([float(np.atleast_1d(h(np.atleast_1d(p)))[0]) for p in c.values])
        return np.array([float(_torus_theta_rows(vals[None, :])[0])])

    def batch(pts):
        return _torus_theta_rows(np.asarray(h(pts), dtype=float))

    meta = {"twist": h.to_json()} if hasattr(h, "to_json") else {}
    return Nilcycle(k, X, A, ev, "coboundary", batch, meta)


def table_nilcycle(X: FiniteSystem, k: int, table: dict, A) -> Nilcycle:
    """rho given as a lookup over the finite cube set."""
    _check_degree(k)

    def ev(c):
        key = tuple(int(v) for v in c.values)
        if key not in table:
            raise NilcycleError(f"no table entry for cube {key}")
        return table[key]

    return Nilcycle(k, X, A, ev, "table")


def perturbed_nilcycle(rho: Nilcycle, eps: float = 0.05) -> Nilcycle:
    """rho(c) + eps * c_0: breaks glueing, used as a mutation."""
    def ev(c):
        return rho.A.add(rho.eval(c), np.array([eps * float(np.atleast_1d(c.values[0])[0])]))

    def batch(pts):
        return rho.eval_batch(pts) + eps * pts[:, 0]

    return Nilcycle(rho.k, rho.base, rho.A, ev, rho.kind + "+perturbed", batch, dict(rho.meta))


def nilcycle_for(E: SkewExtension, k: int) -> Nilcycle:
    """The closed-form nilcycle of one of the standard extensions."""
    name = E.beta.name
    if name in ("zero", "skew"):
        if name == "skew" and k < 2:
            raise NilcycleError("the skew torus needs k >= 2")
        return zero_nilcycle(E.base, k, E.A)
    if name.endswith("+twist"):
        from .systems import twist_from_json
        return coboundary_nilcycle(E.base, twist_from_json(E.beta.meta["twist"]), k)
    raise NilcycleError(f"no closed form for the {name!r} extension")


# -- extraction ----------------------------------------------------------------------

@lru_cache(maxsize=8)
def _orbit_table(alpha: float, reach: int):
    n = np.arange(-reach, reach + 1, dtype=np.int64)
    vals = np.mod(n.astype(np.float64) * alpha, 1.0)
    order = np.argsort(vals, kind="stable")
    return vals[order], n[order]


class LiftSampler:
    """Lifts of base cubes x + sum_j t_j v_j to orbit cubes of the extension.

    Each t_j is replaced by n_j alpha with |n_j alpha - t_j| < eta, n_j drawn at
    random from all |n| <= reach that qualify; the lifted fibre over vertex v is
    u + beta(sum_j n_j v_j, x), computed exactly.
    """

    def __init__(self, E: SkewExtension, m: int, eta: float = 2e-5, reach: int = 10 ** 6):
        if not (isinstance(E.base, TorusRotation) and E.base.d == 1):
            raise NilcycleError("extraction needs a skew extension of a rotation of T^1")
        self.E, self.m, self.eta, self.reach = E, m, eta, reach
        self.alpha = float(E.base.alpha[0])
        self.vals, self.ns = _orbit_table(self.alpha, reach)
        self.V = cb.vertices(m)

    def _candidates(self, t: float) -> np.ndarray:
        lo, hi = t - self.eta, t + self.eta
        pieces = [(max(lo, 0.0), min(hi, 1.0))]
        if lo < 0:
            pieces.append((lo + 1.0, 1.0))
        if hi > 1:
            pieces.append((0.0, hi - 1.0))
        out = [self.ns[np.searchsorted(self.vals, a):np.searchsorted(self.vals, b)]
               for a, b in pieces]
        cand = np.concatenate(out)
        if cand.size == 0:
            raise NilcycleError(f"no orbit point within {self.eta} of {t}; raise reach")
        return cand

    def lift(self, x: float, ts, rng):
        """(base vertices, fibre values) of one lifted cube."""
        ns = [int(rng.choice(self._candidates(float(t) % 1.0))) for t in ts]
        u = float(rng.random())
        beta, base = self.E.beta, self.E.base
        pts, fib = [], []
        for v in self.V:
            nv = sum(n * b for n, b in zip(ns, v))
            pts.append(float(base.act(nv, np.array([x]))[0]))
            fib.append(float(frac(u + float(np.atleast_1d(beta.eval(nv, np.array([x])))[0]))))
        return pts, fib

    def theta(self, x: float, ts, rng) -> float:
        _, fib = self.lift(x, ts, rng)
        return float(torus_diff(cb.theta(fib), 0.0))


def _cube_key(c: CubeConfig) -> bytes:
    q = np.round(cube_array(c).ravel() * 2.0 ** 40).astype(np.int64)
    return hashlib.blake2b(q.tobytes(), digest_size=8).digest()


@dataclass
class ExtractionReport:
    k: int
    n_cubes: int
    n_fiber: int
    mesh: int
    bins: list  # (cell, params, value, spread, flagged)
    max_dev: float
    max_dev_unflagged: float
    n_flagged: int
    flag_tol: float
    seed: int | None = None

    @property
    def flagged_fraction(self) -> float:
        return self.n_flagged / max(1, self.n_cubes)

    def to_json(self):
        return {"identity": "fiber_constancy", "max_dev": self.max_dev_unflagged,
                "max_dev_all": self.max_dev, "n": self.n_cubes, "n_fiber": self.n_fiber,
                "mesh": self.mesh, "flagged": self.n_flagged,
                "flagged_fraction": self.flagged_fraction, "seed": self.seed,
                "pass": self.max_dev_unflagged <= self.flag_tol}

    def csv_rows(self):
        yield ["cell", "x"] + [f"t{j + 1}" for j in range(self.k + 1)] + \
            ["rho", "spread", "flagged"]
        for cell, params, val, spread, flagged in self.bins:
            yield ["/".join(map(str, cell)), *(f"{p:.10f}" for p in params), f"{val:.12g}",
                   f"{spread:.3g}", int(flagged)]


def extract_nilcycle(E: SkewExtension, k: int, n_cubes: int, n_fiber: int, rng, *,
                     mesh: int = 256, flag_tol: float = 1e-9, max_flagged: float = 0.02,
                     eta: float = 2e-5, reach: int = 10 ** 6, seed: int | None = None):
    """rho(c) = theta of the fibre coordinates of a lift of c.

    Base cubes are drawn at random and labelled by their bin in the
    (x, t_1..t_{k+1}) grid of mesh 1/mesh; the drawn cube itself represents the bin
    (bin centres have vertex sums on the grid, which is exactly where step twists
    jump).  Each bin gets ``n_fiber`` independent lifts; a bin whose theta values
    spread more than ``flag_tol`` is flagged.
    """
    _check_degree(k)
    m = k + 1
    lifter = LiftSampler(E, m, eta, reach)
    bins = []
    worst = worst_ok = 0.0
    n_flag = 0
    for _ in range(n_cubes):
        params = rng.random(m + 1)
        cell = tuple(int(i) for i in np.floor(params * mesh))
        vals = np.array([lifter.theta(params[0], params[1:], rng) for _ in range(n_fiber)])
        dev = torus_diff(vals, vals[0])
        spread = float(dev.max() - dev.min())
        value = float(frac(vals[0] + dev.mean()))
        flagged = spread > flag_tol
        n_flag += flagged
        worst = max(worst, spread)
        if not flagged:
            worst_ok = max(worst_ok, spread)
        bins.append((cell, tuple(float(p) for p in params), value, spread, bool(flagged)))
    report = ExtractionReport(k, n_cubes, n_fiber, mesh, bins, worst, worst_ok, n_flag,
                              flag_tol, seed)
    if report.flagged_fraction > max_flagged:
        raise ExtractionError(
            f"{n_flag}/{n_cubes} bins have non-constant fibres (limit {max_flagged:.0%})", report)

    eval_seed = int(rng.integers(2 ** 63))
    A = E.A

    def ev(c):
        x, ts = affine_params(E.base, c)
        r = np.random.default_rng([eval_seed, int.from_bytes(_cube_key(c), "little")])
        return np.array([frac(lifter.theta(float(x[0]), [float(t[0]) for t in ts], r))])

    meta = {"extension": E.beta.name, "eta": eta, "reach": reach, "mesh": mesh}
    return Nilcycle(k, E.base, A, ev, "extracted", None, meta), report


# -- axiom checks ------------------------------------------------------------------------

@dataclass
class NilcycleReport:
    rows: list
    tol: float
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def dev(self, identity: str) -> float:
        for r in self.rows:
            if r["identity"] == identity:
                return r["max_dev"]
        raise KeyError(identity)

    def to_json(self):
        return {"rows": self.rows, "tol": self.tol, "seed": self.seed, "pass": self.passed}


IDENTITIES = ("cube_invariance", "glueing", "equivariance", "tricube")


def verify_nilcycle(rho: Nilcycle, E: SkewExtension, n_samples: int, rng, *,
                    tol: float = TAU_AXIOM, bound: int = 1000, seed: int | None = None,
                    identities=IDENTITIES) -> NilcycleReport:
    """Sampled max deviations for the four nilcycle identities."""
    X = E.base
    if rho.base.to_json() != X.to_json():
        raise NilcycleError("nilcycle and extension live over different bases")
    A, m = rho.A, rho.k + 1
    dist = A.dist
    devs = {name: 0.0 for name in identities}
    for _ in range(n_samples):
        if "cube_invariance" in devs:
            c = sample_cube(X, m, rng)
            s = CubeIsomorphism.random(m, rng)
            lhs = rho(cb.act_iso(c, s))
            rhs = rho(c) if s.sgn == 1 else A.neg(rho(c))
            devs["cube_invariance"] = max(devs["cube_invariance"], dist(lhs, rhs))
        if "glueing" in devs:
            b1, b2 = glueable_pair_sample(X, rho.k, rng)
            g = cb.glue(b1, b2, dist=X.dist)
            devs["glueing"] = max(devs["glueing"], dist(rho(g), A.add(rho(b1), rho(b2))))
        if "equivariance" in devs:
            c = sample_cube(X, m, rng)
            gv = hk_affine_sample(Integers(), m, bound, rng)
            moved = act_hk(X, gv, c)
            twist = _theta_A(A, [E.beta.eval(n, p) for n, p in zip(gv.values, c.values)])
            devs["equivariance"] = max(devs["equivariance"],
                                       dist(rho(moved), A.add(rho(c), twist)))
        if "tricube" in devs:
            t = tricube_sample(X, m, rng)
            lhs = _theta_A(A, [rho(psi(t, i)) for i in range(1 << m)])
            devs["tricube"] = max(devs["tricube"], dist(lhs, rho(omega(t))))
    rows = [{"identity": name, "max_dev": float(d), "n": n_samples, "seed": seed,
             "pass": bool(d <= tol)} for name, d in devs.items()]
    return NilcycleReport(rows, tol, seed)


# -- theta kernel ---------------------------------------------------------------------

@dataclass
class KernelSplit:
    theta: object
    d: CubeConfig
    edges: list  # [(g, Face)]


def kernel_project(A: Group, a: CubeConfig) -> KernelSplit:
    """a = d + u with d = theta(a) at the top vertex (sign (-1)^n) and u in ker theta."""
    if not A.is_abelian:
        raise GroupError("kernel projection needs an abelian group")
    n = a.dim
    th = theta_value(A, a)
    top = th if n % 2 == 0 else A.invert(th)
    e = A.identity()
    d = CubeConfig(n, tuple(e for _ in range((1 << n) - 1)) + (top,))
    vals = list(a.values)
    vals[-1] = A.compose(vals[-1], A.invert(top))
    u = CubeConfig(n, tuple(vals))
    return KernelSplit(th, d, edge_decompose(A, u))
