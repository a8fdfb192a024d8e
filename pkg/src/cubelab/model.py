"""The topological model at sampled scale.

A model point (x, a) stands for the function c -> -rho(c) + a on the cubes with
c_0 = x.  Distances between model points are measured through a finite family of
test functionals c -> chi(-rho(c) + a) F(c) integrated over the cube fibre.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import cube as cb
from .cube import CubeConfig
from .cubespace import conditional_tricube, omega, psi, sample_cube, vertex_matrix
from .nilcycle import Nilcycle, TAU_AXIOM, _theta_A
from .systems import SkewExtension, StepFunction, e, frac, torus_diff, twist_from_json


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelPoint:
    x: float
    a: float

    def translate(self, b: float) -> "ModelPoint":
        return ModelPoint(self.x, float(frac(self.a + b)))

    def to_json(self):
        return {"x": self.x, "a": self.a}


def model_act(E: SkewExtension, g: int, p: ModelPoint) -> ModelPoint:
    """g(-rho_x + a) = -rho_{gx} + beta(g, x) + a."""
    xv = np.array([p.x])
    y = float(E.base.act(g, xv)[0])
    b = float(frac(p.a + float(np.atleast_1d(E.beta.eval(g, xv))[0])))
    return ModelPoint(y, b)


def difference_map(rho: Nilcycle, p1: ModelPoint, p2: ModelPoint, c0: CubeConfig,
                   c1: CubeConfig, tol: float = 1e-12) -> float:
    """(-rho_x + a1)(c0) - (-rho_x + a2)(c1) = rho(c1) - rho(c0) + a1 - a2."""
    x0 = float(np.atleast_1d(c0.values[0])[0])
    x1 = float(np.atleast_1d(c1.values[0])[0])
    for x in (p2.x, x0, x1):
        if abs(torus_diff(x, p1.x)) > tol:
            raise ModelError("model points and cubes must share the base point")
    r0 = float(np.atleast_1d(rho(c0))[0])
    r1 = float(np.atleast_1d(rho(c1))[0])
    return float(frac(r1 - r0 + p1.a - p2.a))


# -- test functionals -------------------------------------------------------------------

@dataclass(frozen=True)
class TestFamily:
    """Characters e(xi a) of the fibre group and monomials e(m . (c_0, t_1..t_m)) on cubes."""

    chars: tuple
    monomials: tuple  # integer tuples of length k + 2

    __test__ = False

    def __post_init__(self):
        if not self.chars or not self.monomials:
            raise ModelError("a test family needs characters and monomials")
        if any(int(xi) != xi for xi in self.chars):
            raise ModelError("characters of T are e(xi a) with integer xi")
        lens = {len(m) for m in self.monomials}
        if len(lens) != 1:
            raise ModelError("monomials of mixed length")

    @classmethod
    def default(cls, k: int, max_char: int = 3, degree: int = 2) -> "TestFamily":
        chars = tuple(x for x in range(-max_char, max_char + 1) if x)
        mons = tuple(m for m in itertools.product(range(-degree, degree + 1), repeat=k + 2)
                     if sum(abs(c) for c in m) <= degree)
        return cls(chars, mons)

    @property
    def k(self) -> int:
        return len(self.monomials[0]) - 2

    def check_characters(self, rng, n: int = 64) -> float:
        a, b = rng.random(n), rng.random(n)
        xi = np.array(self.chars, dtype=float)[:, None]
        return float(np.max(np.abs(e(xi * (a + b)) - e(xi * a) * e(xi * b))))

    def to_json(self):
        return {"chars": list(self.chars), "n_monomials": len(self.monomials),
                "degree": max(sum(abs(c) for c in m) for m in self.monomials)}


def _fibre_points(x: float, ts: np.ndarray) -> np.ndarray:
    return frac(x + ts @ vertex_matrix(ts.shape[1]).T)


def features(rho: Nilcycle, p: ModelPoint, T: TestFamily, ts: np.ndarray) -> np.ndarray:
    """E_t chi(-rho(c) + a) F(c) for every (chi, F), with c = p.x + sum_j t_j v_j."""
    if ts.shape[1] != rho.k + 1 or T.k != rho.k:
        raise ModelError("test family, sample stream and nilcycle disagree on k")
    r = rho.eval_batch(_fibre_points(p.x, ts))
    Z = e(np.outer(p.a - r, np.array(T.chars, dtype=float)))
    M = np.array(T.monomials, dtype=float)
    F = e(p.x * M[:, 0][None, :] + ts @ M[:, 1:].T)
    return (Z.T @ F) / len(ts)


def sample_stream(k: int, n_samples: int, rng) -> np.ndarray:
    return rng.random((n_samples, k + 1))


def bundle_distance_from(f1, f2, x1: float, x2: float) -> float:
    return float(np.max(np.abs(f1 - f2)) + abs(torus_diff(x1, x2)))


def bundle_pseudometric(rho: Nilcycle, p1: ModelPoint, p2: ModelPoint, T: TestFamily,
                        n_samples: int, rng, ts: np.ndarray | None = None) -> float:
    """max_(chi, F) |phi(p1) - phi(p2)| + d_X(x1, x2) on a shared sample stream."""
    if ts is None:
        ts = sample_stream(rho.k, n_samples, rng)
    return bundle_distance_from(features(rho, p1, T, ts), features(rho, p2, T, ts), p1.x, p2.x)


def product_distance(p1: ModelPoint, p2: ModelPoint) -> float:
    return float(max(abs(torus_diff(p1.x, p2.x)), abs(torus_diff(p1.a, p2.a))))


# -- continuity probe ------------------------------------------------------------------

def _twist_of(rho: Nilcycle):
    tw = rho.meta.get("twist")
    return twist_from_json(tw) if tw else (lambda x: 0.0 * np.asarray(x, dtype=float))


def _jump_points(E: SkewExtension, rho: Nilcycle) -> list:
    """Points where the generator's fibre map or the twist jumps."""
    pts = [0.0]
    alpha = float(E.base.alpha[0])
    for h in (rho.meta.get("twist"), E.beta.meta.get("twist")):
        if h:
            for d in twist_from_json(h).discontinuities():
                pts += [d, float(frac(d - alpha))]
    return sorted(set(float(p) for p in pts))


@dataclass
class ProbeReport:
    delta_grid: list
    bundle: list
    product: list
    pairs: list
    seed: int | None = None

    @property
    def bundle_monotone(self) -> bool:
        # deltas are listed in decreasing order, so the modulus must not increase
        return all(b <= a for a, b in zip(self.bundle, self.bundle[1:]))

    def to_json(self):
        return {"delta_grid": self.delta_grid, "modulus": {"bundle": self.bundle,
                                                             "product": self.product},
                "pairs": self.pairs, "seed": self.seed,
                "bundle_monotone": self.bundle_monotone}


def continuity_probe(E: SkewExtension, rho: Nilcycle, T: TestFamily, n_pairs: int,
                     deltas=(0.1, 0.05, 0.02, 0.01), rng=None, *, n_samples: int = 20000,
                     g: int = 1, seed: int | None = None) -> ProbeReport:
    """Empirical modulus of continuity of p -> g p, under both metrics.

    Half of the base points are drawn next to the jumps of the twist and of the
    generator's fibre map, where a discontinuity would show.  Bundle-close pairs
    move a by the twist increment h(x') - h(x); product-close pairs do not.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    deltas = sorted((float(d) for d in deltas), reverse=True)
    ts = sample_stream(rho.k, n_samples, rng)
    h = _twist_of(rho)
    jumps = _jump_points(E, rho)
    bundle_mod, product_mod, pair_counts = [], [], []

    def hval(x):
        return float(np.atleast_1d(h(np.array([x])))[0])

    for delta in deltas:
        worst_b = worst_p = 0.0
        accepted = 0
        for i in range(n_pairs):
            if i % 2:
                x = float(frac(jumps[int(rng.integers(len(jumps)))] + (rng.random() - 0.5) * delta))
            else:
                x = float(rng.random())
            a = float(rng.random())
            p = ModelPoint(x, a)
            # product-close pair
            eps, noise = (rng.random(2) * 2 - 1) * delta * 0.999
            q = ModelPoint(float(frac(x + eps)), float(frac(a + noise)))
            worst_p = max(worst_p, product_distance(model_act(E, g, p), model_act(E, g, q)))
            # bundle-close pair: shrink the offset until the pair is delta-close
            fp = features(rho, p, T, ts)
            for scale in (1.0, 0.25, 0.0625, 0.015625):
                eps, noise = (rng.random(2) * 2 - 1) * delta * scale
                x2 = float(frac(x + eps))
                q = ModelPoint(x2, float(frac(a + hval(x2) - hval(x) + noise)))
                if bundle_distance_from(fp, features(rho, q, T, ts), p.x, q.x) < delta:
                    gp, gq = model_act(E, g, p), model_act(E, g, q)
                    d_img = bundle_pseudometric(rho, gp, gq, T, n_samples, rng, ts)
                    worst_b = max(worst_b, d_img)
                    accepted += 1
                    break
        bundle_mod.append(worst_b)
        product_mod.append(worst_p)
        pair_counts.append(accepted)
    return ProbeReport(deltas, bundle_mod, product_mod, pair_counts, seed)


# -- Q uniqueness ---------------------------------------------------------------------------

@dataclass
class QReport:
    max_dev: float
    n: int
    tol: float
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.max_dev <= self.tol

    def to_json(self):
        return {"identity": "q_uniqueness", "max_dev": self.max_dev, "n": self.n,
                "seed": self.seed, "pass": self.passed}


def solve_a0(A, rho_c, others) -> object:
    """a_0 from sum_v (-1)^|v| a_v = rho(c), given a_v for v != 0."""
    acc = rho_c
    for i, a in enumerate(others, start=1):
        acc = A.add(acc, a) if cb.weight(i) & 1 else A.sub(acc, a)
    return acc


def q_uniqueness_check(rho: Nilcycle, E: SkewExtension, n_samples: int, rng, *,
                       tol: float = TAU_AXIOM, seed: int | None = None) -> QReport:
    """Solve for a_0 twice: once from rho(c), once from a conditional tricube over c."""
    X, A, m = E.base, rho.A, rho.k + 1
    worst = 0.0
    for _ in range(n_samples):
        c = sample_cube(X, m, rng)
        others = [A.haar(rng) for _ in range((1 << m) - 1)]
        a0 = solve_a0(A, rho(c), others)
        t = conditional_tricube(X, c, rng)
        rho_t = _theta_A(A, [rho(psi(t, i)) for i in range(1 << m)])
        b0 = solve_a0(A, rho_t, others)
        worst = max(worst, A.dist(a0, b0))
        # the solved a_0 must close the Q-membership equation
        worst = max(worst, A.dist(_theta_A(A, [a0] + others), rho(c)))
    return QReport(float(worst), n_samples, tol, seed)


# -- action laws and measure preservation ---------------------------------------------------

def action_laws(E: SkewExtension, n_samples: int, rng, bound: int = 1000) -> dict:
    """Max deviations of g(h p) = (g+h) p, A-commutation and base intertwining."""
    dev = {"group_action": 0.0, "a_commutation": 0.0, "intertwining": 0.0}
    for _ in range(n_samples):
        g, h = (int(v) for v in rng.integers(-bound, bound + 1, size=2))
        p = ModelPoint(float(rng.random()), float(rng.random()))
        b = float(rng.random())
        lhs, rhs = model_act(E, g, model_act(E, h, p)), model_act(E, g + h, p)
        dev["group_action"] = max(dev["group_action"], product_distance(lhs, rhs))
        lhs, rhs = model_act(E, g, p.translate(b)), model_act(E, g, p).translate(b)
        dev["a_commutation"] = max(dev["a_commutation"], product_distance(lhs, rhs))
        base = float(E.base.act(g, np.array([p.x]))[0])
        dev["intertwining"] = max(dev["intertwining"],
                                  abs(float(torus_diff(model_act(E, g, p).x, base))))
    return dev


@dataclass
class EnergyReport:
    stat: float
    null_mean: float
    null_sd: float
    n: int
    seed: int | None = None

    @property
    def z(self) -> float:
        return (self.stat - self.null_mean) / self.null_sd

    @property
    def passed(self) -> bool:
        return self.z <= 3.0

    def to_json(self):
        return {"identity": "measure_preservation", "stat": self.stat,
                "null_mean": self.null_mean, "null_sd": self.null_sd, "z": self.z,
                "n": self.n, "seed": self.seed, "pass": self.passed}


def energy_statistic(z: np.ndarray, max_freq: int = 3, seed: int | None = None) -> EnergyReport:
    """n sum_m |m|^-2 |E e(m . z)|^2 over 0 < |m|_inf <= max_freq, for points z in T^2.

    This is the Fourier form of an energy distance to Haar measure.  Under the
    null each n |E e(m . z)|^2 is close to Exp(1), which gives the mean and sd.
    """
    z = np.asarray(z, dtype=float)
    n = len(z)
    ms = np.array([m for m in itertools.product(range(-max_freq, max_freq + 1), repeat=z.shape[1])
                   if any(m)], dtype=float)
    w = 1.0 / np.sum(ms ** 2, axis=1)
    emp = e(z @ ms.T).mean(axis=0)
    stat = float(n * np.sum(w * np.abs(emp) ** 2))
    return EnergyReport(stat, float(w.sum()), float(np.sqrt(np.sum(w ** 2))), n, seed)


def pushforward_sample(E: SkewExtension, n: int, rng, g: int = 1) -> np.ndarray:
    out = np.empty((n, 2))
    for i in range(n):
        p = model_act(E, g, ModelPoint(float(rng.random()), float(rng.random())))
        out[i] = (p.x, p.a)
    return out


def measure_preservation(E: SkewExtension, n: int, rng, g: int = 1,
                         seed: int | None = None) -> EnergyReport:
    return energy_statistic(pushforward_sample(E, n, rng, g), seed=seed)


# -- epsilon nets -----------------------------------------------------------------------

def epsilon_net(rho: Nilcycle, points, T: TestFamily, eps_grid, n_samples: int, rng):
    """Greedy eps-net sizes of sampled model points: [(eps, size)]."""
    ts = sample_stream(rho.k, n_samples, rng)
    feats = [features(rho, p, T, ts) for p in points]
    rows = []
    for eps in eps_grid:
        centres: list[int] = []
        for i, p in enumerate(points):
            if not any(bundle_distance_from(feats[i], feats[j], p.x, points[j].x) < eps
                       for j in centres):
                centres.append(i)
        rows.append((float(eps), len(centres)))
    return rows
