"""Dynamical cubes of the concrete systems.

Closures are never represented symbolically.  Three proxies stand in:

* finite systems: the exact BFS orbit of the diagonals under HK^k(Z);
* rotations: the affine family x + sum_j t_j v_j (t_j free on the torus);
* Weyl towers and skew products: orbit cubes g.(y, ..., y) with g a random
  affine integer configuration, plus a Moebius-coefficient test for depth <= 2.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import cube as cb
from .cube import CubeConfig, CubeIsomorphism, Corner
from .groups import Integers, hk_affine_sample, hk_generators
from .systems import (CyclicRotation, FiniteSystem, SkewExtension, System, TorusRotation,
                      WeylTower, frac, torus_diff)

MAX_CUBE_DIM = 8
ORBIT_BOUND = 10 ** 6
BFS_CAP = 2_000_000


class UnsupportedSystem(TypeError):
    pass


class CompletionError(ValueError):
    pass


# -- helpers ------------------------------------------------------------------------

def vertex_matrix(k: int) -> np.ndarray:
    """(2^k, k) 0/1 matrix, rows in canonical order."""
    idx = np.arange(1 << k)
    return ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(np.int64)


def mobius(values: np.ndarray) -> np.ndarray:
    """Coefficients of the multilinear polynomial interpolating ``values``.

    values has shape (2^k, ...); coefficient S = sum_{T <= S} (-1)^{|S - T|} c_T.
    """
    a = np.array(values, dtype=float if values.dtype.kind == "f" else np.int64, copy=True)
    n = a.shape[0]
    bit = 1
    while bit < n:
        for idx in range(n):
            if idx & bit:
                a[idx] = a[idx] - a[idx ^ bit]
        bit <<= 1
    return a


def cube_array(c: CubeConfig) -> np.ndarray:
    return np.array([np.atleast_1d(np.asarray(x, dtype=float)) for x in c.values])


def _as_config(arr) -> CubeConfig:
    k = int(np.log2(len(arr)))
    return CubeConfig(k, tuple(np.array(row) for row in arr))


def _check_k(k: int) -> None:
    if not 0 <= k <= MAX_CUBE_DIM:
        raise cb.DimensionError(f"cube dimension {k} outside [0, {MAX_CUBE_DIM}]")


def _base_rotation(X):
    if isinstance(X, SkewExtension):
        return X.base
    return X


# -- finite systems: exact cube sets ------------------------------------------------------

_BFS_CACHE: dict = {}


def finite_cube_set(X: FiniteSystem, k: int) -> frozenset:
    """C^k(X) for a finite system: BFS orbit of all diagonals under HK^k(Z)."""
    key = (tuple(X.step.tolist()), k)
    if key in _BFS_CACHE:
        return _BFS_CACHE[key]
    if X.n_points ** (k + 1) > BFS_CAP * 8:
        raise cb.DimensionError("finite cube set too large for BFS")
    gens = [g.values for g in hk_generators(Integers(), k)]
    seen = set()
    queue = deque()
    for x in range(X.n_points):
        d = (x,) * (1 << k)
        seen.add(d)
        queue.append(d)
    while queue:
        cur = queue.popleft()
        for g in gens:
            nxt = tuple(X.act(n, p) for n, p in zip(g, cur))
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > BFS_CAP:
                    raise cb.DimensionError(f"BFS exceeded {BFS_CAP} cubes")
                queue.append(nxt)
    out = frozenset(seen)
    _BFS_CACHE[key] = out
    return out


# -- sampling ---------------------------------------------------------------------------

def affine_cube(X: System, x, ts) -> CubeConfig:
    """c_v = x + sum_j t_j v_j for a rotation-type system."""
    if isinstance(X, CyclicRotation):
        k = len(ts)
        return CubeConfig.from_function(
            k, lambda v: int((x + sum(int(t) * b for t, b in zip(ts, v))) % X.n_points))
    if isinstance(X, TorusRotation):
        ts = np.atleast_2d(np.asarray(ts, dtype=float)).reshape(len(ts), X.d) if len(ts) else \
            np.zeros((0, X.d))
        k = ts.shape[0]
        pts = frac(np.asarray(x, dtype=float)[None, :] + vertex_matrix(k) @ ts)
        return _as_config(pts)
    raise UnsupportedSystem(f"affine cubes need a rotation, got {type(X).__name__}")


def affine_params(X: System, c: CubeConfig):
    """(x, [t_1..t_k]) read off the vertices 0 and e_j."""
    if isinstance(X, CyclicRotation):
        x = c.values[0]
        return x, [(c.values[1 << j] - x) % X.n_points for j in range(c.dim)]
    x = np.atleast_1d(np.asarray(c.values[0], dtype=float))
    ts = [frac(np.atleast_1d(np.asarray(c.values[1 << j], dtype=float)) - x) for j in range(c.dim)]
    return x, ts


def sample_cube(X: System, k: int, rng, method: str = "auto", word_length: int = 16,
                bound: int = ORBIT_BOUND) -> CubeConfig:
    """A random element of C^k(X).

    ``affine`` (rotations only) draws t_j uniformly, i.e. the Host-Kra measure;
    ``orbit`` applies a random affine integer configuration to a diagonal point;
    ``word`` applies a random product of ``word_length`` generators.
    """
    _check_k(k)
    if method == "auto":
        method = "affine" if X.rotation_type else "orbit"
    if method == "affine":
        x = X.sample(rng)
        if isinstance(X, CyclicRotation):
            ts = [X.a * int(t) % X.n_points for t in rng.integers(0, X.n_points, size=k)]
        elif isinstance(X, TorusRotation):
            ts = rng.random((k, X.d))
        else:
            raise UnsupportedSystem("affine sampling needs a rotation")
        return affine_cube(X, x, ts)
    if method == "orbit":
        g = hk_affine_sample(Integers(), k, bound, rng)
    elif method == "word":
        from .groups import hk_sample
        g = hk_sample(Integers(), k, word_length, rng)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    y = X.sample(rng)
    return CubeConfig(k, tuple(X.act(n, y) for n in g.values))


def act_hk(X: System, g: CubeConfig, c: CubeConfig) -> CubeConfig:
    """(g_v . c_v)_v."""
    return CubeConfig(c.dim, tuple(X.act(n, p) for n, p in zip(g.values, c.values)))


# -- membership -------------------------------------------------------------------------

def _moebius_torus_ok(arr: np.ndarray, max_degree: np.ndarray, tol: float) -> bool:
    """arr (2^k, d); coordinate i may carry Moebius terms of degree <= max_degree[i]."""
    coef = torus_diff(mobius(arr), 0.0)
    k = int(np.log2(arr.shape[0]))
    deg = np.array([cb.weight(i) for i in range(1 << k)])
    mask = deg[:, None] > max_degree[None, :]
    return bool(np.all(np.abs(coef[mask]) <= tol))


def is_cube(X: System, c: CubeConfig, tol: float = 1e-9) -> bool:
    if isinstance(X, CyclicRotation):
        if c.dim == 0:
            return True
        coef = mobius(np.array(c.values, dtype=np.int64)) % X.n_points
        deg = [cb.weight(i) for i in range(1 << c.dim)]
        if any(cf != 0 for cf, d in zip(coef, deg) if d >= 2):
            return False
        step = np.gcd(X.a, X.n_points) if X.a else X.n_points
        return all(cf % step == 0 for cf, d in zip(coef, deg) if d == 1)
    if isinstance(X, FiniteSystem):
        return tuple(c.values) in finite_cube_set(X, c.dim)
    if c.dim == 0:
        return True
    if isinstance(X, TorusRotation):
        return _moebius_torus_ok(cube_array(c), np.ones(X.d, dtype=int), tol)
    if isinstance(X, WeylTower):
        if X.d > 2:
            raise UnsupportedSystem("is_cube is only available for Weyl towers of depth <= 2")
        return _moebius_torus_ok(cube_array(c), np.arange(1, X.d + 1), tol)
    if isinstance(X, SkewExtension) and isinstance(X.base, TorusRotation) and X.base.d == 1:
        if X.beta.name not in ("zero", "skew"):
            raise UnsupportedSystem(f"no cube test for the {X.beta.name!r} extension")
        arr = np.array([[float(np.atleast_1d(p[0])[0]), float(np.atleast_1d(p[1])[0])]
                        for p in c.values])
        fiber_deg = 0 if X.beta.name == "zero" else 2
        return _moebius_torus_ok(arr, np.array([1, fiber_deg]), tol)
    raise UnsupportedSystem(f"is_cube does not support {type(X).__name__}")


# -- corner completion -------------------------------------------------------------------

def corner_complete(X: System, corner: Corner, tol: float = 1e-9):
    """A top vertex completing ``corner`` to a cube (unique for rotations)."""
    l = corner.dim
    for i in range(1, l + 1):
        if not is_cube(X, corner.lower_face(i), tol):
            raise CompletionError(f"face v_{i} = 0 of the corner is not a cube")
    top_idx = (1 << l) - 1
    if isinstance(X, CyclicRotation) or (isinstance(X, FiniteSystem) and not X.rotation_type):
        cubes = finite_cube_set(X, l)
        prefix = tuple(corner.values)
        for cfg in cubes:
            if cfg[:-1] == prefix:
                return cfg[-1]
        raise CompletionError("no completion exists; the cube set is not fibrant")
    if isinstance(X, (TorusRotation, WeylTower)):
        arr = np.array([np.atleast_1d(np.asarray(v, dtype=float)) for v in corner.values])
        # top vertex chosen so the degree-l Moebius coefficient vanishes
        sgn = np.array([1 if cb.weight(i) % 2 == l % 2 else -1 for i in range(top_idx)])
        top = frac(-(sgn[:, None] * arr).sum(axis=0))
        full = corner.complete(top)
        if not is_cube(X, full, tol):
            raise CompletionError("completion failed the cube test")
        return top
    raise UnsupportedSystem(f"corner completion does not support {type(X).__name__}")


# -- tricubes ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Tricube:
    n: int
    values: tuple  # indexed by cb.tri_index

    def __getitem__(self, w):
        return self.values[cb.tri_index(w)]


def tricube_from_cube(c: CubeConfig) -> Tricube:
    """t_w = c_{q(w)} for a 2n-cube c."""
    n = c.dim // 2
    maps = cb.tricube_maps(n)
    return Tricube(n, tuple(c.values[i] for i in maps.q))


def tricube_sample(X: System, n: int, rng, **kw) -> Tricube:
    if not 1 <= n <= 4:
        raise cb.DimensionError("tricube sampling supports 1 <= n <= 4")
    return tricube_from_cube(sample_cube(X, 2 * n, rng, **kw))


def psi(t: Tricube, v) -> CubeConfig:
    maps = cb.tricube_maps(t.n)
    vi = v if isinstance(v, int) else cb.vertex_index(v)
    return CubeConfig(t.n, tuple(t.values[i] for i in maps.psi[vi]))


def omega(t: Tricube) -> CubeConfig:
    maps = cb.tricube_maps(t.n)
    return CubeConfig(t.n, tuple(t.values[i] for i in maps.omega))


def conditional_tricube(X: System, c: CubeConfig, rng) -> Tricube:
    """A tricube t with omega(t) = c, free parameters uniform (rotation systems)."""
    if not isinstance(X, TorusRotation):
        raise UnsupportedSystem("conditional tricubes need a torus rotation")
    x, ts = affine_params(X, c)
    n = c.dim
    params = np.empty((2 * n, X.d))
    params[0::2] = rng.random((n, X.d))
    params[1::2] = np.array(ts).reshape(n, X.d)
    t = tricube_from_cube(affine_cube(X, x, params))
    # write c's own vertices back so omega(t) == c bit for bit
    maps = cb.tricube_maps(n)
    vals = list(t.values)
    for j, i in enumerate(maps.omega):
        vals[i] = c.values[j]
    return Tricube(n, tuple(vals))


# -- glueable pairs ------------------------------------------------------------------------

def glueable_pair_sample(X: System, k: int, rng, **kw) -> tuple[CubeConfig, CubeConfig]:
    """Two glueable (k+1)-cubes cut from one (k+2)-cube.

    The faces {v_{k+2} = 0} and {v_{k+1} = 0} share the face {v_{k+1} = v_{k+2} = 0};
    the first is reflected in its last coordinate so that the shared face becomes
    its upper face, as glueing requires.
    """
    if k + 2 > MAX_CUBE_DIM:
        raise cb.DimensionError("glueable pairs need k + 2 <= 8")
    c = sample_cube(X, k + 2, rng, **kw)
    return glueable_pair_from_cube(c)


def glueable_pair_from_cube(c: CubeConfig) -> tuple[CubeConfig, CubeConfig]:
    m = c.dim
    lower_a = c.face(m, 0)  # coordinates 1..m-1, last one is v_{m-1}
    b1 = cb.act_iso(lower_a, CubeIsomorphism.reflection(m - 1, m - 1))
    b2 = c.face(m - 1, 0)  # coordinates 1..m-2 and v_m renamed to v_{m-1}
    return b1, b2


def point_dist(X: System):
    return X.dist


# -- NRP --------------------------------------------------------------------------------

@dataclass
class NrpReport:
    k: int
    classes: list
    transitive: bool
    n_related_pairs: int

    def to_json(self) -> dict:
        return {"k": self.k, "classes": self.classes, "transitive": self.transitive,
                "related_pairs": self.n_related_pairs}


def nrp_classes(X: FiniteSystem, k: int) -> NrpReport:
    """Classes of x ~_k y iff (x, ..., x, y) is a (k+1)-cube, by exhaustive BFS."""
    if not isinstance(X, FiniteSystem):
        raise UnsupportedSystem("NRP classes are computed for finite systems only")
    cubes = finite_cube_set(X, k + 1)
    m = 1 << (k + 1)
    n = X.n_points
    related = set()
    for cfg in cubes:
        x = cfg[0]
        if all(p == x for p in cfg[:m - 1]):
            related.add((x, cfg[-1]))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in related:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for x in range(n):
        groups.setdefault(find(x), []).append(x)
    classes = sorted(groups.values())
    closure = {(a, b) for cls in classes for a in cls for b in cls}
    return NrpReport(k, classes, closure == related, len(related))


# -- conditional sampling ------------------------------------------------------------------

@dataclass
class ConditionalCubeSampler:
    """Cubes with c_0 = x, drawn from the fibre of the cube measure over x."""

    system: System
    k: int
    x: object
    _fiber: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        X = self.system
        if isinstance(X, CyclicRotation) or isinstance(X, TorusRotation):
            return
        if isinstance(X, FiniteSystem):
            self._fiber = sorted(c for c in finite_cube_set(X, self.k) if c[0] == self.x)
            return
        raise UnsupportedSystem(f"no conditional sampler for {type(X).__name__}")

    def sample(self, rng) -> CubeConfig:
        X, k = self.system, self.k
        if k == 0:
            return CubeConfig(0, (self.x,))
        if isinstance(X, CyclicRotation):
            ts = [X.a * int(t) % X.n_points for t in rng.integers(0, X.n_points, size=k)]
            return affine_cube(X, self.x, ts)
        if isinstance(X, TorusRotation):
            return affine_cube(X, self.x, rng.random((k, X.d)))
        return CubeConfig(k, self._fiber[int(rng.integers(len(self._fiber)))])

    def sample_params(self, rng, n: int) -> np.ndarray:
        """(n, k, d) free parameters t_j for torus rotations (vectorised path)."""
        X = self.system
        if not isinstance(X, TorusRotation):
            raise UnsupportedSystem("parameter sampling needs a torus rotation")
        return rng.random((n, self.k, X.d))


def conditional_sampler(X: System, k: int, x) -> ConditionalCubeSampler:
    return ConditionalCubeSampler(X, k, x)
