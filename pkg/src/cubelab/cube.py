"""Combinatorics of the discrete cube {0,1}^k.

Vertices are tuples of bits ``(v_1, ..., v_k)``.  The canonical order is
little-endian lexicographic: vertex ``v`` sits at index ``sum(v_j << (j-1))``,
so coordinate 1 flips fastest.  Every vertex-indexed array in the package
(cube configurations, JSON dumps, BFS keys) uses this order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

MAX_DIM = 16
MAX_TRI_DIM = 8
GLUE_TOL = 1e-9


class DimensionError(ValueError):
    pass


class NotGlueableError(ValueError):
    def __init__(self, discrepancy: float):
        super().__init__(f"cubes are not glueable (max vertex discrepancy {discrepancy:.3g})")
        self.discrepancy = discrepancy


def _check_dim(k: int, cap: int = MAX_DIM) -> None:
    if not 0 <= k <= cap:
        raise DimensionError(f"dimension {k} outside [0, {cap}]")


def vertex_index(v: Sequence[int]) -> int:
    return sum(b << j for j, b in enumerate(v))


def vertex_at(i: int, k: int) -> tuple[int, ...]:
    return tuple((i >> j) & 1 for j in range(k))


def weight(v: Sequence[int] | int) -> int:
    if isinstance(v, int):
        return bin(v).count("1")
    return sum(v)


def vertices(k: int) -> list[tuple[int, ...]]:
    _check_dim(k)
    return [vertex_at(i, k) for i in range(1 << k)]


def signs(k: int) -> list[int]:
    """(-1)^|v| in canonical order."""
    return [-1 if weight(i) & 1 else 1 for i in range(1 << k)]


@dataclass(frozen=True)
class CubeConfig:
    """A labelling of all 2^k vertices, stored in canonical order."""

    dim: int
    values: tuple

    def __post_init__(self):
        _check_dim(self.dim)
        if len(self.values) != 1 << self.dim:
            raise DimensionError(
                f"{len(self.values)} values for a {self.dim}-cube (need {1 << self.dim})"
            )

    @classmethod
    def from_function(cls, k: int, fn: Callable[[tuple[int, ...]], Any]) -> "CubeConfig":
        return cls(k, tuple(fn(v) for v in vertices(k)))

    @classmethod
    def constant(cls, k: int, value) -> "CubeConfig":
        return cls(k, (value,) * (1 << k))

    def __getitem__(self, v):
        if isinstance(v, int):
            return self.values[v]
        return self.values[vertex_index(v)]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def map(self, fn: Callable[[Any], Any]) -> "CubeConfig":
        return CubeConfig(self.dim, tuple(fn(x) for x in self.values))

    def items(self):
        return zip(vertices(self.dim), self.values)

    def face(self, coord: int, bit: int) -> "CubeConfig":
        """Restriction to the codimension-1 face {v_coord = bit}, as a (k-1)-cube."""
        k = self.dim
        if not 1 <= coord <= k:
            raise DimensionError(f"coordinate {coord} not in 1..{k}")
        vals = [x for v, x in self.items() if v[coord - 1] == bit]
        return CubeConfig(k - 1, tuple(vals))

    def to_json(self) -> dict:
        return {"dim": self.dim, "values": [_jsonable(x) for x in self.values]}

    @classmethod
    def from_json(cls, data: dict) -> "CubeConfig":
        vals = tuple(tuple(x) if isinstance(x, list) else x for x in data["values"])
        return cls(int(data["dim"]), vals)


def _jsonable(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, tuple):
        return [_jsonable(y) for y in x]
    return x


# -- morphisms ---------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    bit: int


@dataclass(frozen=True)
class Coord:
    i: int  # 1-based


@dataclass(frozen=True)
class NegCoord:
    i: int


Rule = Const | Coord | NegCoord


def _eval_rule(rule: Rule, w: Sequence[int]) -> int:
    if isinstance(rule, Const):
        return rule.bit
    if isinstance(rule, Coord):
        return w[rule.i - 1]
    return 1 - w[rule.i - 1]


@dataclass(frozen=True)
class DiscreteCubeMorphism:
    """p: {0,1}^arity -> {0,1}^len(rules), one rule per output coordinate."""

    arity: int
    rules: tuple

    def __post_init__(self):
        _check_dim(self.arity)
        for r in self.rules:
            if isinstance(r, Const):
                if r.bit not in (0, 1):
                    raise ValueError(f"bad constant {r.bit}")
            elif isinstance(r, (Coord, NegCoord)):
                if not 1 <= r.i <= self.arity:
                    raise DimensionError(f"rule index {r.i} outside 1..{self.arity}")
            else:
                raise TypeError(f"not a morphism rule: {r!r}")

    @property
    def target_dim(self) -> int:
        return len(self.rules)

    @classmethod
    def identity(cls, k: int) -> "DiscreteCubeMorphism":
        return cls(k, tuple(Coord(i) for i in range(1, k + 1)))

    def __call__(self, w: Sequence[int]) -> tuple[int, ...]:
        return tuple(_eval_rule(r, w) for r in self.rules)

    def compose(self, inner: "DiscreteCubeMorphism") -> "DiscreteCubeMorphism":
        """self o inner."""
        if inner.target_dim != self.arity:
            raise DimensionError("morphism composition: dimension mismatch")
        out = []
        for r in self.rules:
            if isinstance(r, Const):
                out.append(r)
                continue
            s = inner.rules[r.i - 1]
            if isinstance(r, NegCoord):
                if isinstance(s, Const):
                    s = Const(1 - s.bit)
                elif isinstance(s, Coord):
                    s = NegCoord(s.i)
                else:
                    s = Coord(s.i)
            out.append(s)
        return DiscreteCubeMorphism(inner.arity, tuple(out))


def apply_morphism(c: CubeConfig, p: DiscreteCubeMorphism) -> CubeConfig:
    if p.target_dim != c.dim:
        raise DimensionError(f"morphism targets dimension {p.target_dim}, cube has {c.dim}")
    return CubeConfig(p.arity, tuple(c[p(w)] for w in vertices(p.arity)))


# -- isomorphisms --------------------------------------------------------------

@dataclass(frozen=True)
class CubeIsomorphism:
    """sigma(v)_j = v_{delta(j)}, flipped when j is in ``flips``.  1-based."""

    dim: int
    perm: tuple[int, ...]
    flips: frozenset = frozenset()

    def __post_init__(self):
        if sorted(self.perm) != list(range(1, self.dim + 1)):
            raise ValueError(f"{self.perm} is not a permutation of 1..{self.dim}")
        if not set(self.flips) <= set(range(1, self.dim + 1)):
            raise ValueError("flip set outside 1..k")
        object.__setattr__(self, "flips", frozenset(self.flips))

    @classmethod
    def identity(cls, k: int) -> "CubeIsomorphism":
        return cls(k, tuple(range(1, k + 1)))

    @classmethod
    def reflection(cls, k: int, coord: int) -> "CubeIsomorphism":
        return cls(k, tuple(range(1, k + 1)), frozenset({coord}))

    @classmethod
    def swap(cls, k: int, i: int, j: int) -> "CubeIsomorphism":
        perm = list(range(1, k + 1))
        perm[i - 1], perm[j - 1] = perm[j - 1], perm[i - 1]
        return cls(k, tuple(perm))

    @classmethod
    def random(cls, k: int, rng) -> "CubeIsomorphism":
        perm = tuple(int(i) + 1 for i in rng.permutation(k))
        flips = frozenset(j + 1 for j in range(k) if rng.random() < 0.5)
        return cls(k, perm, flips)

    def __call__(self, v: Sequence[int]) -> tuple[int, ...]:
        return tuple(
            1 - v[d - 1] if j in self.flips else v[d - 1]
            for j, d in enumerate(self.perm, start=1)
        )

    @property
    def sgn(self) -> int:
        return -1 if len(self.flips) % 2 else 1

    def inverse(self) -> "CubeIsomorphism":
        inv = [0] * self.dim
        for j, d in enumerate(self.perm, start=1):
            inv[d - 1] = j
        return CubeIsomorphism(self.dim, tuple(inv), frozenset(self.perm[j - 1] for j in self.flips))

    def compose(self, inner: "CubeIsomorphism") -> "CubeIsomorphism":
        """self o inner as maps on vertices."""
        m = self.as_morphism().compose(inner.as_morphism())
        perm = tuple(r.i for r in m.rules)
        flips = frozenset(j for j, r in enumerate(m.rules, start=1) if isinstance(r, NegCoord))
        return CubeIsomorphism(self.dim, perm, flips)

    def as_morphism(self) -> DiscreteCubeMorphism:
        return DiscreteCubeMorphism(
            self.dim,
            tuple(NegCoord(d) if j in self.flips else Coord(d)
                  for j, d in enumerate(self.perm, start=1)),
        )


def sgn(sigma: CubeIsomorphism) -> int:
    return sigma.sgn


def act_iso(c: CubeConfig, sigma: CubeIsomorphism) -> CubeConfig:
    """(c_{sigma(v)})_v."""
    if c.dim != sigma.dim:
        raise DimensionError("isomorphism and cube have different dimensions")
    return apply_morphism(c, sigma.as_morphism())


def all_isomorphisms(k: int):
    for perm in itertools.permutations(range(1, k + 1)):
        for r in range(k + 1):
            for flips in itertools.combinations(range(1, k + 1), r):
                yield CubeIsomorphism(k, perm, frozenset(flips))


# -- faces, downward-closed sets, corners ------------------------------------------

@dataclass(frozen=True)
class Face:
    dim: int
    fixed: tuple  # sorted ((coord, bit), ...)

    def __post_init__(self):
        fixed = tuple(sorted(dict(self.fixed).items()))
        for j, b in fixed:
            if not 1 <= j <= self.dim or b not in (0, 1):
                raise ValueError(f"bad face constraint ({j}, {b})")
        object.__setattr__(self, "fixed", fixed)

    @classmethod
    def whole(cls, k: int) -> "Face":
        return cls(k, ())

    @classmethod
    def upper(cls, k: int, j: int) -> "Face":
        return cls(k, ((j, 1),))

    @classmethod
    def edge(cls, a: Sequence[int], b: Sequence[int]) -> "Face":
        diff = [j for j in range(len(a)) if a[j] != b[j]]
        if len(diff) != 1:
            raise ValueError(f"{a}, {b} do not span an edge")
        return cls(len(a), tuple((j + 1, a[j]) for j in range(len(a)) if j != diff[0]))

    @property
    def codim(self) -> int:
        return len(self.fixed)

    def __contains__(self, v) -> bool:
        return all(v[j - 1] == b for j, b in self.fixed)

    def vertices(self) -> list[tuple[int, ...]]:
        return [v for v in vertices(self.dim) if v in self]


@dataclass(frozen=True)
class DownwardClosedSet:
    dim: int
    members: frozenset

    def __post_init__(self):
        members = frozenset(tuple(v) for v in self.members)
        object.__setattr__(self, "members", members)
        for v in members:
            for j, b in enumerate(v):
                if b and v[:j] + (0,) + v[j + 1:] not in members:
                    raise ValueError(f"not downward closed: {v} present, lower neighbour missing")

    @classmethod
    def of_weight_at_most(cls, d: int, w: int) -> "DownwardClosedSet":
        return cls(d, frozenset(v for v in vertices(d) if sum(v) <= w))


def extension_order(V: DownwardClosedSet) -> list[tuple[int, ...]]:
    """Missing vertices by non-decreasing weight; every prefix keeps V downward closed."""
    missing = [v for v in vertices(V.dim) if v not in V.members]
    return sorted(missing, key=lambda v: (sum(v), vertex_index(v)))


@dataclass(frozen=True)
class Corner:
    """Values on {0,1}^l minus the top vertex, in canonical order."""

    dim: int
    values: tuple

    def __post_init__(self):
        if len(self.values) != (1 << self.dim) - 1:
            raise DimensionError(f"a {self.dim}-corner needs {(1 << self.dim) - 1} values")

    @classmethod
    def of_cube(cls, c: CubeConfig) -> "Corner":
        return cls(c.dim, c.values[:-1])

    def lower_face(self, i: int) -> CubeConfig:
        """The (l-1)-cube lambda restricted to {v_i = 0}."""
        return CubeConfig(self.dim - 1, tuple(
            x for idx, x in enumerate(self.values) if not (idx >> (i - 1)) & 1))

    def complete(self, top) -> CubeConfig:
        return CubeConfig(self.dim, self.values + (top,))


# -- glueing and the alternating sum ------------------------------------------------

def _default_dist(a, b) -> float:
    if isinstance(a, (int, float, complex)) and isinstance(b, (int, float, complex)):
        return abs(a - b)
    return 0.0 if a == b else math.inf


def glue(c1: CubeConfig, c2: CubeConfig, tol: float = GLUE_TOL,
         dist: Callable[[Any, Any], float] | None = None) -> CubeConfig:
    """c1 || c2 along the last coordinate: lower face of c1, upper face of c2."""
    if c1.dim != c2.dim or c1.dim == 0:
        raise DimensionError("glue needs two cubes of the same positive dimension")
    dist = dist or _default_dist
    half = 1 << (c1.dim - 1)
    worst = max(float(dist(c1.values[half + i], c2.values[i])) for i in range(half))
    if worst > tol:
        raise NotGlueableError(worst)
    return CubeConfig(c1.dim, c1.values[:half] + c2.values[half:])


def theta(a: CubeConfig | Sequence, modulus=None):
    """sum_v (-1)^|v| a_v, reduced modulo ``modulus`` when given (N or 1.0)."""
    vals = a.values if isinstance(a, CubeConfig) else tuple(a)
    total = 0
    for i, x in enumerate(vals):
        total = total - x if weight(i) & 1 else total + x
    if modulus is not None:
        total = total % modulus
    return total


# -- tricubes ----------------------------------------------------------------------

def tri_vertices(n: int) -> list[tuple[int, ...]]:
    """{-1,0,1}^n, coordinate 1 fastest, digit order -1 < 0 < 1."""
    _check_dim(n, MAX_TRI_DIM)
    return [tuple(reversed(w)) for w in itertools.product((-1, 0, 1), repeat=n)]


def tri_index(w: Sequence[int]) -> int:
    return sum((x + 1) * 3 ** j for j, x in enumerate(w))


def psi_embed(v: Sequence[int], eps: Sequence[int]) -> tuple[int, ...]:
    return tuple((1 - 2 * vj) * (1 - ej) for vj, ej in zip(v, eps))


def omega_embed(v: Sequence[int]) -> tuple[int, ...]:
    return psi_embed(v, (0,) * len(v))


_Q = {1: (0, 0), 0: (1, 0), -1: (0, 1)}


def q_embed(w: Sequence[int]) -> tuple[int, ...]:
    """{-1,0,1}^n -> {0,1}^{2n}, coordinatewise 1->(0,0), 0->(1,0), -1->(0,1)."""
    return tuple(b for x in w for b in _Q[x])


@dataclass(frozen=True)
class TricubeMaps:
    n: int
    psi: tuple  # psi[vertex index of v] = tuple of tri-indices, canonical order of eps
    omega: tuple
    q: tuple  # q[tri index] = vertex index in {0,1}^{2n}


def tricube_maps(n: int) -> TricubeMaps:
    if not 1 <= n <= MAX_TRI_DIM:
        raise DimensionError(f"tricube dimension {n} outside [1, {MAX_TRI_DIM}]")
    cube = vertices(n)
    psi = tuple(tuple(tri_index(psi_embed(v, e)) for e in cube) for v in cube)
    omega = tuple(tri_index(omega_embed(v)) for v in cube)
    q = tuple(vertex_index(q_embed(w)) for w in tri_vertices(n))
    return TricubeMaps(n, psi, omega, q)


def iter_configs(k: int, alphabet: Iterable) -> Iterable[CubeConfig]:
    alphabet = tuple(alphabet)
    for vals in itertools.product(alphabet, repeat=1 << k):
        yield CubeConfig(k, vals)
