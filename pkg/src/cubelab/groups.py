"""Explicit groups, their Host-Kra cube groups, and the kernel of theta."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .cube import CubeConfig, Face, theta, vertex_at, vertex_index, vertices, weight


class GroupError(ValueError):
    pass


class Group:
    """Base class.  Subclasses fix the element representation."""

    is_abelian = True
    tag = "group"

    def identity(self):
        raise NotImplementedError

    def compose(self, g, h):
        raise NotImplementedError

    def invert(self, g):
        raise NotImplementedError

    @property
    def generators(self) -> list:
        raise NotImplementedError

    def lower_central_member(self, g, n: int) -> bool:
        """Is g in G_n (G_1 = G, G_{n+1} = [G_n, G])?"""
        if n <= 1:
            return True
        return g == self.identity() if self.is_abelian else NotImplemented

    def power(self, g, n: int):
        base = g if n >= 0 else self.invert(g)
        out = self.identity()
        for _ in range(abs(n)):
            out = self.compose(out, base)
        return out

    def elements(self):
        raise GroupError(f"{type(self).__name__} is not finite")

    def to_json(self) -> dict:
        return {"group": self.tag}

    def element_to_json(self, g) -> list:
        return [int(x) for x in g] if isinstance(g, tuple) else [int(g)]


class Integers(Group):
    tag = "z"

    def identity(self):
        return 0

    def compose(self, g, h):
        return g + h

    def invert(self, g):
        return -g

    @property
    def generators(self):
        return [1]

    def power(self, g, n):
        return g * n


class Zd(Group):
    tag = "zd"

    def __init__(self, d: int):
        if d < 1:
            raise GroupError("Z^d needs d >= 1")
        self.d = d

    def identity(self):
        return (0,) * self.d

    def compose(self, g, h):
        return tuple(a + b for a, b in zip(g, h))

    def invert(self, g):
        return tuple(-a for a in g)

    @property
    def generators(self):
        return [tuple(int(i == j) for i in range(self.d)) for j in range(self.d)]

    def to_json(self):
        return {"group": self.tag, "d": self.d}


class Cyclic(Group):
    tag = "cyclic"

    def __init__(self, n: int):
        if n < 1:
            raise GroupError("Z/n needs n >= 1")
        self.n = n

    def identity(self):
        return 0

    def compose(self, g, h):
        return (g + h) % self.n

    def invert(self, g):
        return (-g) % self.n

    def power(self, g, n):
        return (g * n) % self.n

    @property
    def generators(self):
        return [1 % self.n]

    def elements(self):
        return list(range(self.n))

    def contains(self, g) -> bool:
        return isinstance(g, int) and 0 <= g < self.n

    def to_json(self):
        return {"group": self.tag, "n": self.n}

    def __repr__(self):
        return f"Cyclic({self.n})"


class FiniteAbelian(Group):
    """Z/n_1 x ... x Z/n_r with tuple elements."""

    tag = "finite_abelian"

    def __init__(self, orders: Sequence[int]):
        if not orders or any(n < 1 for n in orders):
            raise GroupError("need at least one positive cyclic order")
        self.orders = tuple(int(n) for n in orders)

    def identity(self):
        return (0,) * len(self.orders)

    def compose(self, g, h):
        return tuple((a + b) % n for a, b, n in zip(g, h, self.orders))

    def invert(self, g):
        return tuple((-a) % n for a, n in zip(g, self.orders))

    def power(self, g, m):
        return tuple((a * m) % n for a, n in zip(g, self.orders))

    @property
    def generators(self):
        r = len(self.orders)
        return [tuple(int(i == j) % self.orders[i] for i in range(r)) for j in range(r)]

    def elements(self):
        return list(itertools.product(*(range(n) for n in self.orders)))

    def contains(self, g) -> bool:
        return (isinstance(g, tuple) and len(g) == len(self.orders)
                and all(isinstance(a, int) and 0 <= a < n for a, n in zip(g, self.orders)))

    @property
    def order(self) -> int:
        out = 1
        for n in self.orders:
            out *= n
        return out

    def to_json(self):
        return {"group": self.tag, "orders": list(self.orders)}


class HeisenbergZ(Group):
    """Integer triples with (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab').

    With ``modulus`` set, all coordinates are reduced mod p (a finite quotient).
    """

    is_abelian = False
    tag = "heisenberg_z"

    def __init__(self, modulus: int | None = None):
        self.modulus = modulus

    def _red(self, g):
        if self.modulus is None:
            return g
        p = self.modulus
        return (g[0] % p, g[1] % p, g[2] % p)

    def identity(self):
        return (0, 0, 0)

    def compose(self, g, h):
        return self._red((g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1]))

    def invert(self, g):
        a, b, c = g
        return self._red((-a, -b, -c + a * b))

    @property
    def generators(self):
        return [(1, 0, 0), (0, 1, 0)]

    def lower_central_member(self, g, n):
        if n <= 1:
            return True
        g = self._red(g)
        if n == 2:
            return g[0] == 0 and g[1] == 0
        return g == (0, 0, 0)

    def reduce(self, p: int) -> "HeisenbergZ":
        return HeisenbergZ(p)

    def elements(self):
        if self.modulus is None:
            return super().elements()
        p = self.modulus
        return list(itertools.product(range(p), repeat=3))

    def to_json(self):
        out = {"group": self.tag}
        if self.modulus is not None:
            out["p"] = self.modulus
        return out


def group_from_json(spec: dict) -> Group:
    tag = spec.get("group")
    if tag == "z":
        return Integers()
    if tag == "zd":
        return Zd(int(spec["d"]))
    if tag == "cyclic":
        return Cyclic(int(spec["n"]))
    if tag == "finite_abelian":
        return FiniteAbelian(spec["orders"])
    if tag == "heisenberg_z":
        return HeisenbergZ(spec.get("p"))
    raise GroupError(f"unknown group tag {tag!r}")


# -- cube groups ----------------------------------------------------------------------

def cube_mul(G: Group, c1: CubeConfig, c2: CubeConfig) -> CubeConfig:
    return CubeConfig(c1.dim, tuple(G.compose(a, b) for a, b in zip(c1.values, c2.values)))


def cube_inv(G: Group, c: CubeConfig) -> CubeConfig:
    return c.map(G.invert)


def face_element(G: Group, g, F: Face) -> CubeConfig:
    e = G.identity()
    return CubeConfig.from_function(F.dim, lambda v: g if v in F else e)


def diagonal_element(G: Group, g, k: int) -> CubeConfig:
    return face_element(G, g, Face.whole(k))


def hk_generators(G: Group, k: int) -> list[CubeConfig]:
    """Upper-face and diagonal elements of the generators and their inverses."""
    gens = []
    for s in G.generators:
        for t in (s, G.invert(s)):
            gens.append(diagonal_element(G, t, k))
            gens.extend(face_element(G, t, Face.upper(k, j)) for j in range(1, k + 1))
    uniq = {c.values: c for c in gens}
    return list(uniq.values())


def hk_sample(G: Group, k: int, word_length: int, rng) -> CubeConfig:
    """Random product of ``word_length`` generating face/diagonal elements."""
    if word_length < 1:
        raise ValueError("word_length must be >= 1")
    gens = hk_generators(G, k)
    out = diagonal_element(G, G.identity(), k)
    for i in rng.integers(0, len(gens), size=word_length):
        out = cube_mul(G, out, gens[int(i)])
    return out


def hk_affine_sample(G: Group, k: int, bound: int, rng) -> CubeConfig:
    """Affine configuration a + sum_j b_j v_j with coefficients uniform in [-bound, bound].

    Only for Integers / Cyclic: every element of HK^k(G) has this form, so this
    samples the cube group directly instead of through random words.
    """
    if not isinstance(G, (Integers, Cyclic)):
        raise GroupError("affine sampling needs Z or Z/n")
    coef = [int(x) for x in rng.integers(-bound, bound + 1, size=k + 1)]
    return CubeConfig.from_function(
        k, lambda v: G.compose(0, coef[0] + sum(b * x for b, x in zip(coef[1:], v))))


def hk_member_abelian(G: Group, c: CubeConfig):
    """(True, (a, b_1..b_k)) if c_v = a + sum b_j v_j, else (False, None)."""
    if not G.is_abelian:
        raise GroupError("hk_member_abelian needs an abelian group")
    k = c.dim
    a = c.values[0]
    b = [G.compose(c.values[1 << j], G.invert(a)) for j in range(k)]
    for idx, x in enumerate(c.values):
        expect = a
        for j in range(k):
            if (idx >> j) & 1:
                expect = G.compose(expect, b[j])
        if expect != x:
            return False, None
    return True, (a, *b)


def hk_plus_member_abelian(G: Group, c: CubeConfig) -> bool:
    if not G.is_abelian:
        raise GroupError("HK_{+1} is only implemented for abelian groups")
    return all(x == c.values[0] for x in c.values)


def hk_generate_finite(G: Group, k: int, cap: int = 2_000_000) -> set[tuple]:
    """BFS closure of hk_generators; returns value tuples in canonical order."""
    G.elements()  # raises for infinite groups
    gens = hk_generators(G, k)
    start = diagonal_element(G, G.identity(), k).values
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for g in gens:
            nxt = tuple(G.compose(a, b) for a, b in zip(cur, g.values))
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise GroupError(f"BFS exceeded cap of {cap} elements")
                queue.append(nxt)
    return seen


# -- theta kernel ---------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaKernel:
    """ker theta inside A^{[n]} for an abelian A given as a Group."""

    A: Group
    n: int

    def contains(self, u: CubeConfig) -> bool:
        return _theta_in(self.A, u) == self.A.identity()

    def edge_element(self, g, a: Sequence[int], b: Sequence[int]) -> CubeConfig:
        return face_element(self.A, g, Face.edge(a, b))


def _theta_in(A: Group, u: CubeConfig):
    total = A.identity()
    for idx, x in enumerate(u.values):
        total = A.compose(total, A.invert(x) if weight(idx) & 1 else x)
    return total


def edge_decompose(A: Group, u: CubeConfig) -> list[tuple[object, Face]]:
    """Write u in ker theta as a sum of edge elements g^alpha.

    Base case (n = 2) uses the edges {(0,0),(0,1)}, {(0,1),(1,1)}, {(1,1),(1,0)};
    higher n peels g_0 off the edge {(0..0,0),(0..0,1)} and recurses on the two
    faces v_n = 0 and v_n = 1.
    """
    if not A.is_abelian:
        raise GroupError("edge decomposition needs an abelian group")
    if _theta_in(A, u) != A.identity():
        raise GroupError("configuration is not in the kernel of theta")
    n = u.dim
    terms = _edge_rec(A, list(u.values), n)
    e = A.identity()
    return [(g, Face.edge(a, b)) for g, a, b in terms if g != e]


def _edge_rec(A: Group, vals: list, n: int) -> list:
    e = A.identity()
    if n == 0:
        return []
    if n == 1:
        return [(vals[0], (0,), (1,))]
    if n == 2:
        g1 = vals[vertex_index((0, 0))]
        g2 = A.compose(vals[vertex_index((0, 1))], A.invert(g1))
        g3 = A.compose(vals[vertex_index((1, 1))], A.invert(g2))
        return [(g1, (0, 0), (0, 1)), (g2, (0, 1), (1, 1)), (g3, (1, 1), (1, 0))]
    half = 1 << (n - 1)
    lower = vals[:half]
    g0 = e
    for idx, x in enumerate(lower):
        g0 = A.compose(g0, A.invert(x) if weight(idx) & 1 else x)
    zero = (0,) * (n - 1)
    rest = list(vals)
    rest[0] = A.compose(rest[0], A.invert(g0))
    rest[half] = A.compose(rest[half], A.invert(g0))
    out = [(g0, zero + (0,), zero + (1,))]
    for bit, face in ((0, rest[:half]), (1, rest[half:])):
        for g, a, b in _edge_rec(A, face, n - 1):
            out.append((g, tuple(a) + (bit,), tuple(b) + (bit,)))
    return out


def edge_resum(A: Group, terms, n: int) -> CubeConfig:
    out = [A.identity()] * (1 << n)
    for g, face in terms:
        for v in face.vertices():
            i = vertex_index(v)
            out[i] = A.compose(out[i], g)
    return CubeConfig(n, tuple(out))


# -- Haar measure on cosets -----------------------------------------------------------

class HaarCoset:
    """Uniform distribution on the coset H + a of a finite abelian group."""

    def __init__(self, A: Group, generators: Sequence, a):
        for h in generators:
            if not A.contains(h):
                raise GroupError(f"generator {h!r} is not an element of {A!r}")
        if not A.contains(a):
            raise GroupError(f"translate {a!r} is not an element of {A!r}")
        self.A = A
        H = {A.identity()}
        frontier = [A.identity()]
        while frontier:
            nxt = []
            for x in frontier:
                for h in generators:
                    y = A.compose(x, h)
                    if y not in H:
                        H.add(y)
                        nxt.append(y)
            frontier = nxt
        self.subgroup = frozenset(H)
        self.support = sorted(A.compose(h, a) for h in H)
        self._support_set = frozenset(self.support)

    def prob(self, x) -> Fraction:
        return Fraction(1, len(self.support)) if x in self._support_set else Fraction(0)

    def sample(self, rng, size: int | None = None):
        if size is None:
            return self.support[int(rng.integers(len(self.support)))]
        return [self.support[int(i)] for i in rng.integers(len(self.support), size=size)]


def haar_coset_measure(A: Group, H_generators: Sequence, a) -> HaarCoset:
    return HaarCoset(A, H_generators, a)


def theta_value(A: Group, u: CubeConfig):
    """theta computed with the group law of A."""
    return _theta_in(A, u)


__all__ = [
    "Group", "Integers", "Zd", "Cyclic", "FiniteAbelian", "HeisenbergZ", "GroupError",
    "group_from_json", "cube_mul", "cube_inv", "face_element", "diagonal_element",
    "hk_generators", "hk_sample", "hk_affine_sample", "hk_member_abelian",
    "hk_plus_member_abelian", "hk_generate_finite", "ThetaKernel", "edge_decompose",
    "edge_resum", "HaarCoset", "haar_coset_measure", "theta_value", "vertices", "vertex_at",
    "theta",
]
