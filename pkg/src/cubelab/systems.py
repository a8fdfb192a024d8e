"""Explicit Z-actions: rotations, Weyl towers, and cocycle skew products.

Torus points are float arrays with coordinates in [0, 1).  Multiplying a point
by a large integer (n-step orbits, binomial coefficients in Weyl towers) goes
through ``frac_mul``, which is exact up to the final rounding; naive float
products lose ~log10(n) digits and break the 1e-9 face tolerances downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GOLDEN = 0.6180339887498949


class SystemSpecError(ValueError):
    pass


class CocycleError(ValueError):
    pass


# -- torus arithmetic -----------------------------------------------------------------

def frac_mul(n: int, x: float) -> float:
    """(n * x) mod 1, exact before the final rounding."""
    n = int(n)
    if n == 0:
        return 0.0
    num, den = float(x).as_integer_ratio()
    return ((n * num) % den) / den


def frac_mul_array(n, x) -> np.ndarray:
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    n, x = np.broadcast_arrays(n, x)
    out = np.empty(x.shape)
    flat_n, flat_x, flat_o = n.ravel(), x.ravel(), out.reshape(-1)
    for i in range(flat_x.size):
        flat_o[i] = frac_mul(int(flat_n[i]), float(flat_x[i]))
    return out


def frac(x):
    out = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(out >= 1.0, 0.0, out)


def torus_diff(x, y):
    """Signed representative of x - y in [-1/2, 1/2)."""
    d = np.mod(np.asarray(x, dtype=float) - np.asarray(y, dtype=float) + 0.5, 1.0) - 0.5
    return d


def torus_dist(x, y) -> float:
    d = np.abs(torus_diff(x, y))
    return float(np.max(d)) if d.size else 0.0


def binom(n: int, j: int) -> int:
    """Generalised binomial n(n-1)...(n-j+1)/j!, valid for negative n."""
    out = 1
    for i in range(j):
        out *= n - i
    return out // math.factorial(j)


def e(x):
    """e(x) = exp(2 pi i x)."""
    return np.exp(2j * np.pi * np.asarray(x, dtype=float))


# -- structure groups -------------------------------------------------------------------

class TorusGroup:
    """T^m written additively, elements are float arrays of shape (m,)."""

    kind = "torus"

    def __init__(self, m: int = 1):
        if m < 1:
            raise SystemSpecError("torus dimension must be >= 1")
        self.m = m

    def zero(self):
        return np.zeros(self.m)

    def add(self, a, b):
        return frac(np.asarray(a, dtype=float) + np.asarray(b, dtype=float))

    def neg(self, a):
        return frac(-np.asarray(a, dtype=float))

    def sub(self, a, b):
        return frac(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))

    def scale(self, n: int, a):
        return np.array([frac_mul(n, float(x)) for x in np.atleast_1d(a)])

    def dist(self, a, b) -> float:
        return torus_dist(a, b)

    def haar(self, rng, size=None):
        shape = (self.m,) if size is None else (size, self.m)
        return rng.random(shape)

    def reduce(self, a):
        return frac(a)

    def to_json(self):
        return {"group": "torus", "m": self.m}


class FiniteStructure:
    """Z/n as a structure group, with the discrete metric."""

    kind = "finite"

    def __init__(self, n: int):
        self.n = n

    def zero(self):
        return 0

    def add(self, a, b):
        return (a + b) % self.n

    def neg(self, a):
        return (-a) % self.n

    def sub(self, a, b):
        return (a - b) % self.n

    def scale(self, k: int, a):
        return (k * a) % self.n

    def dist(self, a, b) -> float:
        return 0.0 if (a - b) % self.n == 0 else 1.0

    def haar(self, rng, size=None):
        out = rng.integers(0, self.n, size=size)
        return int(out) if size is None else out

    def reduce(self, a):
        return a % self.n

    def to_json(self):
        return {"group": "cyclic", "n": self.n}


# -- systems --------------------------------------------------------------------------

class System:
    """A Z-action with an invariant-measure sampler and a metric."""

    kind = "abstract"
    rotation_type = False

    def act(self, n: int, x):
        raise NotImplementedError

    def sample(self, rng):
        raise NotImplementedError

    def dist(self, x, y) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class FiniteSystem(System):
    """A permutation of {0..N-1}, iterated."""

    kind = "finite"

    def __init__(self, step):
        self.step = np.asarray(step, dtype=np.int64)
        n = len(self.step)
        if sorted(self.step.tolist()) != list(range(n)):
            raise SystemSpecError("step must be a permutation of 0..N-1")
        self.n_points = n
        self.inv_step = np.argsort(self.step)

    def act(self, n: int, x):
        table = self.step if n >= 0 else self.inv_step
        for _ in range(abs(int(n))):
            x = int(table[x])
        return int(x)

    def sample(self, rng):
        return int(rng.integers(self.n_points))

    def dist(self, x, y):
        return 0.0 if x == y else 1.0

    def points(self):
        return list(range(self.n_points))

    def to_json(self):
        return {"system": "finite", "step": self.step.tolist()}


class CyclicRotation(FiniteSystem):
    rotation_type = True

    def __init__(self, n: int, a: int = 1):
        if n < 1:
            raise SystemSpecError("cyclic rotation needs N >= 1")
        self.a = a % n
        super().__init__([(x + a) % n for x in range(n)])

    def act(self, n: int, x):
        return int((x + n * self.a) % self.n_points)

    def to_json(self):
        return {"system": "cyclic", "n": self.n_points, "a": self.a}


class TorusRotation(System):
    kind = "torus"
    rotation_type = True

    def __init__(self, alpha):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.size == 0:
            raise SystemSpecError("torus rotation needs d >= 1")
        self.alpha = frac(alpha)
        self.d = alpha.size

    def act(self, n: int, x):
        step = np.array([frac_mul(n, a) for a in self.alpha])
        return frac(np.asarray(x, dtype=float) + step)

    def orbit(self, x, n_steps: int) -> np.ndarray:
        """x, Tx, ..., T^{n-1}x as an (n, d) array (plain float products)."""
        n = np.arange(n_steps)[:, None]
        return frac(np.asarray(x, dtype=float)[None, :] + frac(n * self.alpha[None, :]))

    def sample(self, rng):
        return rng.random(self.d)

    def dist(self, x, y):
        return torus_dist(x, y)

    def to_json(self):
        if self.d == 1:
            return {"system": "rotation", "alpha": float(self.alpha[0])}
        return {"system": "rotation", "alpha": self.alpha.tolist()}


class WeylTower(System):
    """T(x_1, ..., x_d) = (x_1 + alpha, x_2 + x_1, ..., x_d + x_{d-1})."""

    kind = "torus"

    def __init__(self, d: int, alpha: float = GOLDEN):
        if d < 1:
            raise SystemSpecError("Weyl tower needs d >= 1")
        self.d = d
        self.alpha = float(alpha) % 1.0

    def act(self, n: int, x):
        x = np.asarray(x, dtype=float)
        n = int(n)
        out = np.empty(self.d)
        for i in range(self.d):
            acc = frac_mul(binom(n, i + 1), self.alpha)
            for j in range(i + 1):
                acc += frac_mul(binom(n, j), float(x[i - j]))
            out[i] = acc
        return frac(out)

    def step_iterate(self, x, n_steps: int) -> np.ndarray:
        """Direct iteration, returned as (n_steps + 1, d)."""
        out = np.empty((n_steps + 1, self.d))
        cur = np.asarray(x, dtype=float).copy()
        out[0] = cur
        for s in range(n_steps):
            nxt = cur.copy()
            nxt[0] = cur[0] + self.alpha
            nxt[1:] = cur[1:] + cur[:-1]
            cur = frac(nxt)
            out[s + 1] = cur
        return out

    def sample(self, rng):
        return rng.random(self.d)

    def dist(self, x, y):
        return torus_dist(x, y)

    def to_json(self):
        return {"system": "weyl", "d": self.d, "alpha": self.alpha}


def cyclic_rotation(n: int, a: int = 1) -> CyclicRotation:
    return CyclicRotation(n, a)


def torus_rotation(alpha) -> TorusRotation:
    return TorusRotation(alpha)


def weyl_tower(d: int, alpha: float = GOLDEN) -> WeylTower:
    return WeylTower(d, alpha)


# -- cocycles -------------------------------------------------------------------------

@dataclass
class Cocycle:
    """beta(n, x), given on the generator and extended by the cocycle identity.

    ``closed_form(n, x)``, when present, is used instead of iterating the
    generator.  It is trusted, not checked; ``cocycle_check`` is the check.
    """

    base: System
    A: object
    generator: Callable
    closed_form: Callable | None = None
    name: str = "cocycle"
    meta: dict = field(default_factory=dict)

    def __call__(self, n: int, x):
        return self.eval(n, x)

    def eval(self, n: int, x):
        n = int(n)
        if self.closed_form is not None:
            return self.A.reduce(self.closed_form(n, x))
        A = self.A
        if n == 0:
            return A.zero()
        if n < 0:
            return A.neg(self.eval(-n, self.base.act(n, x)))
        total = A.zero()
        for _ in range(n):
            total = A.add(total, self.generator(x))
            x = self.base.act(1, x)
        return total


def zero_cocycle(base: System, A=None) -> Cocycle:
    A = A or TorusGroup(1)
    return Cocycle(base, A, lambda x: A.zero(), lambda n, x: A.zero(), name="zero")


def constant_cocycle(base: System, lam, A=None) -> Cocycle:
    A = A or TorusGroup(1)
    lam = A.reduce(np.atleast_1d(np.asarray(lam, dtype=float))) if A.kind == "torus" else lam
    return Cocycle(base, A, lambda x: lam, lambda n, x: A.scale(n, lam), name="constant",
                   meta={"lambda": np.atleast_1d(lam).tolist()})


def skew_cocycle(base: TorusRotation) -> Cocycle:
    """beta(1, x) = x_1 over a rotation; beta(n, x) = n x_1 + C(n, 2) alpha_1."""
    if not isinstance(base, TorusRotation):
        raise CocycleError("the skew cocycle lives over a torus rotation")
    A = TorusGroup(1)
    alpha = float(base.alpha[0])

    def closed(n, x):
        x0 = float(np.atleast_1d(x)[0])
        return np.array([frac_mul(n, x0) + frac_mul(binom(n, 2), alpha)])

    return Cocycle(base, A, lambda x: np.array([float(np.atleast_1d(x)[0])]), closed, name="skew")


def broken_skew_cocycle(base: TorusRotation) -> Cocycle:
    """beta(n, x) = n x, which is not a cocycle (the alpha term is missing)."""
    A = TorusGroup(1)
    return Cocycle(base, A, lambda x: np.array([float(np.atleast_1d(x)[0])]),
                   lambda n, x: np.array([frac_mul(n, float(np.atleast_1d(x)[0]))]),
                   name="broken")


@dataclass(frozen=True)
class StepFunction:
    """h(x) = jump on [at, at + width) (mod 1), 0 elsewhere; values in T^1."""

    jump: float = 0.5
    at: float = 0.0
    width: float = 0.5

    def __call__(self, x):
        x0 = np.asarray(x, dtype=float)
        if x0.ndim >= 1 and x0.shape[-1] == 1:
            x0 = x0[..., 0]
        inside = np.mod(x0 - self.at, 1.0) < self.width
        return np.where(inside, self.jump, 0.0)

    def discontinuities(self) -> tuple[float, float]:
        return (self.at % 1.0, (self.at + self.width) % 1.0)

    def to_json(self):
        return {"h": "step", "jump": self.jump, "at": self.at, "width": self.width}


def coboundary_twist(beta: Cocycle, h: Callable) -> Cocycle:
    """beta'(n, x) = beta(n, x) + h(T^n x) - h(x)."""
    A, base = beta.A, beta.base

    def hv(x):
        return np.atleast_1d(np.asarray(h(x), dtype=float)) if A.kind == "torus" else h(x)

    def gen(x):
        return A.add(beta.eval(1, x), A.sub(hv(base.act(1, x)), hv(x)))

    def closed(n, x):
        return A.add(beta.eval(n, x), A.sub(hv(base.act(n, x)), hv(x)))

    meta = dict(beta.meta)
    meta["twist"] = h.to_json() if hasattr(h, "to_json") else repr(h)
    return Cocycle(base, A, gen, closed, name=f"{beta.name}+twist", meta=meta)


def cocycle_check(beta: Cocycle, n_samples: int, rng, max_step: int = 5) -> float:
    """max over sampled (t, t', y) of d(beta(t+t', y), beta(t, t'y) + beta(t', y))."""
    A, base = beta.A, beta.base
    worst = 0.0
    for _ in range(n_samples):
        t, tp = (int(v) for v in rng.integers(-max_step, max_step + 1, size=2))
        y = base.sample(rng)
        lhs = beta.eval(t + tp, y)
        rhs = A.add(beta.eval(t, base.act(tp, y)), beta.eval(tp, y))
        worst = max(worst, A.dist(lhs, rhs))
    return worst


class SkewExtension(System):
    """Y = X x A with t(x, u) = (tx, u + beta(t, x)); points are (x, u) pairs."""

    def __init__(self, beta: Cocycle, check_samples: int = 64, rng=None, tol: float = 1e-9):
        self.beta = beta
        self.base = beta.base
        self.A = beta.A
        self.kind = "skew"
        if check_samples:
            rng = rng if rng is not None else np.random.default_rng(0)
            dev = cocycle_check(beta, check_samples, rng)
            if dev > tol:
                raise CocycleError(f"cocycle identity fails (max deviation {dev:.3g})")

    def act(self, n: int, p):
        x, u = p
        return (self.base.act(n, x), self.A.add(u, self.beta.eval(n, x)))

    def translate(self, p, a):
        x, u = p
        return (x, self.A.add(u, a))

    def project(self, p):
        return p[0]

    def sample(self, rng):
        return (self.base.sample(rng), self.A.haar(rng))

    def dist(self, p, q):
        return max(self.base.dist(p[0], q[0]), self.A.dist(p[1], q[1]))

    def to_json(self):
        return {"system": "skew", "base": self.base.to_json(), "cocycle": self.beta.name,
                **self.beta.meta}


def skew_extension(beta: Cocycle, **kw) -> SkewExtension:
    return SkewExtension(beta, **kw)


def skew_torus(alpha: float = GOLDEN) -> SkewExtension:
    return SkewExtension(skew_cocycle(TorusRotation(alpha)))


def product_extension(alpha: float = GOLDEN) -> SkewExtension:
    return SkewExtension(zero_cocycle(TorusRotation(alpha)))


def twisted_skew_torus(alpha: float = GOLDEN, h: Callable | None = None) -> SkewExtension:
    h = h or StepFunction()
    return SkewExtension(coboundary_twist(skew_cocycle(TorusRotation(alpha)), h))


def system_from_json(spec: dict) -> System:
    """Build a system from a config dict; raises KeyError/ValueError on bad input."""
    tag = spec.get("system")
    if tag == "cyclic":
        return CyclicRotation(int(spec["n"]), int(spec.get("a", 1)))
    if tag == "rotation":
        return TorusRotation(spec.get("alpha", GOLDEN))
    if tag == "weyl":
        return WeylTower(int(spec["d"]), float(spec.get("alpha", GOLDEN)))
    if tag in ("skew_torus", "product", "twisted_skew_torus"):
        alpha = float(spec.get("alpha", GOLDEN))
        if tag == "product":
            beta = zero_cocycle(TorusRotation(alpha))
        else:
            beta = skew_cocycle(TorusRotation(alpha))
        twist = spec.get("twist")
        if tag == "twisted_skew_torus" and twist is None:
            twist = {"h": "step"}
        if twist is not None:
            beta = coboundary_twist(beta, twist_from_json(twist))
        if spec.get("broken"):
            beta = broken_skew_cocycle(TorusRotation(alpha))
        return SkewExtension(beta)
    raise SystemSpecError(f"unknown system tag {tag!r}")


def twist_from_json(spec: dict) -> StepFunction:
    if spec.get("h") != "step":
        raise SystemSpecError(f"unknown twist {spec.get('h')!r}")
    return StepFunction(float(spec.get("jump", 0.5)), float(spec.get("at", 0.0)),
                        float(spec.get("width", 0.5)))
