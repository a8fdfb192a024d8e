"""Gowers / Host-Kra seminorms and nonconventional ergodic averages.

Complex functions are conjugated at odd-weight vertices, which makes every
seminorm average real and nonnegative; for real functions this is the usual
definition.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

import numpy as np

from .cube import signs, vertices, weight
from .cubespace import sample_cube, vertex_matrix
from .systems import CyclicRotation, TorusRotation, System, e, frac

NAIVE_CAP = 1 << 24      # entries of the (x, h_1..h_{k-1}) tensor
RECURSIVE_CAP = 1 << 26  # total work N^k
IMAG_TOL = 1e-10
_CHUNK = 1 << 22


class SizeCapError(ValueError):
    pass


class NonRealAverage(ArithmeticError):
    pass


# -- observables -------------------------------------------------------------------------

class Observable:
    """A bounded function on system points (torus coordinates or Z/N residues)."""

    sup = 1.0
    kind = "observable"

    def __call__(self, x):
        raise NotImplementedError

    def on_cyclic(self, N: int) -> np.ndarray:
        return np.asarray(self(np.arange(N)), dtype=complex)

    def to_json(self) -> dict:
        return {"f": self.kind}


class Character(Observable):
    kind = "char"

    def __init__(self, xi: int, N: int | None = None):
        self.xi, self.N = int(xi), N

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return e(self.xi * x / self.N) if self.N else e(self.xi * x)

    def on_cyclic(self, N):
        return e(self.xi * np.arange(N) / N)

    def to_json(self):
        return {"f": "char", "xi": self.xi}


class QuadraticPhase(Observable):
    """e(a x^2 / N) on Z/N."""

    kind = "quad"

    def __init__(self, a: int, N: int | None = None):
        self.a, self.N = int(a), N

    def on_cyclic(self, N):
        x = np.arange(N, dtype=np.int64)
        return e(((self.a * x * x) % N) / N)

    def __call__(self, x):
        if self.N is None:
            raise ValueError("quadratic phase needs N")
        x = np.asarray(x, dtype=np.int64)
        return e(((self.a * x * x) % self.N) / self.N)

    def to_json(self):
        return {"f": "quad", "a": self.a}


class Arc(Observable):
    """Indicator of [lo, hi) on the torus; on Z/N of {x : x/N in [lo, hi)}."""

    kind = "arc"

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = float(lo), float(hi)

    def __call__(self, x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return ((x >= self.lo) & (x < self.hi)).astype(complex)

    def on_cyclic(self, N):
        return self(np.arange(N) / N)

    def to_json(self):
        return {"f": "arc", "lo": self.lo, "hi": self.hi}


class Table(Observable):
    kind = "table"

    def __init__(self, values):
        self.values = np.asarray(values, dtype=complex)
        self.sup = float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __call__(self, x):
        return self.values[np.asarray(x, dtype=np.int64) % len(self.values)]

    def on_cyclic(self, N):
        if N != len(self.values):
            raise ValueError(f"table has {len(self.values)} entries, system has {N} points")
        return self.values.copy()

    def to_json(self):
        vals = self.values
        if np.all(vals.imag == 0):
            return {"f": "table", "values": vals.real.tolist()}
        return {"f": "table", "values": [[v.real, v.imag] for v in vals]}


class TrigPolynomial(Observable):
    """sum_xi c_xi e(xi x) on T^1."""

    kind = "trig"

    def __init__(self, coeffs: dict):
        self.coeffs = {int(k): complex(v) for k, v in coeffs.items() if v != 0}
        self.sup = float(sum(abs(v) for v in self.coeffs.values()))

    @classmethod
    def constant(cls, c=1.0):
        return cls({0: c})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for xi, c in self.coeffs.items():
            out += c * e(xi * x)
        return out

    def to_json(self):
        return {"f": "trig", "coeffs": [[k, v.real, v.imag] for k, v in sorted(self.coeffs.items())]}


def observable_from_json(spec: dict, N: int | None = None) -> Observable:
    tag = spec.get("f")
    if tag == "char":
        return Character(int(spec["xi"]), N)
    if tag == "quad":
        return QuadraticPhase(int(spec.get("a", 1)), N)
    if tag == "arc":
        return Arc(float(spec["lo"]), float(spec["hi"]))
    if tag == "table":
        vals = [complex(*v) if isinstance(v, list) else v for v in spec["values"]]
        return Table(vals)
    if tag == "trig":
        return TrigPolynomial({int(k): complex(re, im) for k, re, im in spec["coeffs"]})
    raise ValueError(f"unknown observable {tag!r}")


def _values(f, N: int | None) -> np.ndarray:
    if isinstance(f, Observable):
        if N is None:
            raise ValueError("an Observable needs N")
        return f.on_cyclic(N)
    return np.asarray(f)


# -- reports ---------------------------------------------------------------------------

@dataclass
class SeminormReport:
    k: int
    value: float
    method: str
    N: int | None = None
    samples: int | None = None
    stderr: float | None = None
    seed: int | None = None

    def to_json(self):
        return asdict(self)


def _root(avg: complex, k: int, method: str) -> float:
    scale = max(1.0, abs(avg.real))
    if abs(avg.imag) > IMAG_TOL * scale:
        raise NonRealAverage(f"{method}: inner average has imaginary part {avg.imag:.3g}")
    return max(avg.real, 0.0) ** (1.0 / (1 << k))


# -- exact seminorms on Z/N -----------------------------------------------------------------

def gowers_naive_power(f, k: int, N: int | None = None) -> complex:
    """E_{x,h} prod_v C^{|v|} f(x + h.v), summing every term of the average.

    Vertices with v_k = 0 are gathered one by one into the (x, h_1..h_{k-1})
    tensor P; the v_k = 1 vertices are conj P at x + h_k, so the full sum is the
    bilinear form sum_{h'} sum_{x, y} P[x, h'] conj P[y, h'].
    """
    f = _values(f, N)
    N = len(f)
    if k < 1:
        raise ValueError("k must be >= 1")
    if N ** k > NAIVE_CAP:
        raise SizeCapError(f"naive Gowers: N^k = {N ** k} exceeds {NAIVE_CAP}")
    real = np.isrealobj(f) or np.all(np.imag(f) == 0)
    f = np.real(f).astype(float) if real else f.astype(complex)
    if real and np.all(np.isin(f, (-1.0, 0.0, 1.0))):
        f = f.astype(np.int8)  # sign patterns: exact integer products, 8x less traffic
    circ = f[(np.arange(N)[:, None] + np.arange(N)[None, :]) % N]  # circ[s, x] = f(x + s)
    m = k - 1
    grid = np.indices((N,) * m).reshape(m, -1) if m else np.zeros((0, 1), dtype=np.int64)
    P = np.ones((grid.shape[1], N), dtype=f.dtype)
    for v in vertices(m):
        shift = (np.asarray(v, dtype=np.int64) @ grid) % N if m else np.zeros(1, dtype=np.int64)
        vals = circ[shift]
        P *= np.conj(vals) if weight(v) & 1 else vals
    if P.dtype == np.int8:
        col = P.sum(axis=1, dtype=np.int64)
        return complex(int(np.dot(col, col))) / N ** (k + 1)
    col = P.sum(axis=1)
    total = np.sum(col * np.conj(col))
    return complex(total) / N ** (k + 1)


def gowers_naive(f, k: int, N: int | None = None) -> SeminormReport:
    vals = _values(f, N)
    avg = gowers_naive_power(vals, k)
    return SeminormReport(k, _root(avg, k, "naive"), "naive", N=len(vals))


def _recursive_power(F: np.ndarray, k: int) -> np.ndarray:
    """|||F_b|||_k^{2^k} for a batch F of shape (B, N)."""
    if k == 1:
        m = F.sum(axis=1, dtype=np.int64) / F.shape[1] if F.dtype == np.int8 else F.mean(axis=1)
        return (m * np.conj(m)).real if np.iscomplexobj(m) else m * m
    B, N = F.shape
    shift_idx = (np.arange(N)[:, None] + np.arange(N)[None, :]) % N  # [h, x] -> x + h
    out = np.empty(B)
    step = max(1, _CHUNK // (N * N))
    for s in range(0, B, step):
        blk = F[s:s + step]
        shifted = blk[:, shift_idx]  # (b, h, x) = F(x + h)
        G = blk[:, None, :] * (shifted if F.dtype == np.int8 else np.conj(shifted))
        r = _recursive_power(G.reshape(-1, N), k - 1).reshape(len(blk), N)
        out[s:s + step] = r.mean(axis=1)
    return out


def gowers_recursive_power(f, k: int, N: int | None = None) -> float:
    """|||f|||_{k}^{2^k} = E_h |||f . conj(f(. + h))|||_{k-1}^{2^{k-1}}, base |E f|^2."""
    f = _values(f, N)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(f) ** k > RECURSIVE_CAP:
        raise SizeCapError(f"recursive Gowers: N^k = {len(f) ** k} exceeds {RECURSIVE_CAP}")
    real = np.isrealobj(f) or np.all(np.imag(f) == 0)
    F = np.real(f).astype(float) if real else f.astype(complex)
    if real and np.all(np.isin(F, (-1.0, 0.0, 1.0))):
        F = F.astype(np.int8)
    F = F[None, :]
    return float(_recursive_power(F, k)[0])


def gowers_recursive(f, k: int, N: int | None = None) -> SeminormReport:
    vals = _values(f, N)
    p = gowers_recursive_power(vals, k)
    return SeminormReport(k, max(p, 0.0) ** (1.0 / (1 << k)), "recursive", N=len(vals))


def fourier_u2_power(f, N: int | None = None) -> float:
    """sum_xi |f^(xi)|^4 with f^(xi) = E_x f(x) e(-x xi / N)."""
    f = _values(f, N)
    fh = np.fft.fft(f) / len(f)
    return float(np.sum(np.abs(fh) ** 4))


# -- empirical cube integrals -------------------------------------------------------------

@dataclass
class EmpiricalReport:
    estimate: complex
    stderr: float
    samples: int
    seed: int | None = None

    def to_json(self):
        return {"estimate": [self.estimate.real, self.estimate.imag], "stderr": self.stderr,
                "samples": self.samples, "seed": self.seed}


def _cube_points_batch(X: System, k: int, n: int, rng) -> np.ndarray:
    """(n, 2^k) array of cube vertices (1-dim systems only)."""
    V = vertex_matrix(k)
    if isinstance(X, TorusRotation) and X.d == 1:
        x = rng.random(n)
        t = rng.random((n, k))
        return frac(x[:, None] + t @ V.T)
    if isinstance(X, CyclicRotation):
        N = X.n_points
        x = rng.integers(0, N, size=n)
        t = (X.a * rng.integers(0, N, size=(n, k))) % N
        return (x[:, None] + t @ V.T) % N
    pts = []
    for _ in range(n):
        c = sample_cube(X, k, rng)
        pts.append([float(np.atleast_1d(p)[0]) for p in c.values])
    return np.array(pts)


def hk_integral_empirical(X: System, k: int, fs, n_samples: int, rng,
                          conjugate_odd: bool = False, seed: int | None = None) -> EmpiricalReport:
    """Monte-Carlo estimate of the integral of prod_v f_v(c_v) over random k-cubes."""
    if callable(fs):
        fs = [fs] * (1 << k)
    if len(fs) != 1 << k:
        raise ValueError(f"need {1 << k} observables, got {len(fs)}")
    pts = _cube_points_batch(X, k, n_samples, rng)
    prod = np.ones(n_samples, dtype=complex)
    for i, f in enumerate(fs):
        vals = np.asarray(f(pts[:, i]), dtype=complex)
        prod *= np.conj(vals) if conjugate_odd and weight(i) & 1 else vals
    est = prod.mean()
    err = float(np.sqrt(np.var(prod.real) + np.var(prod.imag)) / np.sqrt(n_samples)) \
        if n_samples > 1 else float("nan")
    return EmpiricalReport(complex(est), err, n_samples, seed)


# -- nonconventional averages ----------------------------------------------------------------

def nonconventional_average(X: TorusRotation, x, fs: Sequence[Callable], N: int,
                            checkpoints: Sequence[int] | None = None):
    """[(M, A_M)] with A_M = (1/M) sum_{n<M} prod_i f_i(T^{i n} x)."""
    if not isinstance(X, TorusRotation) or X.d != 1:
        raise TypeError("nonconventional averages are implemented for rotations of T^1")
    checkpoints = sorted(set(checkpoints or [N]))
    if checkpoints[-1] > N:
        raise ValueError("checkpoint beyond N")
    alpha = float(X.alpha[0])
    x0 = float(np.atleast_1d(x)[0])
    n = np.arange(N, dtype=np.float64)
    prod = np.ones(N, dtype=complex)
    for i, f in enumerate(fs, start=1):
        pts = frac(x0 + frac(i * n * alpha))
        prod *= np.asarray(f(pts), dtype=complex)
    csum = np.cumsum(prod)
    return [(int(M), complex(csum[M - 1] / M)) for M in checkpoints]


def kronecker_limit_rotation(fs: Sequence[TrigPolynomial], X: TorusRotation | None = None
                             ) -> TrigPolynomial:
    """Limit of the averages for an irrational rotation.

    Only frequency tuples with sum_i i xi_i = 0 survive the average; each
    contributes prod_i c_i(xi_i) e((sum_i xi_i) x).
    """
    for f in fs:
        if not isinstance(f, TrigPolynomial):
            raise TypeError("the rotation limit needs trigonometric polynomials")
    out: dict[int, complex] = {}
    items = [list(f.coeffs.items()) for f in fs]
    for combo in itertools.product(*items):
        if sum(i * xi for i, (xi, _) in enumerate(combo, start=1)) != 0:
            continue
        coef = np.prod([c for _, c in combo])
        freq = sum(xi for xi, _ in combo)
        out[freq] = out.get(freq, 0) + coef
    return TrigPolynomial(out)
