"""Polynomial B-splines of integer order on uniform integer knots.

The order-N basis is the (N+1)-fold convolution of the unit box and is
supported on [0, N+1). Its restriction to [k, k+1) is stored exactly, as
``Fraction`` coefficients of a polynomial in the local variable ``u = t - k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .lti import RationalFilter

MAX_ORDER = 15

Poly = tuple  # ascending Fraction coefficients


def _antiderivative(p: Poly) -> Poly:
    return (Fraction(0),) + tuple(c / (i + 1) for i, c in enumerate(p))


def _peval(p: Poly, u) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * u + c
    return acc


def _padd(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    p = p + (Fraction(0),) * (n - len(p))
    q = q + (Fraction(0),) * (n - len(q))
    return tuple(a + b for a, b in zip(p, q))


def _pmul(p: Poly, q: Poly) -> Poly:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


@lru_cache(maxsize=None)
def _pieces(order: int) -> tuple[Poly, ...]:
    if order == 0:
        return ((Fraction(1),),)
    prev = _pieces(order - 1)
    anti = [_antiderivative(p) for p in prev]
    out = []
    # phi_N(k + u) = int_{k-1+u}^{k} phi_{N-1} + int_{k}^{k+u} phi_{N-1}
    for k in range(order + 1):
        poly: Poly = (Fraction(0),)
        if k - 1 >= 0:
            P = anti[k - 1]
            poly = _padd(poly, (_peval(P, 1),))
            poly = _padd(poly, tuple(-c for c in P))
        if k < order:
            poly = _padd(poly, anti[k])
        out.append(poly[: order + 1] + (Fraction(0),) * (order + 1 - len(poly)))
    return tuple(out)


@dataclass(frozen=True)
class RieszBounds:
    a: float
    b: float

    @property
    def lam(self) -> float:
        return self.b / self.a


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """B-spline of a given order.

    ``sampled_fir`` holds the integer samples ``phi(lag), ..., phi(N)`` as an
    FIR filter with the first nonzero sample at ``z^0``; ``lag`` is 1 for
    N >= 1 (since phi(0) = 0) and 0 for the box.
    """

    order: int
    pieces: tuple
    sampled_fir: RationalFilter
    lag: int

    @property
    def support(self) -> tuple[int, int]:
        return 0, self.order + 1

    def coefficient_table(self) -> np.ndarray:
        """Float copy of the piece coefficients, shape (N+1, N+1)."""
        return np.array([[float(c) for c in p] for p in self.pieces])

    def exact(self, t: Fraction | int) -> Fraction:
        t = Fraction(t)
        k = int(np.floor(t))
        if k < 0 or k > self.order:
            return Fraction(0)
        return _peval(self.pieces[k], t - k)

    def __call__(self, t, derivative: int = 0):
        return evaluate(self, t, derivative)

    def gram(self) -> np.ndarray:
        """Exact Gram sequence g(n) = int phi(t) phi(t - n) dt, n = -N..N."""
        return np.array([float(g) for g in gram_sequence(self)])

    def __repr__(self):
        return f"SplineBasis(order={self.order})"


def make_basis(order: int) -> SplineBasis:
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise ValueError(f"spline order must be an integer in [0, {MAX_ORDER}]")
    order = int(order)
    pieces = _pieces(order)
    lag = 0 if order == 0 else 1
    samples = [_peval(pieces[k], 0) for k in range(lag, order + 1)]
    return SplineBasis(order, pieces, RationalFilter([float(s) for s in samples]), lag)


def evaluate(basis: SplineBasis, t, derivative: int = 0):
    """Evaluate the basis (or one of its derivatives) at real ``t``."""
    t = np.asarray(t, dtype=float)
    table = basis.coefficient_table()
    for _ in range(derivative):
        table = table[:, 1:] * np.arange(1, table.shape[1])
        if table.shape[1] == 0:
            table = np.zeros((basis.order + 1, 1))
    k = np.floor(t)
    inside = (k >= 0) & (k <= basis.order)
    kk = np.where(inside, k, 0).astype(int)
    u = t - k
    acc = np.zeros_like(t)
    for j in range(table.shape[1] - 1, -1, -1):
        acc = acc * u + table[kk, j]
    out = np.where(inside, acc, 0.0)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _gram_exact(order: int) -> tuple[Fraction, ...]:
    pieces = _pieces(order)
    out = []
    for n in range(-order, order + 1):
        total = Fraction(0)
        for k in range(order + 1):
            j = k - n
            if 0 <= j <= order:
                prod = _pmul(pieces[k], pieces[j])
                total += _peval(_antiderivative(prod), 1)
        out.append(total)
    return tuple(out)


def gram_sequence(basis: SplineBasis) -> tuple[Fraction, ...]:
    return _gram_exact(basis.order)


def gram_symbol(basis: SplineBasis, theta) -> np.ndarray:
    """Real symbol sum_n g(n) e^{-j n theta} = sum_k |Phi(theta + 2 pi k)|^2."""
    g = basis.gram()
    N = basis.order
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, g[N])
    for n in range(1, N + 1):
        out = out + 2.0 * g[N + n] * np.cos(n * theta)
    return out


def riesz_bounds(basis: SplineBasis, grid_size: int = 1024) -> RieszBounds:
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    theta = np.linspace(0.0, np.pi, grid_size // 2 + 1)
    sym = gram_symbol(basis, theta)
    return RieszBounds(float(np.sqrt(sym.min())), float(np.sqrt(sym.max())))
