"""Discrete-time SISO LTI building blocks.

Transfer functions are stored as coefficient arrays in ascending powers of
``z^-1``::

    H(z) = (b[0] + b[1] z^-1 + ... + b[m] z^-m) / (a[0] + a[1] z^-1 + ... + a[n] z^-n)

Every file format and every function in this package uses that ordering.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.signal

logger = logging.getLogger(__name__)

TOL_STABILITY = 1e-9
BISECTION_WIDTH = 1e-8
GRID_POINTS = 1 << 14


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _strip(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


@dataclass(frozen=True)
class RationalFilter:
    """Real rational transfer function in ``z^-1`` (ascending coefficients).

    The constructor normalizes ``den[0]`` to 1 and strips trailing zero
    coefficients, so equal filters written differently compare by value.
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float)).ravel()
        den = np.atleast_1d(np.asarray(self.den, dtype=float)).ravel()
        if num.size == 0 or den.size == 0:
            raise ValueError("numerator and denominator must be non-empty")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("coefficients must be finite")
        if den[0] == 0.0:
            raise ValueError(
                "non-causal filter: denominator constant coefficient is zero "
                f"(den={den.tolist()})")
        num, den = num / den[0], den / den[0]
        object.__setattr__(self, "num", _frozen(_strip(num)))
        object.__setattr__(self, "den", _frozen(_strip(den)))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "RationalFilter":
        return cls([c])

    @classmethod
    def delay(cls, d: int) -> "RationalFilter":
        if d < 0:
            raise ValueError("delay must be non-negative")
        num = np.zeros(d + 1)
        num[d] = 1.0
        return cls(num)

    @classmethod
    def fir(cls, taps: Sequence[float]) -> "RationalFilter":
        return cls(taps)

    @classmethod
    def from_dict(cls, d: dict) -> "RationalFilter":
        return cls(d["num"], d.get("den", [1.0]))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RationalFilter":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"num": self.num.tolist(), "den": self.den.tolist()}

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    # -- properties ---------------------------------------------------------
    @property
    def is_fir(self) -> bool:
        return self.den.size == 1

    @property
    def order(self) -> int:
        return max(self.num.size, self.den.size) - 1

    def poles(self) -> np.ndarray:
        # den in ascending z^-1 is the z-polynomial in descending powers
        return np.roots(self.den) if self.den.size > 1 else np.zeros(0)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num) if self.num.size > 1 else np.zeros(0)

    def __call__(self, z):
        """Evaluate at complex ``z`` (scalar or array)."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            zi = 1.0 / z
            return (np.polynomial.polynomial.polyval(zi, self.num)
                    / np.polynomial.polynomial.polyval(zi, self.den))

    # -- algebra ------------------------------------------------------------
    def __mul__(self, other):
        if np.isscalar(other):
            return RationalFilter(self.num * other, self.den)
        return series(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        if np.isscalar(other):
            other = RationalFilter.constant(other)
        if np.array_equal(self.den, other.den):
            n = max(self.num.size, other.num.size)
            return RationalFilter(np.pad(self.num, (0, n - self.num.size))
                                  + np.pad(other.num, (0, n - other.num.size)),
                                  self.den)
        a = np.convolve(self.num, other.den)
        b = np.convolve(other.num, self.den)
        n = max(a.size, b.size)
        return RationalFilter(np.pad(a, (0, n - a.size)) + np.pad(b, (0, n - b.size)),
                              np.convolve(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return RationalFilter(-self.num, self.den)

    def __sub__(self, other):
        if np.isscalar(other):
            other = RationalFilter.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __eq__(self, other):
        if not isinstance(other, RationalFilter):
            return NotImplemented
        return (np.array_equal(self.num, other.num)
                and np.array_equal(self.den, other.den))

    def __hash__(self):
        return hash((self.num.tobytes(), self.den.tobytes()))

    def __repr__(self):
        return f"RationalFilter(num={self.num.tolist()}, den={self.den.tolist()})"


@dataclass(frozen=True)
class StateSpace:
    """Discrete-time realization ``C (zI - A)^-1 B + D``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = 0 if A.size == 0 else A.shape[0]
        A = A.reshape(n, n)
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, _frozen(val))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def is_stable(self, tol: float = TOL_STABILITY) -> bool:
        if self.n_states == 0:
            return True
        return bool(np.all(np.abs(np.linalg.eigvals(self.A)) < 1.0 - tol))

    def __call__(self, z):
        """SISO transfer value at complex ``z`` (scalar or 1-D array)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = self.n_states
        d = self.D[0, 0]
        if n == 0:
            return np.full(z.shape, d, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        eye = np.eye(n)
        # chunked batched solves keep memory bounded for dense grids
        for lo in range(0, z.size, 2048):
            zz = z[lo:lo + 2048]
            M = zz[:, None, None] * eye - self.A
            rhs = np.broadcast_to(self.B[:, :1], (zz.size, n, 1))
            x = np.linalg.solve(M, rhs)[:, :, 0]
            out[lo:lo + 2048] = x @ self.C[0] + d
        return out


@dataclass(frozen=True)
class FrequencyResponse:
    grid: np.ndarray
    values: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude)

    @property
    def nonfinite(self) -> np.ndarray:
        """Mask of samples that hit a pole on the unit circle."""
        return ~np.isfinite(self.values)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "re", "im", "mag_db"])
            for th, v, db in zip(self.grid, self.values, self.magnitude_db):
                w.writerow([repr(float(th)), repr(float(v.real)),
                            repr(float(v.imag)), repr(float(db))])


System = Union[RationalFilter, StateSpace]


def realize(f: RationalFilter) -> StateSpace:
    """Controllable-canonical realization of a causal rational filter.

    The state dimension is ``max(len(num), len(den)) - 1``.
    """
    if not isinstance(f, RationalFilter):
        raise TypeError("realize expects a RationalFilter")
    if f.den[0] == 0.0:
        raise ValueError("cannot realize a non-causal filter")
    n = f.order
    b = np.pad(f.num, (0, n + 1 - f.num.size))
    a = np.pad(f.den, (0, n + 1 - f.den.size))
    d = b[0]
    A = np.zeros((n, n))
    if n:
        A[0, :] = -a[1:]
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    if n:
        B[0, 0] = 1.0
    C = (b[1:] - d * a[1:]).reshape(1, n)
    return StateSpace(A, B, C, [[d]])


def series(f: RationalFilter, g: RationalFilter) -> RationalFilter:
    """Cascade ``f(z) g(z)`` by polynomial convolution."""
    return RationalFilter(np.convolve(f.num, g.num), np.convolve(f.den, g.den))


def error_system(psi: RationalFilter, phi: RationalFilter, delay: int,
                 weight: RationalFilter | None = None) -> RationalFilter:
    """Weighted reconstruction error ``(z^-d - psi(z) phi(z)) w(z)``."""
    e = RationalFilter.delay(delay) - series(psi, phi)
    return e if weight is None else series(e, weight)


def is_stable(f: System, tol: float = TOL_STABILITY) -> bool:
    if isinstance(f, StateSpace):
        return f.is_stable(tol)
    p = f.poles()
    return bool(np.all(np.abs(p) < 1.0 - tol))


def frequency_response(f: System, grid_size: int) -> FrequencyResponse:
    """Evaluate on the uniform grid ``theta_k = 2 pi k / grid_size``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    theta = 2.0 * np.pi * np.arange(grid_size) / grid_size
    return FrequencyResponse(_frozen(theta), f(np.exp(1j * theta)))


def apply(f: RationalFilter, x, tail: int = 0) -> np.ndarray:
    """Causal filtering of ``x`` (zero initial state), optionally extended by
    ``tail`` zero input samples."""
    x = np.asarray(x, dtype=float)
    if tail:
        x = np.concatenate([x, np.zeros(tail)])
    return scipy.signal.lfilter(f.num, f.den, x)


# -- H-infinity norm ----------------------------------------------------------

def _as_ss(f: System) -> StateSpace:
    return f if isinstance(f, StateSpace) else realize(f)


def _balanced(ss: StateSpace) -> StateSpace:
    """Diagonal similarity that equilibrates A; companion forms of
    high-gain filters are badly scaled otherwise."""
    if ss.n_states == 0:
        return ss
    _, (scale, _) = scipy.linalg.matrix_balance(ss.A, permute=False, separate=True)
    A = ss.A * scale[None, :] / scale[:, None]
    return StateSpace(A, ss.B / scale[:, None], ss.C * scale[None, :], ss.D)


def _crossing_angles(ss: StateSpace, gamma: float, tol: float = 1e-4) -> np.ndarray:
    """Candidate frequencies where ``gamma`` may be a singular value of
    G(e^jw): angles of the near-unimodular eigenvalues of the symplectic
    pencil of ``gamma^2 I - G~(z) G(z)``.

    The pencil is written so that no inverse of A is needed (A is singular
    for FIR systems). ``tol`` is loose on purpose; callers confirm each
    candidate by evaluating the gain.
    """
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    n, m = B.shape
    Z = np.zeros
    M0 = np.block([
        [A, Z((n, n)), B],
        [Z((n, n)), np.eye(n), Z((n, m))],
        [D.T @ C, B.T, D.T @ D - gamma**2 * np.eye(m)],
    ])
    Mz = np.block([
        [np.eye(n), Z((n, n)), Z((n, m))],
        [C.T @ C, A.T, C.T @ D],
        [Z((m, n)), Z((m, n)), Z((m, m))],
    ])
    alpha, beta = scipy.linalg.eig(M0, Mz, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-12 * np.maximum(np.abs(alpha), 1.0)
    lam = alpha[finite] / beta[finite]
    return np.abs(np.angle(lam[np.abs(np.abs(lam) - 1.0) < tol]))


def _gain(ss: StateSpace, theta) -> np.ndarray:
    return np.abs(ss(np.exp(1j * np.asarray(theta, dtype=float))))


def _attained(ss: StateSpace, angles: np.ndarray) -> float:
    """Largest gain found near the candidate angles and between consecutive
    ones (where a peak lies when both are genuine crossings)."""
    if angles.size == 0:
        return 0.0
    angles = np.unique(np.round(angles, 12))
    best = float(_gain(ss, angles).max())
    edges = np.concatenate([[max(angles[0] - 1e-3, 0.0)], angles, [min(angles[-1] + 1e-3, np.pi)]])
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            _, val = _golden_max(lambda t: float(_gain(ss, t)[0]), lo, hi, tol=1e-13)
            best = max(best, val)
    return best


def hinf_norm_bisection(f: System, width: float = BISECTION_WIDTH) -> float:
    """Peak gain by bisection on the unit-circle crossing test.

    ``lo`` is always a gain actually evaluated on the circle. At each trial
    level the pencil's candidate crossings are checked by evaluating the
    gain near them: a gain at or above the level raises ``lo`` to that
    value, otherwise the level becomes the new upper bound. Stops when the
    bracket is narrower than ``width`` relative to ``max(1, lo)``.
    """
    ss = _as_ss(f)
    if not ss.is_stable():
        raise ValueError("H-infinity norm is only defined here for stable systems")
    d = abs(ss.D[0, 0])
    if ss.n_states == 0:
        return d
    ss = _balanced(ss)
    probe = np.concatenate([np.linspace(0.0, np.pi, 65),
                            np.abs(np.angle(np.linalg.eigvals(ss.A)))])
    lo = max(d, float(_gain(ss, probe).max()))
    hi = 2.0 * lo if lo > 0.0 else 1.0
    while _attained(ss, _crossing_angles(ss, hi)) >= hi:
        lo, hi = hi, 2.0 * hi
    while hi - lo > width * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        g = _attained(ss, _crossing_angles(ss, mid))
        if g >= mid:
            lo = g
        else:
            hi = mid
    return lo


def _golden_max(fun, a: float, b: float, tol: float = 1e-12) -> tuple[float, float]:
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def hinf_norm_grid(f: System, grid_size: int = GRID_POINTS, refine: int = 4) -> float:
    """Peak gain by dense grid sweep plus golden-section refinement of the
    ``refine`` largest local maxima."""
    if not is_stable(f):
        raise ValueError("H-infinity norm is only defined here for stable systems")
    theta = 2.0 * np.pi * np.arange(grid_size) / grid_size
    mag = np.abs(f(np.exp(1j * theta)))
    h = theta[1] - theta[0]
    left, right = np.roll(mag, 1), np.roll(mag, -1)
    peaks = np.flatnonzero((mag >= left) & (mag >= right))
    peaks = peaks[np.argsort(mag[peaks])[::-1][:refine]]
    best = float(mag.max())
    for k in peaks:
        _, val = _golden_max(lambda t: float(np.abs(np.atleast_1d(f(np.exp(1j * t)))[0])),
                             theta[k] - h, theta[k] + h)
        best = max(best, float(val))
    return best


def hinf_norm(f: System, check: bool = True) -> float:
    """H-infinity norm of a stable system.

    Both methods return gains actually attained on the unit circle, so each
    is a lower bound. With ``check`` the grid sweep also runs and the larger
    value is returned; a relative disagreement above 1e-6 is logged, which
    happens only when the pencil is too ill-conditioned to locate a
    crossing.
    """
    value = hinf_norm_bisection(f)
    if check:
        ref = hinf_norm_grid(f)
        if abs(ref - value) > 1e-6 * max(1.0, value):
            logger.warning("hinf_norm: bisection %.12g vs grid %.12g", value, ref)
        value = max(value, ref)
    return value
