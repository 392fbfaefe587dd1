"""Closed-form results for the cubic spline.

With phi(z) = (1 + 4 z^-1 + z^-2) / 6 = (1 - a1 z^-1)(1 - a2 z^-1) / 6 the
exact inverse has a pole at a1 = -2 - sqrt(3), outside the unit disc. Two
ways around it live here: the classical two-sided (non-causal) inverse and
the causal filter of minimum worst-case error for a given delay.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lti import RationalFilter

SQRT3 = np.sqrt(3.0)
ALPHA1 = -2.0 - SQRT3
ALPHA2 = -2.0 + SQRT3


@dataclass(frozen=True)
class CubicConstants:
    alpha1: float = ALPHA1
    alpha2: float = ALPHA2


CUBIC = CubicConstants()
CUBIC_PHI = RationalFilter([1 / 6, 2 / 3, 1 / 6])


class NoncausalInverse(NamedTuple):
    """psi(z) = gain * (1/(1 - alpha z^-1) + 1/(1 - alpha z) - 1).

    ``causal`` is the first term as a filter in z^-1; ``anticausal`` holds the
    second term written in powers of z (it runs backwards in time).
    """

    causal: RationalFilter
    anticausal: RationalFilter
    gain: float
    alpha: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        a = self.alpha
        return self.gain * (1 / (1 - a / z) + 1 / (1 - a * z) - 1)

    def impulse_response(self, n):
        n = np.asarray(n)
        return self.gain * self.alpha ** np.abs(n)

    def filter(self, x) -> np.ndarray:
        """Apply to a finite sequence: forward recursion from a zero initial
        state, backward recursion from a zero final state."""
        x = np.asarray(x, dtype=float)
        a = self.alpha
        fwd = np.empty_like(x)
        bwd = np.empty_like(x)
        acc = 0.0
        for i in range(x.size):
            acc = x[i] + a * acc
            fwd[i] = acc
        acc = 0.0
        for i in range(x.size - 1, -1, -1):
            acc = x[i] + a * acc
            bwd[i] = acc
        return self.gain * (fwd + bwd - x)


def noncausal_inverse() -> NoncausalInverse:
    a = ALPHA2
    gain = -6.0 * a / (1.0 - a * a)
    one_pole = RationalFilter([1.0], [1.0, -a])
    return NoncausalInverse(one_pole, one_pole, gain, a)


def optimal_cubic(d: int) -> RationalFilter:
    """Causal stable psi minimizing ||z^-d - psi phi||_inf for the cubic spline.

    Returned in the cancelled form
    psi(z) = -6 a1^-d (sum_{j<d} a1^j z^-j) / (1 - a2 z^-1),
    so no pole-zero cancellation is left to floating point. ``d = 0`` gives
    the zero filter.
    """
    if d < 0:
        raise ValueError("delay must be non-negative")
    if d == 0:
        return RationalFilter([0.0])
    num = [-6.0 * ALPHA1 ** (j - d) for j in range(d)]
    return RationalFilter(num, [1.0, -ALPHA2])


def optimal_value(d: int) -> float:
    """Minimum achievable ||z^-d - psi phi||_inf, i.e. |a1|^-d = (2 - sqrt 3)^d."""
    if d < 0:
        raise ValueError("delay must be non-negative")
    return (2.0 - SQRT3) ** d


def interpolation_constraint_check(E: RationalFilter, d: int, tol: float = 1e-9) -> bool:
    """Whether E(a1) = a1^-d, the condition for psi to be stable."""
    return bool(abs(E(ALPHA1) - ALPHA1 ** (-d)) < tol)
