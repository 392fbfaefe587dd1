"""Independent reference computations used by the tests.

None of these reuse the algorithms under test: B-splines come from repeated
numerical integration, SDP optima from bisection on eigenvalues, filter
values from term-by-term evaluation.
"""
from math import comb, factorial

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.optimize import minimize, minimize_scalar

from hinfspline import sdp
from hinfspline.lti import RationalFilter


# -- B-splines ------------------------------------------------------------------

def box_convolution(N, K=1000):
    """(N+1)-fold convolution of the unit box on the grid j / K.

    phi_N(t) = int_{t-1}^{t} phi_{N-1}, evaluated as a difference of
    cumulative Simpson integrals. Knots fall on grid points, so each panel
    sees a single polynomial piece.
    """
    t = np.arange((N + 1) * K + 1) / K
    if N == 0:
        return t, (t < 1).astype(float)
    Phi = np.clip(t, 0.0, 1.0)
    phi = Phi - np.concatenate([np.zeros(K), Phi[:-K]])
    for _ in range(2, N + 1):
        Phi = cumulative_simpson(phi, dx=1.0 / K, initial=0.0)
        phi = Phi - np.concatenate([np.zeros(K), Phi[:-K]])
    return t, phi


def truncated_power(N, t):
    """phi_N(t) = (1/N!) sum_k (-1)^k C(N+1, k) (t - k)_+^N."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for k in range(N + 2):
        out += (-1) ** k * comb(N + 1, k) * np.where(t >= k, np.abs(t - k) ** N, 0.0)
    out = out / factorial(N)
    return np.where((t >= 0) & (t < N + 1), out, 0.0)


# -- filters --------------------------------------------------------------------

def direct_eval(num, den, z):
    """Evaluate sum num_k z^-k / sum den_k z^-k term by term."""
    z = np.asarray(z, dtype=complex)
    n = sum(c * z ** (-k) for k, c in enumerate(num))
    d = sum(c * z ** (-k) for k, c in enumerate(den))
    return n / d


def random_stable_filter(rng, order, radius=0.9, n_num=None):
    """Real filter with ``order`` poles of modulus < radius."""
    poles = []
    while len(poles) < order:
        r = radius * np.sqrt(rng.random())
        if order - len(poles) >= 2 and rng.random() < 0.5:
            th = rng.uniform(0, np.pi)
            poles += [r * np.exp(1j * th), r * np.exp(-1j * th)]
        else:
            poles.append(r * rng.choice([-1.0, 1.0]))
    den = np.real(np.poly(poles)) if poles else np.ones(1)
    num = rng.standard_normal(n_num if n_num is not None else order + 1)
    return RationalFilter(num, den)


# -- SDP ------------------------------------------------------------------------

BOX_RADIUS = 3.0


def random_sdp(seed, size=6):
    """Two-variable SDP with a strictly feasible random LMI of the given size
    and a box |x_i| <= 3 keeping the optimum bounded."""
    rng = np.random.default_rng(seed)
    m = 2
    Fs = rng.standard_normal((m, size, size))
    Fs = (Fs + Fs.transpose(0, 2, 1)) / 2
    x0 = rng.uniform(-1, 1, m)
    F0 = -np.einsum("i,ijk->jk", x0, Fs) - (0.5 + rng.random()) * np.eye(size)
    box = np.zeros((m + 1, 2 * m, 2 * m))
    for i in range(m):
        box[0, 2 * i, 2 * i] = box[0, 2 * i + 1, 2 * i + 1] = -BOX_RADIUS
        box[i + 1, 2 * i, 2 * i] = 1.0
        box[i + 1, 2 * i + 1, 2 * i + 1] = -1.0
    c = rng.standard_normal(m)
    return sdp.SdpProblem(c, [np.concatenate([F0[None], Fs]), box])


def lambda_max(problem, x):
    x = np.asarray(x, dtype=float)
    return max(np.linalg.eigvalsh(F[0] + np.einsum("i,ijk->jk", x, F[1:]))[-1]
               for F in problem.blocks)


def brute_force_optimum(problem, iters=70):
    """Bisection on the level t of c'x.

    The level is feasible iff the minimum of lambda_max over the line
    c'x = t is <= 0; that minimum is a convex 1-D problem.
    """
    c = problem.c
    nc = np.linalg.norm(c)
    u = c / nc
    v = np.array([-u[1], u[0]])
    span = 2.5 * BOX_RADIUS

    def level(t):
        return minimize_scalar(lambda s: lambda_max(problem, t * u / nc + s * v),
                               bounds=(-span, span), method="bounded",
                               options={"xatol": 1e-12}).fun

    xf = minimize(lambda x: lambda_max(problem, x), np.zeros(2), method="Nelder-Mead",
                  options=dict(xatol=1e-10, fatol=1e-12)).x
    assert lambda_max(problem, xf) < 0
    lo, hi = -nc * span, float(c @ xf)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if level(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi
