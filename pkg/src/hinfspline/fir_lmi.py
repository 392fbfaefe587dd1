"""FIR direct-filter design by H-infinity minimization over an LMI.

For an FIR ``psi(z) = a_0 + a_1 z^-1 + ... + a_M z^-M`` the weighted error
``E_w = (z^-d - psi phi) w`` has a realization whose A and B do not depend
on the taps and whose C and D are affine in them. The bounded-real lemma
then turns ``||E_w||_inf < gamma`` into an LMI that is jointly affine in
the Lyapunov matrix P, the taps and gamma, so minimizing gamma is one SDP.

Two realizations are provided. ``assemble_error_system`` keeps separate
blocks for psi, phi*w and z^-d*w, which makes the structure easy to check
but is not minimal: P is then unconstrained along unobservable directions
and the SDP becomes badly conditioned as the tap count grows.
``assemble_compact_system`` passes the input through w and then a single
shift register holding the FIR residual, and is what ``design_fir`` uses by
default.

Taps are ordered ascending (``a_0`` first) throughout the public API; row k
of ``C_lin`` / ``D_lin`` multiplies ``a_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la

from . import sdp
from .bspline import make_basis
from .lti import RationalFilter, StateSpace, hinf_norm, is_stable, realize, series

EPS_P = 1e-8


class InfeasibleDesignError(ValueError):
    """Raised when the zero constraints admit no tap vector."""


@dataclass(frozen=True)
class FirDesignProblem:
    spline_order: int
    taps: int
    delay: int
    weight: RationalFilter = field(default_factory=lambda: RationalFilter([1.0]))
    zero_constraints: tuple = ()

    def __post_init__(self):
        if self.taps < 1:
            raise ValueError("an FIR filter needs at least one tap")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if not is_stable(self.weight):
            raise ValueError("weight must be stable")
        pts = tuple(complex(z) for z in self.zero_constraints)
        for z in pts:
            if abs(z.imag) > 0 and not any(abs(w - z.conjugate()) < 1e-12 for w in pts):
                raise ValueError(f"zero constraint {z} must come with its conjugate")
        object.__setattr__(self, "zero_constraints", pts)

    @property
    def phi(self) -> RationalFilter:
        return make_basis(self.spline_order).sampled_fir


@dataclass(frozen=True)
class ErrorSystemAffine:
    A: np.ndarray
    B: np.ndarray
    C0: np.ndarray
    C_lin: np.ndarray
    D0: float
    D_lin: np.ndarray
    V_C: np.ndarray | None
    V_D: np.ndarray | None
    dims: tuple  # state block sizes, in order

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_taps(self) -> int:
        return self.C_lin.shape[0]

    def C(self, taps) -> np.ndarray:
        return np.asarray(taps, dtype=float) @ self.C_lin + self.C0

    def D(self, taps) -> float:
        return float(np.asarray(taps, dtype=float) @ self.D_lin + self.D0)

    def realize(self, taps) -> StateSpace:
        return StateSpace(self.A, self.B, self.C(taps).reshape(1, -1), [[self.D(taps)]])


def assemble_error_system(p: FirDesignProblem) -> ErrorSystemAffine:
    M = p.taps - 1
    A_psi = np.eye(M, k=1)
    B_psi = np.zeros((M, 1))
    if M:
        B_psi[-1, 0] = 1.0
    phi_w = realize(series(p.phi, p.weight))
    del_w = realize(series(RationalFilter.delay(p.delay), p.weight))
    n1, n2, n3 = M, phi_w.n_states, del_w.n_states
    Cphi, Dphi = phi_w.C, phi_w.D[0, 0]

    A = np.zeros((n1 + n2 + n3,) * 2)
    A[:n1, :n1] = A_psi
    A[:n1, n1:n1 + n2] = B_psi @ Cphi
    A[n1:n1 + n2, n1:n1 + n2] = phi_w.A
    A[n1 + n2:, n1 + n2:] = del_w.A
    B = np.vstack([-B_psi * Dphi, -phi_w.B, del_w.B])

    # psi states hold z^-M u, ..., z^-1 u, so column j carries a_{M-j}
    V_C = np.zeros((M + 1, M))
    for k in range(1, M + 1):
        V_C[k, M - k] = 1.0
    V_D = np.zeros((M + 1, 1))
    V_D[0, 0] = 1.0
    C_lin = np.hstack([V_C, V_D @ Cphi, np.zeros((M + 1, n3))])
    C0 = np.concatenate([np.zeros(n1 + n2), del_w.C[0]])
    D_lin = -V_D[:, 0] * Dphi
    return ErrorSystemAffine(A, B, C0, C_lin, float(del_w.D[0, 0]), D_lin, V_C, V_D,
                             (n1, n2, n3))


def assemble_compact_system(p: FirDesignProblem) -> ErrorSystemAffine:
    """Realization u -> w -> shift register of length L = max(M + N - 1, d).

    The output row holds the impulse response e of z^-d - psi*phi, which is
    affine in the taps; the register sees w*u, so A does not depend on them.
    """
    phi = p.phi.num
    M = p.taps - 1
    L = max(M + len(phi) - 1, p.delay)
    T = np.zeros((M + 1, L + 1))  # e = e_d - T' a
    for j in range(M + 1):
        T[j, j:j + len(phi)] = phi
    ed = np.zeros(L + 1)
    ed[p.delay] = 1.0

    w = realize(p.weight)
    nw = w.n_states
    Cw, Dw = w.C[0], w.D[0, 0]
    A = np.zeros((nw + L,) * 2)
    A[:nw, :nw] = w.A
    B = np.zeros((nw + L, 1))
    B[:nw] = w.B
    if L:
        A[nw, :nw] = Cw
        A[nw + 1:, nw:nw + L - 1] = np.eye(L - 1)
        B[nw, 0] = Dw
    C_lin = -np.hstack([np.outer(T[:, 0], Cw), T[:, 1:]])
    D_lin = -T[:, 0] * Dw
    C0 = np.concatenate([ed[0] * Cw, ed[1:]])
    return ErrorSystemAffine(A, B, C0, C_lin, float(ed[0] * Dw), D_lin, None, None, (nw, L))


def lmi_matrix(sys: ErrorSystemAffine, P, taps, gamma) -> np.ndarray:
    """Bounded-real LMI matrix; ``||E_w|| < gamma`` iff it is negative
    definite for some P > 0."""
    A, B = sys.A, sys.B
    C = sys.C(taps).reshape(1, -1)
    D = np.array([[sys.D(taps)]])
    g = np.array([[gamma]])
    return np.block([
        [A.T @ P @ A - P, A.T @ P @ B, C.T],
        [B.T @ P @ A, B.T @ P @ B - g, D.T],
        [C, D, -g],
    ])


def lmi_margin(sys: ErrorSystemAffine) -> float:
    return 1e-9 * (1.0 + np.linalg.norm(sys.A, 2)) if sys.n_states else 1e-9


class _Layout:
    """Decision vector [vech(P), taps (if free), gamma (if free)]."""

    def __init__(self, n, n_taps, free_taps, free_gamma):
        self.n = n
        self.iu = np.triu_indices(n)
        self.n_p = len(self.iu[0])
        self.n_taps = n_taps if free_taps else 0
        self.free_gamma = free_gamma
        self.size = self.n_p + self.n_taps + int(free_gamma)

    def P(self, x):
        P = np.zeros((self.n, self.n))
        P[self.iu] = x[:self.n_p]
        return P + np.triu(P, 1).T

    def taps(self, x):
        return x[self.n_p:self.n_p + self.n_taps]

    def gamma(self, x):
        return x[-1]


def _affine_blocks(fun, size):
    """Stack constant and linear coefficients of an affine matrix map."""
    F0 = fun(np.zeros(size))
    out = [F0]
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        out.append(fun(e) - F0)
    return np.array(out)


def _problem(sys, gamma=None, taps=None, A_eq=None, b_eq=None):
    lay = _Layout(sys.n_states, sys.n_taps, taps is None, gamma is None)
    eps = lmi_margin(sys)

    def lmi(x):
        t = lay.taps(x) if taps is None else taps
        g = lay.gamma(x) if gamma is None else gamma
        return lmi_matrix(sys, lay.P(x), t, g) + eps * np.eye(sys.n_states + 2)

    def pos(x):
        return -lay.P(x) + EPS_P * np.eye(sys.n_states)

    c = np.zeros(lay.size)
    if gamma is None:
        c[-1] = 1.0
    blocks = [_affine_blocks(lmi, lay.size), _affine_blocks(pos, lay.size)]
    if A_eq is not None and len(A_eq):
        full = np.zeros((len(A_eq), lay.size))
        full[:, lay.n_p:lay.n_p + lay.n_taps] = A_eq
        A_eq = full
    else:
        A_eq, b_eq = None, None
    return sdp.SdpProblem(c, blocks, A_eq, b_eq, names=["kyp", "lyapunov"]), lay


def kyp_lmi(sys: ErrorSystemAffine, gamma: float, taps=None) -> sdp.SdpProblem:
    """Feasibility SDP in P (and the taps unless ``taps`` is given) for the
    bound ``||E_w||_inf < gamma``, with the LMI enforced as ``<= -eps I``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return _problem(sys, gamma=gamma,
                    taps=None if taps is None else np.asarray(taps, dtype=float))[0]


def zero_constraints(sys: ErrorSystemAffine, points: Sequence[complex]):
    """Linear equations ``A_eq a = b_eq`` forcing E_w(z_i) = 0."""
    rows, rhs = [], []
    eig = np.linalg.eigvals(sys.A) if sys.n_states else np.zeros(0)
    seen = []
    for z in points:
        z = complex(z)
        if eig.size and np.min(np.abs(eig - z)) < 1e-9:
            raise ValueError(f"zero constraint point {z} is an eigenvalue of A")
        if any(abs(w - z.conjugate()) < 1e-12 or abs(w - z) < 1e-12 for w in seen):
            continue
        seen.append(z)
        n = sys.n_states
        v = la.solve(z * np.eye(n) - sys.A, sys.B[:, 0]) if n else np.zeros(0, complex)
        row = sys.C_lin @ v + sys.D_lin
        r = -(sys.C0 @ v + sys.D0)
        rows.append(row.real)
        rhs.append(r.real)
        if abs(z.imag) > 0:
            rows.append(row.imag)
            rhs.append(r.imag)
    if not rows:
        return np.zeros((0, sys.n_taps)), np.zeros(0)
    return np.array(rows), np.array(rhs)


@dataclass
class FirDesignResult:
    taps: np.ndarray
    gamma: float
    P: np.ndarray
    hinf_check: float
    lmi_max_eig: float
    p_min_eig: float
    solution: sdp.SdpSolution
    system: ErrorSystemAffine

    @property
    def psi(self) -> RationalFilter:
        return RationalFilter(self.taps)

    def to_dict(self) -> dict:
        return {
            "a": self.taps.tolist(),
            "gamma": float(self.gamma),
            "p_min_eig": float(self.p_min_eig),
            "lmi_max_eig": float(self.lmi_max_eig),
            "hinf_check": float(self.hinf_check),
            "status": self.solution.status,
        }


def _independent_rows(A, b, tol=1e-10):
    keep = []
    for i in range(len(A)):
        cand = keep + [i]
        if np.linalg.matrix_rank(A[cand], tol=tol) == len(cand):
            keep = cand
    return A[keep], b[keep]


def design_fir(p: FirDesignProblem, options: sdp.SolverOptions | None = None,
               realization: str = "compact") -> FirDesignResult:
    """Minimize gamma over (P, taps, gamma) subject to the bounded-real LMI
    and the problem's zero constraints.

    ``realization`` picks the state-space form the LMI is written in:
    ``"compact"`` (default) or ``"block"``. Both describe the same E_w, so
    the optimal taps and gamma agree; the certificate P refers to the
    realization stored in ``result.system``.
    """
    builders = {"compact": assemble_compact_system, "block": assemble_error_system}
    if realization not in builders:
        raise ValueError(f"unknown realization {realization!r}")
    sys = builders[realization](p)
    A_eq, b_eq = zero_constraints(sys, p.zero_constraints)
    if len(A_eq):
        sol_ls, *_ = np.linalg.lstsq(A_eq, b_eq, rcond=None)
        resid = A_eq @ sol_ls - b_eq
        if np.max(np.abs(resid)) > 1e-9 * max(1.0, np.max(np.abs(b_eq))):
            bad = [str(z) for z in p.zero_constraints]
            raise InfeasibleDesignError(
                f"zero constraints {bad} cannot be met with {p.taps} taps "
                f"(equation residuals {np.abs(resid).tolist()})")
        A_eq, b_eq = _independent_rows(A_eq, b_eq)
    problem, lay = _problem(sys, A_eq=A_eq, b_eq=b_eq)
    sol = sdp.solve(problem, options)
    if sol.status != sdp.OPTIMAL:
        raise RuntimeError(f"SDP solver finished with status {sol.status!r}")
    taps = lay.taps(sol.x).copy()
    gamma = float(lay.gamma(sol.x))
    P = lay.P(sol.x)
    lmi = lmi_matrix(sys, P, taps, gamma)
    lmi_max = float(la.eigh(lmi, eigvals_only=True)[-1])
    p_min = float(la.eigh(P, eigvals_only=True)[0]) if sys.n_states else np.inf
    check = hinf_norm(sys.realize(taps), check=False)
    return FirDesignResult(taps, gamma, P, check, lmi_max, p_min, sol, sys)
