"""Dense primal-dual interior-point solver for small semidefinite programs.

Problem form::

    minimize    c'x
    subject to  F0 + x_1 F1 + ... + x_m Fm  <=  0   (block diagonal, NSD)
                A x = b

Internally this is the cone program ``min c'x  s.t.  G x + s = h, A x = b,
s >= 0`` with ``G x = sum x_i F_i`` and ``h = -F0``, solved through its
homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. The embedding returns either an optimal pair or
a ray certifying primal or dual infeasibility.

Sizes targeted: tens of variables, blocks up to roughly 20 x 20.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as la

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_ERROR = "numerical_error"


class SdpProblem:
    """Affine LMI program.

    Parameters
    ----------
    c : (m,) array
        Objective.
    blocks : sequence of (m+1, k, k) arrays
        ``blocks[j][0]`` is the constant term of block j and
        ``blocks[j][i+1]`` the coefficient of ``x_i``.
    A_eq, b_eq : optional equality constraints ``A_eq x = b_eq``.
    names : optional labels for the blocks.
    """

    def __init__(self, c, blocks: Sequence, A_eq=None, b_eq=None, names=None):
        self.c = np.asarray(c, dtype=float).ravel()
        m = self.c.size
        kept, kept_names = [], []
        names = list(names) if names is not None else [f"block{j}" for j in range(len(blocks))]
        for F, name in zip(blocks, names):
            F = np.asarray(F, dtype=float)
            if F.ndim != 3 or F.shape[0] != m + 1 or F.shape[1] != F.shape[2]:
                raise ValueError(f"{name}: expected shape ({m + 1}, k, k), got {F.shape}")
            if F.shape[1] == 0:
                continue
            if not np.allclose(F, F.transpose(0, 2, 1), atol=1e-12, rtol=0):
                raise ValueError(f"{name}: coefficient matrices must be symmetric")
            kept.append(0.5 * (F + F.transpose(0, 2, 1)))
            kept_names.append(name)
        self.blocks = tuple(kept)
        self.names = tuple(kept_names)
        if A_eq is None:
            A_eq, b_eq = np.zeros((0, m)), np.zeros(0)
        self.A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float)).reshape(-1, m)
        self.b_eq = np.asarray(b_eq, dtype=float).ravel()
        if self.b_eq.size != self.A_eq.shape[0]:
            raise ValueError("A_eq and b_eq have inconsistent sizes")
        if self.A_eq.shape[0] and np.linalg.matrix_rank(self.A_eq) < self.A_eq.shape[0]:
            raise ValueError("equality constraint rows must be linearly independent")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(F.shape[1] for F in self.blocks)

    def evaluate(self, x) -> list[np.ndarray]:
        """Blocks of F(x)."""
        x = np.asarray(x, dtype=float)
        return [F[0] + np.tensordot(x, F[1:], axes=1) for F in self.blocks]

    def scaled(self, factor: float) -> "SdpProblem":
        """Same problem with every LMI block multiplied by ``factor > 0``."""
        return SdpProblem(self.c, [factor * F for F in self.blocks],
                          self.A_eq, self.b_eq, self.names)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "c": self.c.tolist(),
            "blocks": [{"name": n, "F": F.tolist()} for n, F in zip(self.names, self.blocks)],
            "A_eq": self.A_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SdpProblem":
        m = len(d["c"])
        A_eq = d.get("A_eq") or np.zeros((0, m))
        return cls(d["c"], [b["F"] for b in d["blocks"]], A_eq, d.get("b_eq") or [],
                   [b.get("name", f"block{j}") for j, b in enumerate(d["blocks"])])

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "SdpProblem":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SolverOptions:
    max_iterations: int = 100
    feastol: float = 1e-9
    abstol: float = 1e-10
    reltol: float = 1e-8
    step: float = 0.99
    refinement: int = 6


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    dual_objective: float
    iterations: int
    kkt_residuals: dict
    Z: list = field(default_factory=list)
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    certificate: list | None = None
    history: list = field(default_factory=list)


@dataclass
class FeasibilityReport:
    lambda_max: float
    equality_residual: float
    lmi_ok: bool
    equality_ok: bool

    @property
    def feasible(self) -> bool:
        return self.lmi_ok and self.equality_ok


def check_feasible(problem: SdpProblem, x, tol: float = 1e-9,
                   eq_tol: float = 1e-8) -> FeasibilityReport:
    """Evaluate F(x) with a symmetric eigensolver and the equality residual."""
    x = np.asarray(x, dtype=float)
    lam = max((float(la.eigh(B, eigvals_only=True)[-1]) for B in problem.evaluate(x)),
              default=-math.inf)
    eq = float(np.linalg.norm(problem.A_eq @ x - problem.b_eq)) if problem.A_eq.size else 0.0
    return FeasibilityReport(lam, eq, lam <= tol, eq <= eq_tol)


# -- solver internals ---------------------------------------------------------

class _Blocks:
    """Concatenated flat storage for block-diagonal symmetric matrices."""

    def __init__(self, sizes):
        self.sizes = list(sizes)
        self.offsets = np.cumsum([0] + [k * k for k in self.sizes])
        self.degree = sum(self.sizes)

    def split(self, v):
        return [v[..., o:o + k * k].reshape(v.shape[:-1] + (k, k))
                for o, k in zip(self.offsets[:-1], self.sizes)]

    def join(self, mats):
        return np.concatenate([M.reshape(M.shape[:-2] + (-1,)) for M in mats], axis=-1)

    def identity(self):
        return self.join([np.eye(k) for k in self.sizes])


def _max_step(lam_blocks, d_blocks) -> float:
    """Largest a with diag(lam) + a*D >= 0 (inf if unbounded)."""
    amax = math.inf
    for lam, D in zip(lam_blocks, d_blocks):
        r = 1.0 / np.sqrt(lam)
        M = r[:, None] * D * r[None, :]
        ev = la.eigh(0.5 * (M + M.T), eigvals_only=True)[0]
        if ev < 0:
            amax = min(amax, -1.0 / ev)
    return amax


def _jordan(X, Y):
    return 0.5 * (X @ Y + Y @ X)


class _Kkt:
    """Solves the scaled Newton system

        A' dy + Gt dz = r1,   A dx = r2,   Gt' dx - dz = r3

    by eliminating dz. The normal matrix H = Gt Gt' is never formed: its
    triangular factor comes from a QR factorization of Gt', which keeps
    the conditioning at that of Gt rather than its square. Iterative
    refinement on the unreduced system cleans up the rest.
    """

    def __init__(self, Gt, A, refinement=1):
        self.Gt = Gt
        self.A = A
        self.refinement = refinement
        self.p = A.shape[0]
        self.m = Gt.shape[0]
        self.Rf = la.qr(Gt.T, mode="r", check_finite=False)[0][:self.m]
        d = np.abs(np.diag(self.Rf))
        self.dense = None
        if d.size and d.min() <= 1e-14 * d.max():
            H = Gt @ Gt.T
            self.dense = np.block([[H, A.T], [A, np.zeros((self.p, self.p))]])
        elif self.p:
            HiA = self._hsolve(A.T)
            self.Sc = la.cho_factor(A @ HiA, check_finite=False)

    def _hsolve(self, v):
        w = la.solve_triangular(self.Rf, v, trans="T", check_finite=False)
        return la.solve_triangular(self.Rf, w, check_finite=False)

    def _reduced(self, r1, r2):
        if self.dense is not None:
            sol = np.linalg.lstsq(self.dense, np.concatenate([r1, r2]), rcond=None)[0]
            return sol[:self.m], sol[self.m:]
        if self.p:
            dy = la.cho_solve(self.Sc, self.A @ self._hsolve(r1) - r2)
            return self._hsolve(r1 - self.A.T @ dy), dy
        return self._hsolve(r1), np.zeros(0)

    def _once(self, r1, r2, r3):
        dx, dy = self._reduced(r1 + self.Gt @ r3, r2)
        return dx, dy, self.Gt.T @ dx - r3

    def solve(self, r1, r2, r3):
        dx, dy, dz = self._once(r1, r2, r3)
        for _ in range(self.refinement):
            e1 = r1 - self.A.T @ dy - self.Gt @ dz
            e2 = r2 - self.A @ dx
            e3 = r3 - self.Gt.T @ dx + dz
            cx, cy, cz = self._once(e1, e2, e3)
            dx, dy, dz = dx + cx, dy + cy, dz + cz
        return dx, dy, dz


def _nt_scaling(S_blocks, Z_blocks):
    R, Rinv, lam = [], [], []
    for S, Z in zip(S_blocks, Z_blocks):
        Ls = la.cholesky(S, lower=True)
        Lz = la.cholesky(Z, lower=True)
        U, sv, Vt = la.svd(Lz.T @ Ls)
        r = 1.0 / np.sqrt(sv)
        R.append(Ls @ Vt.T * r[None, :])
        LsInv = la.solve_triangular(Ls, np.eye(Ls.shape[0]), lower=True)
        Rinv.append((1.0 / r)[:, None] * (Vt @ LsInv))
        lam.append(sv)
    return R, Rinv, lam


_BACKTRACK = 40


def _interior(cone, v):
    """Symmetrized copy of v if every block is positive definite, else None."""
    out = []
    for V in cone.split(v):
        W = 0.5 * (V + V.T)
        try:
            la.cholesky(W, lower=True)
        except la.LinAlgError:
            return None
        out.append(W)
    return cone.join(out)


def solve(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Solve an :class:`SdpProblem`; see module docstring for the method."""
    opts = options or SolverOptions()
    cone = _Blocks(problem.block_sizes)
    m = problem.n_vars
    c, A, b = problem.c, problem.A_eq, problem.b_eq
    p = A.shape[0]
    G = cone.join([F[1:] for F in problem.blocks]) if cone.sizes else np.zeros((m, 0))
    Gpinv = np.linalg.pinv(G) if G.size else np.zeros((0, m))
    h = -cone.join([F[0] for F in problem.blocks]) if cone.sizes else np.zeros(0)

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, float(np.linalg.norm(h)))

    # cold start: least-squares primal and least-norm dual, shifted into the cone
    kkt = _Kkt(G, A, opts.refinement)
    x, _, r = kkt.solve(np.zeros(m), b, h)
    s = -r
    _, y, z = kkt.solve(-c, np.zeros(p), np.zeros(h.size))

    def shift(v):
        mats = cone.split(v)
        a = max((-la.eigh(M, eigvals_only=True)[0] for M in mats), default=-1.0)
        if a < 0:
            return v
        return v + (1.0 + a) * cone.identity()

    s, z = shift(s), shift(z)
    tau, kappa = 1.0, 1.0
    history = []
    status = MAX_ITERATIONS
    it = 0
    res = {}

    for it in range(opts.max_iterations + 1):
        Gx = G.T @ x
        Gz = G @ z
        rx = A.T @ y + Gz + c * tau
        ry = b * tau - A @ x
        rz = s + Gx - h * tau
        hz, by, cx = float(h @ z), float(b @ y), float(c @ x)
        rtau = kappa + cx + by + hz
        sz = float(s @ z)
        mu = (sz + tau * kappa) / (cone.degree + 1)
        pcost = cx / tau
        dcost = -(by + hz) / tau
        gap = sz / tau**2
        pres = max(float(np.linalg.norm(ry)) / resy0, float(np.linalg.norm(rz))) / tau
        dres = float(np.linalg.norm(rx)) / resx0 / tau
        relgap = abs(gap) / (1.0 + abs(pcost) + abs(dcost))
        pinfres = (float(np.linalg.norm(A.T @ y + Gz)) / resx0 / -(hz + by)
                   if hz + by < 0 else math.inf)
        dinfres = (max(float(np.linalg.norm(A @ x)) / resy0,
                       float(np.linalg.norm(Gx + s)) / resz0) / -cx
                   if cx < 0 else math.inf)
        res = dict(primal_residual=pres, dual_residual=dres, gap=gap,
                   relative_gap=relgap, primal_infeasibility=pinfres,
                   dual_infeasibility=dinfres)
        history.append(dict(iteration=it, pcost=pcost, dcost=dcost, **res,
                            tau=tau, kappa=kappa))

        if pres <= opts.feastol and dres <= opts.feastol and (
                gap <= opts.abstol or relgap <= opts.reltol):
            status = OPTIMAL
            break
        if pinfres <= opts.feastol:
            status = INFEASIBLE
            break
        if dinfres <= opts.feastol:
            status = UNBOUNDED
            break
        if it == opts.max_iterations:
            break

        try:
            R, Rinv, lam = _nt_scaling(cone.split(s), cone.split(z))
        except la.LinAlgError:
            status = NUMERICAL_ERROR
            break

        def wit(v):  # W^{-T} v
            return cone.join([Ri @ M @ Ri.T for Ri, M in zip(Rinv, cone.split(v))])

        Gt = cone.join([np.einsum("ab,ibc,dc->iad", Ri, F[1:], Ri, optimize=True)
                        for Ri, F in zip(Rinv, problem.blocks)]) if cone.sizes else G
        ht = wit(h)
        rzt = wit(rz)
        lam_mats = [np.diag(l) for l in lam]
        try:
            kkt = _Kkt(Gt, A, opts.refinement)
        except la.LinAlgError:
            status = NUMERICAL_ERROR
            break
        x_g, y_g, z_g = kkt.solve(-c, b, ht)
        denom = -kappa / tau - float(z_g @ z_g)

        def newton(eta, ds_mats, dkappa):
            u = cone.join([2.0 * D / (l[:, None] + l[None, :]) for l, D in zip(lam, ds_mats)])
            x_f, y_f, z_f = kkt.solve(-eta * rx, eta * ry, -(eta * rzt + u))
            dtau = (-eta * rtau - (c @ x_f + b @ y_f + ht @ z_f) - dkappa / tau) / denom
            dx = x_f + dtau * x_g
            dy = y_f + dtau * y_g
            dzt = z_f + dtau * z_g
            dst = u - dzt
            dkap = (dkappa - kappa * dtau) / tau
            return dx, dy, dst, dzt, dtau, dkap

        def step_length(dst, dzt, dtau, dkap):
            a = min(_max_step(lam, cone.split(dst)), _max_step(lam, cone.split(dzt)))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        # predictor
        aff = newton(1.0, [-(L @ L) for L in lam_mats], -tau * kappa)
        alpha_aff = min(1.0, step_length(*aff[2:]))
        sigma = (1.0 - alpha_aff) ** 3
        # corrector
        ds_mats = [sigma * mu * np.eye(L.shape[0]) - L @ L - _jordan(Sa, Za)
                   for L, Sa, Za in zip(lam_mats, cone.split(aff[2]), cone.split(aff[3]))]
        dx, dy, dst, dzt, dtau, dkap = newton(
            1.0 - sigma, ds_mats, sigma * mu - tau * kappa - aff[4] * aff[5])
        alpha = min(1.0, opts.step * step_length(dst, dzt, dtau, dkap))

        # The slack steps are mapped back through R and then corrected so
        # that they satisfy the linearized residual equations in the original
        # coordinates. Near the solution R is badly conditioned and without
        # the correction the residuals drift upwards. If the corrected step
        # leaves the cone the step length is cut back.
        ds_map = cone.join([Rb @ dS @ Rb.T for Rb, dS in zip(R, cone.split(dst))])
        dz_map = cone.join([Rib.T @ dZ @ Rib for Rib, dZ in zip(Rinv, cone.split(dzt))])
        ds = h * dtau - G.T @ dx - (1.0 - sigma) * rz
        dz = dz_map + Gpinv @ (-(1.0 - sigma) * rx - A.T @ dy - G @ dz_map - c * dtau)
        for _ in range(_BACKTRACK):
            s_new = _interior(cone, s + alpha * ds)
            z_new = _interior(cone, z + alpha * dz)
            if s_new is not None and z_new is not None:
                break
            alpha *= 0.5
        else:
            status = NUMERICAL_ERROR
            break
        x = x + alpha * dx
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkap
        s, z = s_new, z_new

    certificate = None
    if status == INFEASIBLE:
        scale = -(float(h @ z) + float(b @ y))
        certificate = [Zb / scale for Zb in cone.split(z)]
        xs = np.full(m, np.nan)
        return SdpSolution(status, xs, math.nan, math.nan, it, res,
                           certificate, y / scale, certificate, history)
    if status == UNBOUNDED:
        ray = x / -float(c @ x)
        return SdpSolution(status, ray, -math.inf, -math.inf, it, res,
                           [], np.zeros(p), None, history)
    xs = x / tau
    return SdpSolution(status, xs, float(c @ xs), -(float(b @ y) + float(h @ z)) / tau,
                       it, res, [Zb / tau for Zb in cone.split(z)], y / tau,
                       None, history)


def is_infeasibility_certificate(problem: SdpProblem, Z_blocks, y=None,
                                 tol: float = 1e-7) -> bool:
    """Check Z >= 0, <F_i, Z> + (A'y)_i = 0 and <F0, Z> - b'y > 0."""
    y = np.zeros(problem.A_eq.shape[0]) if y is None else np.asarray(y)
    if any(la.eigh(Zb, eigvals_only=True)[0] < -tol for Zb in Z_blocks):
        return False
    lin = sum(np.einsum("ijk,jk->i", F[1:], Zb) for F, Zb in zip(problem.blocks, Z_blocks))
    lin = lin + problem.A_eq.T @ y
    const = sum(float(np.sum(F[0] * Zb)) for F, Zb in zip(problem.blocks, Z_blocks))
    const -= float(problem.b_eq @ y)
    return bool(const > 0 and np.linalg.norm(lin) <= tol * max(1.0, const))
