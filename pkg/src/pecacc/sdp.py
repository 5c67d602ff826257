"""Dense semidefinite programming.

:func:`solve` handles the linear-objective LMI program

    minimize    c @ y
    subject to  F0_j + sum_i y_i Fi_j  >= 0     for every block j

with a primal-dual path-following method on the homogeneous self-dual
embedding, Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
With ``s = F0 + sum_i y_i Fi`` and the dual multiplier ``Z`` the embedding is

    G^T z + c tau = 0,   G y + s - h tau = 0,   kappa = -c^T y - h^T z,

where ``G y = -sum_i y_i Fi`` and ``h = F0``. A vanishing ``tau`` with
``h^T z < 0`` certifies infeasibility of the LMI.

Decision variables are equilibrated (unit-norm coefficient matrices)
before the iteration. Primal and dual residuals are measured relative to
the largest of the terms that cancel in them; ``Optimal`` additionally
requires the smallest block eigenvalue to be at least ``-tol_feas`` in
absolute terms.

Certificates are checked independently by :func:`feasibility_margin`,
which uses the cyclic Jacobi eigenvalue routine :func:`sym_eigen`.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lmi import SdpProblem, fixed_gamma_problem

__all__ = [
    "SolverOptions", "SdpSolution", "solve", "sym_eigen", "feasibility_margin",
    "minimal_gamma_bisection", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAXITER",
    "NUMERICAL_FAILURE",
]

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAXITER = "MaxIter"
NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-7
    tol_feas: float = 1e-8
    max_iter: int = 200
    step: float = 0.99
    stall_iters: int = 10

    def __post_init__(self):
        if not (self.tol_gap > 0 and self.tol_feas > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.step < 1:
            raise ValueError("step damping must lie in (0, 1)")


@dataclass
class SdpSolution:
    y: np.ndarray
    objective: float
    status: str
    gap: float
    min_block_eig: float
    iterations: int = 0
    pres: float = math.nan
    dres: float = math.nan
    Z: list = field(default_factory=list, repr=False)

    @property
    def ok(self):
        return self.status == OPTIMAL


class _Groups:
    """Blocks of equal size stacked for batched linear algebra."""

    def __init__(self, problem: SdpProblem):
        by_size = OrderedDict()
        for j, b in enumerate(problem.blocks):
            by_size.setdefault(b.size, []).append(j)
        self.index = list(by_size.values())
        self.F0 = [np.stack([problem.blocks[j].F0 for j in idx]) for idx in self.index]
        self.Fi = [np.stack([problem.blocks[j].Fi for j in idx]) for idx in self.index]
        self.sizes = [f.shape[-1] for f in self.F0]
        self.nu = sum(f.shape[0] * f.shape[-1] for f in self.F0)

    def G(self, x):
        return [-np.einsum("m,gmij->gij", x, Fi) for Fi in self.Fi]

    def GT(self, Z):
        return -sum(np.einsum("gmij,gij->m", Fi, z) for Fi, z in zip(self.Fi, Z))

    def unstack(self, mats):
        out = [None] * sum(len(i) for i in self.index)
        for idx, M in zip(self.index, mats):
            for k, j in enumerate(idx):
                out[j] = M[k]
        return out


def _inner(A, B):
    return float(sum(np.sum(a * b) for a, b in zip(A, B)))


def _norm(A):
    return math.sqrt(_inner(A, A))


def _eye(groups: _Groups):
    return [np.broadcast_to(np.eye(k), f.shape).copy() for k, f in zip(groups.sizes, groups.F0)]


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _nt_scaling(s, z):
    Ls = np.linalg.cholesky(s)
    Lz = np.linalg.cholesky(z)
    U, lam, Vt = np.linalg.svd(np.swapaxes(Lz, -1, -2) @ Ls)
    V = np.swapaxes(Vt, -1, -2)
    isq = 1.0 / np.sqrt(lam)
    R = (Ls @ V) * isq[..., None, :]
    Rinv = isq[..., :, None] * (np.swapaxes(U, -1, -2) @ np.swapaxes(Lz, -1, -2))
    return R, Rinv, lam


def _max_step(lam, d):
    # largest alpha with diag(lam) + alpha d >= 0
    isq = 1.0 / np.sqrt(lam)
    M = isq[..., :, None] * d * isq[..., None, :]
    ev = np.linalg.eigvalsh(_sym(M))[..., 0]
    lo = float(np.min(ev))
    return math.inf if lo >= 0 else -1.0 / lo


def solve(problem: SdpProblem, opts: SolverOptions = SolverOptions()) -> SdpSolution:
    """Solve ``min c@y s.t. F(y) >= 0``; see the module docstring."""
    grp = _Groups(problem)
    # column equilibration: y = D * y_scaled with unit-norm coefficient matrices
    col = np.sqrt(sum(np.sum(Fi * Fi, axis=(0, 2, 3)) for Fi in grp.Fi))
    D = np.where(col > 0, 1.0 / np.where(col > 0, col, 1.0), 1.0)
    grp.Fi = [Fi * D[None, :, None, None] for Fi in grp.Fi]
    c = problem.c * D
    m = c.size
    h = grp.F0
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resz0 = max(1.0, _norm(h))

    x = np.zeros(m)
    s = _eye(grp)
    z = _eye(grp)
    tau, kappa = 1.0, 1.0
    best_pres, stall = math.inf, 0
    status, it = MAXITER, 0
    pres = dres = gap = math.nan

    for it in range(opts.max_iter + 1):
        Gx = grp.G(x)
        rz = [a + b - tau * f for a, b, f in zip(Gx, s, h)]
        GTz = grp.GT(z)
        rx = GTz + tau * c
        cx = float(c @ x)
        hz = _inner(h, z)
        rt = kappa + cx + hz
        sz = _inner(s, z)
        mu = (sz + tau * kappa) / (grp.nu + 1)

        # residuals relative to the size of the terms that cancel in them
        pres = _norm(rz) / max(tau * resz0, _norm(Gx), _norm(s))
        dres = float(np.linalg.norm(rx)) / max(tau * resx0, float(np.linalg.norm(GTz)))
        pcost, dcost = cx / tau, -hz / tau
        gap = sz / tau ** 2 / max(1.0, abs(pcost))

        if pres <= opts.tol_feas and dres <= opts.tol_feas and gap <= opts.tol_gap:
            y = x / tau
            lam_min = _min_eig(grp, y)
            if lam_min >= -opts.tol_feas:
                status = OPTIMAL
                break
        # certificate tests in the original (unscaled) variables
        if hz < 0 and np.linalg.norm(GTz / D) / resx0 / (-hz) <= opts.tol_feas:
            status = INFEASIBLE
            break
        if cx < 0 and _norm([a + b for a, b in zip(Gx, s)]) / resz0 / (-cx) <= opts.tol_feas:
            status = UNBOUNDED
            break
        # stall detection on the absolute primal residual
        pres_abs = _norm(rz) / tau / resz0
        if pres_abs < best_pres * 0.99:
            best_pres, stall = pres_abs, 0
        else:
            stall += 1
        if mu < 1e-13 * (grp.nu + 1) and tau < 1e-8 * kappa and stall >= opts.stall_iters:
            status = INFEASIBLE
            break
        if it == opts.max_iter:
            break

        try:
            scal = [_nt_scaling(si, zi) for si, zi in zip(s, z)]
        except np.linalg.LinAlgError:
            status = NUMERICAL_FAILURE
            break
        R, Rinv, lam = ([t[k] for t in scal] for k in range(3))
        Rt = [np.swapaxes(a, -1, -2) for a in R]
        Rinvt = [np.swapaxes(a, -1, -2) for a in Rinv]
        Ft = [Ri[:, None] @ Fi @ Rit[:, None] for Ri, Fi, Rit in zip(Rinv, grp.Fi, Rinvt)]
        shapes = [f0.shape for f0 in h]
        # all scaled coefficient matrices as one (m, N) array
        Fflat = np.concatenate([np.swapaxes(f, 0, 1).reshape(m, -1) for f in Ft], axis=1)
        F0t = [Ri @ f @ Rit for Ri, f, Rit in zip(Rinv, h, Rinvt)]
        H = Fflat @ Fflat.T
        try:
            chol = scipy.linalg.cho_factor(H + 1e-14 * np.trace(H) / m * np.eye(m))
        except (np.linalg.LinAlgError, ValueError):
            status = NUMERICAL_FAILURE
            break

        def flat(mats):
            return np.concatenate([a.ravel() for a in mats])

        def unflat(v):
            out, k = [], 0
            for shp in shapes:
                n = int(np.prod(shp))
                out.append(v[k:k + n].reshape(shp))
                k += n
            return out

        def solve_k(bx, bzt):
            bz = flat(bzt)
            rhs = bx - Fflat @ bz
            dx = scipy.linalg.cho_solve(chol, rhs)
            # one step of iterative refinement against the unregularized H
            dx += scipy.linalg.cho_solve(chol, rhs - H @ dx)
            return dx, unflat(-(dx @ Fflat) - bz)

        rzt = [Ri @ r @ Rit for Ri, r, Rit in zip(Rinv, rz, Rinvt)]
        dx2, dzt2 = solve_k(-c, F0t)
        denom2 = -kappa / tau + float(c @ dx2) + _inner(F0t, dzt2)
        Lam = [lm[..., :, None] * np.eye(lm.shape[-1]) for lm in lam]
        pair = [lm[..., :, None] + lm[..., None, :] for lm in lam]

        def direction(eta, qt, rtk):
            dx1, dzt1 = solve_k(-eta * rx, [-eta * r - q for r, q in zip(rzt, qt)])
            num = -eta * rt - rtk / tau - float(c @ dx1) - _inner(F0t, dzt1)
            dtau = num / denom2
            dx = dx1 + dtau * dx2
            dzt = [a + dtau * b for a, b in zip(dzt1, dzt2)]
            dst = [q - d for q, d in zip(qt, dzt)]
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dzt, dst, dtau, dkappa

        def step_length(dzt, dst, dtau, dkappa):
            a = math.inf
            for lm, ds_, dz_ in zip(lam, dst, dzt):
                a = min(a, _max_step(lm, ds_), _max_step(lm, dz_))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        qa = [-L for L in Lam]
        dxa, dzta, dsta, dtaua, dkappaa = direction(1.0, qa, -tau * kappa)
        alpha_a = min(1.0, step_length(dzta, dsta, dtaua, dkappaa))
        sigma = (1.0 - alpha_a) ** 3
        # corrector
        qc = []
        for L, P2, lm, dsa, dza in zip(Lam, pair, lam, dsta, dzta):
            rc = -(L * lm[..., None, :]) - _sym(dsa @ dza) + sigma * mu * np.eye(lm.shape[-1])
            qc.append(2.0 * rc / P2)
        rtk = -tau * kappa - dtaua * dkappaa + sigma * mu
        dx, dzt, dst, dtau, dkappa = direction(1.0 - sigma, qc, rtk)
        alpha = min(1.0, opts.step * step_length(dzt, dst, dtau, dkappa))

        log.debug("sdp it=%d pres=%.2e dres=%.2e gap=%.2e tau=%.3e kappa=%.3e alpha=%.3f sigma=%.2e",
                  it, pres, dres, gap, tau, kappa, alpha, sigma)
        x = x + alpha * dx
        s = [_sym(si + alpha * (Ra @ d @ Rta)) for si, Ra, d, Rta in zip(s, R, dst, Rt)]
        z = [_sym(zi + alpha * (Rit @ d @ Ri)) for zi, Rit, d, Ri in zip(z, Rinvt, dzt, Rinv)]
        tau += alpha * dtau
        kappa += alpha * dkappa
        if not (tau > 0 and kappa > 0 and np.isfinite(x).all()):
            status = NUMERICAL_FAILURE
            break

    ys = x / tau if tau > 0 else x
    min_eig = _min_eig(grp, ys)
    y = D * ys
    objective = float(problem.c @ y)
    if status == INFEASIBLE:
        objective = math.inf
    Z = grp.unstack([zi / tau for zi in z])
    log.debug("sdp: status=%s it=%d obj=%.6g pres=%.2e dres=%.2e gap=%.2e",
              status, it, objective, pres, dres, gap)
    return SdpSolution(y=y, objective=objective, status=status, gap=gap, min_block_eig=min_eig,
                       iterations=it, pres=pres, dres=dres, Z=Z)


def _min_eig(grp: _Groups, y):
    S = [f0 + np.einsum("m,gmij->gij", y, fi) for f0, fi in zip(grp.F0, grp.Fi)]
    return float(min(np.min(np.linalg.eigvalsh(_sym(a))[..., 0]) for a in S))


def sym_eigen(S, tol=1e-12, max_sweeps=60, vectors=False):
    """Eigenvalues (ascending) of symmetric matrices by the cyclic Jacobi method.

    ``S`` may carry leading batch dimensions; all matrices of a batch are
    rotated with the same cyclic pivot order. Sweeps stop once the
    off-diagonal Frobenius norm of every matrix is at most ``tol * ||S||_F``.
    With ``vectors=True`` the orthogonal eigenvector matrices are returned too.
    """
    A = np.array(S, dtype=float, copy=True)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError("sym_eigen expects square matrices")
    n = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape((-1, n, n))
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    V = np.broadcast_to(np.eye(n), A.shape).copy()
    target = tol * np.sqrt(np.sum(A * A, axis=(1, 2)))
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A[:, offmask] ** 2, axis=1))
        if np.all(off <= target):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[:, p, q]
                active = np.abs(apq) > 0.0
                if not active.any():
                    continue
                theta = np.where(active, (A[:, q, q] - A[:, p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(active, t, 0.0)
                cs = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * cs
                c_, s_ = cs[:, None], sn[:, None]
                Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
                A[:, :, p] = c_ * Ap - s_ * Aq
                A[:, :, q] = s_ * Ap + c_ * Aq
                Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
                A[:, p, :] = c_ * Ap - s_ * Aq
                A[:, q, :] = s_ * Ap + c_ * Aq
                A[:, p, q] = 0.0
                A[:, q, p] = 0.0
                Vp, Vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = c_ * Vp - s_ * Vq
                V[:, :, q] = s_ * Vp + c_ * Vq
    w = np.diagonal(A, axis1=1, axis2=2)
    order = np.argsort(w, axis=1)
    w = np.take_along_axis(w, order, axis=1).reshape(batch + (n,))
    if not vectors:
        return w
    V = np.take_along_axis(V, order[:, None, :], axis=2).reshape(batch + (n, n))
    return w, V


def feasibility_margin(y, problem: SdpProblem):
    """Smallest eigenvalue over all blocks of ``F(y)``, computed with :func:`sym_eigen`."""
    y = np.asarray(y, dtype=float)
    by_size = OrderedDict()
    for b in problem.blocks:
        by_size.setdefault(b.size, []).append(b.evaluate(y))
    return float(min(np.min(sym_eigen(np.stack(mats))[..., 0]) for mats in by_size.values()))


def _gamma_feasible(vertices, C_z, gamma, opts):
    sol = solve(fixed_gamma_problem(vertices, C_z, gamma), opts)
    return sol.status == OPTIMAL and -sol.objective >= 0.0


def minimal_gamma_bisection(vertices, C_z, rtol=1e-6, gamma_max=1e12, opts: SolverOptions = SolverOptions()):
    """Smallest BRL level ``gamma`` found by bisection on fixed-gamma feasibility.

    The bracket is first located by powers of ten, then halved until its
    relative width is below ``rtol``. Returns ``math.inf`` when even
    ``gamma_max`` is infeasible.
    """
    hi = 1.0
    while not _gamma_feasible(vertices, C_z, hi, opts):
        hi *= 10.0
        if hi > gamma_max:
            return math.inf
    lo = hi / 10.0
    if hi == 1.0:
        while hi > 1e-12 and _gamma_feasible(vertices, C_z, hi / 10.0, opts):
            hi /= 10.0
        lo = hi / 10.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _gamma_feasible(vertices, C_z, mid, opts):
            hi = mid
        else:
            lo = mid
    return hi
