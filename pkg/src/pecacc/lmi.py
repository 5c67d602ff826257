"""Linear matrix inequalities for quadratic stability and the bounded real lemma.

Every constraint is a block ``F0 + sum_i y_i F_i >= 0`` over a decision
vector ``y = (svec(P), gamma)``. ``svec`` stacks the lower triangle of a
symmetric matrix column by column with off-diagonal entries scaled by
``sqrt(2)``, so that ``svec(X) @ svec(Y) == trace(X @ Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LmiBlock", "SdpProblem", "svec", "smat", "sym_basis", "svec_dim",
    "lyapunov_blocks", "brl_blocks", "output_energy_blocks", "trace_objective",
    "lyapunov_problem", "brl_problem", "fixed_gamma_problem", "vertex_scale",
]

SQRT2 = np.sqrt(2.0)


def svec_dim(n):
    return n * (n + 1) // 2


def _tril_indices(n):
    # column-major lower triangle: (0,0), (1,0), ..., (n-1,0), (1,1), ...
    cols, rows = np.triu_indices(n)
    return rows, cols


def svec(S, tol=1e-12):
    """Scaled half-vectorization of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("svec expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if np.max(np.abs(S - S.T), initial=0.0) > tol * scale:
        raise ValueError("svec expects a symmetric matrix")
    rows, cols = _tril_indices(S.shape[0])
    v = S[rows, cols].copy()
    v[rows != cols] *= SQRT2
    return v


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    n = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if svec_dim(n) != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    rows, cols = _tril_indices(n)
    vals = np.where(rows != cols, v / SQRT2, v)
    S = np.zeros((n, n))
    S[rows, cols] = vals
    S[cols, rows] = vals
    return S


def sym_basis(n):
    """Matrices ``E_k`` with ``smat(y) == sum_k y_k E_k``."""
    rows, cols = _tril_indices(n)
    E = np.zeros((rows.size, n, n))
    k = np.arange(rows.size)
    off = rows != cols
    E[k, rows, cols] = np.where(off, 1.0 / SQRT2, 1.0)
    E[k, cols, rows] = np.where(off, 1.0 / SQRT2, 1.0)
    return E


@dataclass
class LmiBlock:
    """Constraint ``F0 + sum_i y_i Fi[i] >= 0``."""

    F0: np.ndarray
    Fi: np.ndarray

    def __post_init__(self):
        self.F0 = np.asarray(self.F0, dtype=float)
        self.Fi = np.asarray(self.Fi, dtype=float)
        if self.Fi.ndim != 3 or self.Fi.shape[1:] != self.F0.shape:
            raise ValueError("coefficient matrices must match F0")

    @property
    def size(self):
        return self.F0.shape[0]

    @property
    def num_vars(self):
        return self.Fi.shape[0]

    def evaluate(self, y):
        return self.F0 + np.tensordot(np.asarray(y, dtype=float), self.Fi, axes=1)


@dataclass
class SdpProblem:
    """Minimize ``c @ y`` subject to every block being positive semidefinite."""

    c: np.ndarray
    blocks: list

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        for b in self.blocks:
            if b.num_vars != self.c.size:
                raise ValueError("block coefficient count differs from the number of variables")

    @property
    def num_vars(self):
        return self.c.size


def vertex_scale(As):
    """Factor ``1/max(1, max_k ||A_k||_inf)`` applied before imposing strict margins."""
    norm = max(float(np.max(np.sum(np.abs(A), axis=1))) for A in As)
    return 1.0 / max(1.0, norm)


def _lyap_terms(A, E):
    # A^T E + E A for every basis matrix
    AE = E @ A
    return np.swapaxes(AE, 1, 2) + AE


def lyapunov_blocks(vertices, margin=1e-6, scale=True):
    """Blocks for ``A_k^T P + P A_k < 0`` (all k) and ``P > 0`` over ``svec(P)``.

    Strictness is an absolute ``margin`` imposed after scaling the vertex
    matrices by :func:`vertex_scale` (a positive factor that does not change
    feasibility).
    """
    As = [np.asarray(A, dtype=float) for A in vertices]
    n = As[0].shape[0]
    s = vertex_scale(As) if scale else 1.0
    E = sym_basis(n)
    eye = np.eye(n)
    blocks = [LmiBlock(-margin * eye, -_lyap_terms(s * A, E)) for A in As]
    blocks.append(LmiBlock(-margin * eye, E))
    return blocks


def brl_blocks(vertices, C_z, margin=1e-8):
    """Bounded-real-lemma blocks over ``(svec(P), gamma)``.

    Per vertex ``-[[A^T P + P A + Cz^T Cz, P B], [B^T P, -gamma I]] >= 0``,
    plus ``P - margin I >= 0`` and ``gamma >= 0``.
    """
    C_z = np.atleast_2d(np.asarray(C_z, dtype=float))
    n = C_z.shape[1]
    E = sym_basis(n)
    N = E.shape[0]
    CtC = C_z.T @ C_z
    blocks = []
    for A, B in vertices:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float).reshape(n, -1)
        m = B.shape[1]
        k = n + m
        F0 = np.zeros((k, k))
        F0[:n, :n] = -CtC
        Fi = np.zeros((N + 1, k, k))
        Fi[:N, :n, :n] = -_lyap_terms(A, E)
        EB = E @ B
        Fi[:N, :n, n:] = -EB
        Fi[:N, n:, :n] = -np.swapaxes(EB, 1, 2)
        Fi[N, n:, n:] = np.eye(m)
        blocks.append(LmiBlock(F0, Fi))
    Fp = np.zeros((N + 1, n, n))
    Fp[:N] = E
    blocks.append(LmiBlock(-margin * np.eye(n), Fp))
    Fg = np.zeros((N + 1, 1, 1))
    Fg[N, 0, 0] = 1.0
    blocks.append(LmiBlock(np.zeros((1, 1)), Fg))
    return blocks


def output_energy_blocks(vertices, C_z, margin=1e-8):
    """Limit of :func:`brl_blocks` as ``gamma -> inf``: ``A^T P + P A + Cz^T Cz <= 0``."""
    C_z = np.atleast_2d(np.asarray(C_z, dtype=float))
    n = C_z.shape[1]
    E = sym_basis(n)
    CtC = C_z.T @ C_z
    blocks = [LmiBlock(-CtC, -_lyap_terms(np.asarray(A, dtype=float), E)) for A in vertices]
    blocks.append(LmiBlock(-margin * np.eye(n), E))
    return blocks


def trace_objective(C_z, weight=1.0):
    """Coefficients ``c`` with ``c @ svec(P) == weight * trace(Cz P Cz^T)``."""
    C_z = np.atleast_2d(np.asarray(C_z, dtype=float))
    return weight * svec(C_z.T @ C_z)


def lyapunov_problem(vertices, margin=1e-6):
    """Feasibility program of quadratic stability (zero objective)."""
    blocks = lyapunov_blocks(vertices, margin)
    return SdpProblem(np.zeros(blocks[0].num_vars), blocks)


def brl_problem(vertices, C_z, w_trace=0.0, w_gamma=1.0, margin=1e-8):
    """Minimize ``w_trace trace(Cz P Cz^T) + w_gamma gamma`` under the BRL blocks.

    With ``w_gamma == 0`` the infimum is approached only as ``gamma -> inf``;
    the limiting inequality without the input column is used instead and the
    decision vector is ``svec(P)`` alone.
    """
    if w_trace < 0 or w_gamma < 0 or (w_trace == 0 and w_gamma == 0):
        raise ValueError("weights must be nonnegative and not both zero")
    C_z = np.atleast_2d(np.asarray(C_z, dtype=float))
    if w_gamma == 0:
        blocks = output_energy_blocks([A for A, _ in vertices], C_z, margin)
        return SdpProblem(trace_objective(C_z, w_trace), blocks)
    blocks = brl_blocks(vertices, C_z, margin)
    c = np.append(trace_objective(C_z, w_trace), w_gamma)
    return SdpProblem(c, blocks)


def fixed_gamma_problem(vertices, C_z, gamma, margin=1e-8):
    """Margin program for a fixed ``gamma``: maximize ``t`` with every block ``>= t I``.

    The BRL at ``gamma`` is feasible iff the optimal ``t`` is nonnegative.
    The bound ``t <= 1`` keeps the program bounded for strictly feasible data.
    """
    base = brl_blocks(vertices, C_z, margin)[:-1]
    N = base[0].num_vars - 1
    blocks = []
    for b in base:
        F0 = b.F0 + gamma * b.Fi[N]
        Fi = np.concatenate([b.Fi[:N], -np.eye(b.size)[None]], axis=0)
        blocks.append(LmiBlock(F0, Fi))
    cap = np.zeros((N + 1, 1, 1))
    cap[N, 0, 0] = -1.0
    blocks.append(LmiBlock(np.ones((1, 1)), cap))
    c = np.zeros(N + 1)
    c[N] = -1.0
    return SdpProblem(c, blocks)
