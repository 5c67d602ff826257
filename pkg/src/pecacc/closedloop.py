"""Two-vehicle closed loop under a plant-equivalent controller realization.

State layout of the full closed loop (absolute coordinates)::

    x = (v1, a1, e2, v2, a2, xi2)

``e2`` is the headway-free gap (``de2/dt = v1 - v2``); the physical spacing
error is ``eps2 = e2 - h v2``. The controller measures
``xbar = (e2, v2, a2, v1, a1)``.

Model mismatch of the follower enters only its jerk row. A realization
``F`` changes the controller state to ``omega = xi - Gbar xbar`` with the
state derivative replaced by its nominal model, so the mismatch reaches
the controller through the single coefficient ``f23``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .model import BaseGains, PlantParams, jerk_row

__all__ = [
    "Realization", "NominalBlocks", "ClosedLoopSystem", "AugmentedSystem",
    "PolytopicSystem", "ControllerRealization", "ClosedLoopError",
    "base_blocks", "nominal_closed_loop", "realize_controller",
    "assemble_closed_loop", "augment", "enumerate_vertices", "prune_vertices",
    "cz_matrix", "follower_block",
    "STATE_LAYOUT", "CZ_MODES",
]

STATE_LAYOUT = ("v1", "a1", "e2", "v2", "a2", "xi2")
FOLLOWER = slice(2, 6)
CZ_MODES = ("spacing+velocity", "spacing", "velocity")


class ClosedLoopError(ValueError):
    pass


@dataclass(frozen=True)
class Realization:
    f21: float
    f22: float
    f23: float
    f11: float
    f12: float

    def as_array(self):
        return np.array([self.f21, self.f22, self.f23, self.f11, self.f12], dtype=float)

    @classmethod
    def from_array(cls, values):
        values = [float(v) for v in values]
        if len(values) != 5 or not np.all(np.isfinite(values)):
            raise ClosedLoopError("a realization has five finite entries")
        return cls(*values)

    @classmethod
    def base(cls, gains: BaseGains):
        return cls(0.0, 0.0, 0.0, 0.0, -gains.tau_des / gains.h)

    def with_f23(self, f23):
        return Realization(self.f21, self.f22, float(f23), self.f11, self.f12)


@dataclass(frozen=True)
class NominalBlocks:
    A0_11: np.ndarray
    A0_21: np.ndarray
    A0_22: np.ndarray
    B0_1: np.ndarray
    B0_2: np.ndarray
    Bphi: np.ndarray
    Ac: float
    Bc_1: np.ndarray
    Bc_2: np.ndarray
    Ec: float


@dataclass(frozen=True)
class ClosedLoopSystem:
    A: np.ndarray
    B_u: np.ndarray
    w: np.ndarray
    layout: tuple = STATE_LAYOUT


@dataclass(frozen=True)
class AugmentedSystem:
    """Nominal and error dynamics of the follower, stacked.

    ``eta = (zeta0, zetae)`` where each block holds the follower deviations
    ``(e2, v2, a2, xi2)`` from the operating point. Inputs are the leader
    speed deviation, the leader command and a unit-amplitude channel that
    carries the equilibrium mismatch.
    """

    A_aug: np.ndarray
    B_aug: np.ndarray
    C_z: np.ndarray
    inputs: tuple = ("v1", "u1", "drift")


@dataclass(frozen=True)
class PolytopicSystem:
    vertices: list
    C_z: np.ndarray
    deltas: np.ndarray

    def __len__(self):
        return len(self.vertices)

    def combine(self, alpha):
        """Convex combination of the vertex matrices with weights ``alpha``."""
        alpha = np.asarray(alpha, dtype=float)
        A = sum(a * v[0] for a, v in zip(alpha, self.vertices))
        B = sum(a * v[1] for a, v in zip(alpha, self.vertices))
        return A, B


@dataclass(frozen=True)
class ControllerRealization:
    """Controller ``d omega/dt = a_omega omega + b_x xbar + b_u u1``, ``xi = omega + Gbar xbar``."""

    Gbar: np.ndarray
    a_omega: float
    b_x: np.ndarray
    b_u: float

    def output(self, omega, xbar):
        return omega + xbar @ self.Gbar

    def derivative(self, omega, xbar, u1):
        return self.a_omega * omega + xbar @ self.b_x + self.b_u * u1


def base_blocks(gains: BaseGains) -> NominalBlocks:
    """Nominal blocks of the base CACC closed loop."""
    h, kp, kd = gains.h, gains.k_p, gains.k_d
    tl, td = gains.tau_leader, gains.tau_des
    return NominalBlocks(
        A0_11=np.array([[0.0, 1.0], [0.0, -1.0 / tl]]),
        A0_21=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        A0_22=np.array([[0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0 / td]]),
        B0_1=np.array([0.0, 1.0 / tl]),
        B0_2=np.array([0.0, 0.0, 1.0 / td]),
        Bphi=np.array([0.0, 0.0, 1.0]),
        Ac=-1.0 / h,
        Bc_1=np.array([kd / h + (tl - td) / (h * tl), 0.0]),
        Bc_2=np.array([kp / h, -(kp + kd / h), -kd]),
        Ec=td / (h * tl),
    )


def nominal_closed_loop(blocks: NominalBlocks):
    """6x6 nominal closed-loop matrix and leader-command column."""
    A = np.zeros((6, 6))
    A[0:2, 0:2] = blocks.A0_11
    A[2:5, 0:2] = blocks.A0_21
    A[2:5, 2:5] = blocks.A0_22
    A[2:5, 5] = blocks.B0_2
    A[5, 0:2] = blocks.Bc_1
    A[5, 2:5] = blocks.Bc_2
    A[5, 5] = blocks.Ac
    B = np.zeros(6)
    B[0:2] = blocks.B0_1
    B[5] = blocks.Ec
    return A, B


def _nominal_derivative_model(blocks: NominalBlocks):
    # d(xbar)/dt = M xbar + m_xi xi + m_u u1, xbar = (e2, v2, a2, v1, a1)
    M = np.zeros((5, 5))
    M[0:3, 0:3] = blocks.A0_22
    M[0:3, 3:5] = blocks.A0_21
    M[3:5, 3:5] = blocks.A0_11
    m_xi = np.zeros(5)
    m_xi[0:3] = blocks.B0_2
    m_u = np.zeros(5)
    m_u[3:5] = blocks.B0_1
    return M, m_xi, m_u


def realize_controller(F: Realization, gains: BaseGains, blocks: NominalBlocks | None = None) -> ControllerRealization:
    """State-space matrices of the controller realization ``F``.

    With ``Gbar = F - F0`` the controller integrates
    ``Ac (omega + Gbar xbar) + Bc xbar + Ec u1 - Gbar xhat_dot`` where
    ``xhat_dot`` is the nominal-model derivative of ``xbar``.
    """
    if blocks is None:
        blocks = base_blocks(gains)
    G = F.as_array() - Realization.base(gains).as_array()
    Bc = np.concatenate([blocks.Bc_2, blocks.Bc_1])
    M, m_xi, m_u = _nominal_derivative_model(blocks)
    g_xi = G @ m_xi
    a_omega = blocks.Ac - g_xi
    b_x = blocks.Ac * G + Bc - G @ M - g_xi * G
    b_u = blocks.Ec - G @ m_u
    return ControllerRealization(Gbar=G, a_omega=float(a_omega), b_x=b_x, b_u=float(b_u))


def _injection(f23):
    n = np.zeros(6)
    n[4] = 1.0
    n[5] = f23
    return n


def _mismatch_row(gains, p0, v_r, delta):
    p_true = PlantParams.from_array(p0.as_array() + np.asarray(delta, dtype=float))
    r_v, r_a, r_xi, c = jerk_row(p_true, p0, v_r, gains.tau_des)
    row = np.zeros(6)
    row[3], row[4], row[5] = r_v, r_a, r_xi
    return row, c


def assemble_closed_loop(gains: BaseGains, p0: PlantParams, v_r, f23, delta) -> ClosedLoopSystem:
    """Linear uncertain closed loop ``dx/dt = A x + B_u u1 + w`` for a plant offset ``delta``."""
    A0, B = nominal_closed_loop(base_blocks(gains))
    row, c = _mismatch_row(gains, p0, v_r, delta)
    n = _injection(f23)
    return ClosedLoopSystem(A=A0 + np.outer(n, row), B_u=B, w=n * c)


def cz_matrix(gains: BaseGains, mode="spacing+velocity"):
    """Performance output on one follower block ``(e2, v2, a2, xi2)``."""
    eps = np.array([1.0, -gains.h, 0.0, 0.0])
    vel = np.array([0.0, 1.0, 0.0, 0.0])
    if mode == "spacing+velocity":
        return np.vstack([eps, vel])
    if mode == "spacing":
        return eps[None, :]
    if mode == "velocity":
        return vel[None, :]
    raise ClosedLoopError(f"unknown Cz_mode {mode!r}; expected one of {CZ_MODES}")


def follower_block(gains: BaseGains):
    A0, _ = nominal_closed_loop(base_blocks(gains))
    return A0[FOLLOWER, FOLLOWER]


def augment(gains: BaseGains, p0: PlantParams, v_r, f23, delta, Cz_mode="spacing+velocity") -> AugmentedSystem:
    """Stacked nominal/error system of the follower for one plant offset.

    The leader velocity is a pure integrator of the leader command, so the
    leader states are carried as exogenous inputs rather than states; the
    follower block of the nominal closed loop must be Hurwitz.
    """
    blocks = base_blocks(gains)
    A0, B = nominal_closed_loop(blocks)
    Aff = A0[FOLLOWER, FOLLOWER]
    if np.max(np.linalg.eigvals(Aff).real) >= 0:
        raise ClosedLoopError("nominal follower closed loop is not Hurwitz")
    row, c = _mismatch_row(gains, p0, v_r, delta)
    n = _injection(f23)[FOLLOWER]
    rf = row[FOLLOWER]
    # equilibrium mismatch at the operating point (v2 = v_r, a2 = xi2 = 0)
    c_eq = c + row[3] * v_r
    coupling = np.outer(n, rf)
    A_aug = np.block([[Aff, np.zeros((4, 4))], [coupling, Aff + coupling]])
    B_aug = np.zeros((8, 3))
    B_aug[:4, 0] = A0[FOLLOWER, 0]
    B_aug[:4, 1] = B[FOLLOWER]
    B_aug[4:, 2] = n * c_eq
    Cz = cz_matrix(gains, Cz_mode)
    C_z = np.hstack([np.zeros_like(Cz), Cz])
    return AugmentedSystem(A_aug=A_aug, B_aug=B_aug, C_z=C_z)


def enumerate_vertices(p_lower: PlantParams, p_upper: PlantParams, gains: BaseGains, v_r, f23,
                       Cz_mode="spacing+velocity", p0: PlantParams | None = None) -> PolytopicSystem:
    """One augmented system per corner of the plant-offset box ``p - p0``.

    ``p0`` defaults to the box midpoint; zero-width dimensions stay fixed.
    """
    lo, hi = p_lower.as_array(), p_upper.as_array()
    if np.any(lo > hi):
        raise ClosedLoopError("p_lower must not exceed p_upper")
    if p0 is None:
        p0 = PlantParams.from_array(0.5 * (lo + hi))
    base = p0.as_array()
    axes = [(a - b,) if a == c else (a - b, c - b) for a, b, c in zip(lo, base, hi)]
    deltas = np.array(list(itertools.product(*axes)), dtype=float)
    vertices = []
    C_z = None
    for d in deltas:
        sys_k = augment(gains, p0, v_r, f23, d, Cz_mode)
        vertices.append((sys_k.A_aug, sys_k.B_aug))
        C_z = sys_k.C_z
    return PolytopicSystem(vertices=vertices, C_z=C_z, deltas=deltas)


def _extreme_points(X, tol=1e-10):
    """Indices of the rows of ``X`` that are extreme points of their convex hull."""
    X = np.asarray(X, dtype=float)
    # drop exact duplicates first, keeping the first occurrence
    _, first = np.unique(np.round(X, 12), axis=0, return_index=True)
    first = np.sort(first)
    Y = X[first] - X[first].mean(axis=0)
    if len(first) <= 2:
        return first
    U, sv, _ = np.linalg.svd(Y, full_matrices=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    if rank == 0:
        return first[:1]
    Z = U[:, :rank] * sv[:rank]
    if rank == 1:
        return first[[int(np.argmin(Z[:, 0])), int(np.argmax(Z[:, 0]))]]
    if len(first) <= rank + 1:
        return first
    try:
        hull = ConvexHull(Z)
    except QhullError:
        return first
    return first[np.sort(hull.vertices)]


def prune_vertices(poly: PolytopicSystem) -> PolytopicSystem:
    """Drop vertices lying in the convex hull of the others.

    Vertex matrices depend affinely on the plant offset, so the polytope
    and every LMI over it are unchanged; only redundant constraints go away.
    """
    flat = np.array([np.concatenate([A.ravel(), B.ravel()]) for A, B in poly.vertices])
    keep = _extreme_points(flat)
    return PolytopicSystem(vertices=[poly.vertices[k] for k in keep], C_z=poly.C_z,
                           deltas=poly.deltas[keep])
