import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from pecacc.closedloop import (FOLLOWER, ClosedLoopError, Realization, assemble_closed_loop, augment,
                               base_blocks, cz_matrix, enumerate_vertices, follower_block,
                               nominal_closed_loop, prune_vertices, realize_controller)
from pecacc.model import BaseGains, PlantParams, kmh, map_physical_to_p, p_box, table_i_box, table_i_gains

G = table_i_gains()
BOX = table_i_box()
P0 = map_physical_to_p(BOX.nominal)
LO, HI = p_box(BOX)
V_R = kmh(50.0)
Q = -G.tau_des / G.h


def _random_delta(rng):
    return LO.as_array() - P0.as_array() + rng.random(6) * (HI.as_array() - LO.as_array())


def test_base_blocks_values():
    b = base_blocks(G)
    assert b.Ac == -5.0
    assert b.Ec == pytest.approx(5.0)
    assert np.allclose(b.Bc_2, [1.0, -3.7, -0.7])
    assert np.allclose(b.Bc_1, [3.5, 0.0])
    assert np.allclose(b.A0_22 @ [0, 0, 1], [0, 1, -1 / 0.12])


def test_heterogeneous_leader_term():
    g = BaseGains(tau_des=0.12, tau_leader=0.2)
    b = base_blocks(g)
    assert b.Bc_1[0] == pytest.approx(g.k_d / g.h + (0.2 - 0.12) / (g.h * 0.2))
    assert b.Ec == pytest.approx(0.12 / (0.2 * 0.2))


def test_nominal_closed_loop_spectrum():
    A0, _ = nominal_closed_loop(base_blocks(G))
    ev = np.linalg.eigvals(A0)
    # the leader velocity integrates the leader acceleration: one eigenvalue at 0
    assert np.min(np.abs(ev)) < 1e-12
    assert np.all(np.linalg.eigvals(follower_block(G)).real < 0)
    assert np.all(np.sort(ev.real)[:-1] < 0)


def test_realization_constructors():
    F0 = Realization.base(G)
    assert np.allclose(F0.as_array(), [0, 0, 0, 0, -0.6])
    with pytest.raises(ClosedLoopError):
        Realization.from_array([0, 0, np.nan, 0, 0])


def test_realize_controller_base_is_appendix_controller():
    c = realize_controller(Realization.base(G), G)
    b = base_blocks(G)
    assert np.all(c.Gbar == 0)
    assert c.a_omega == b.Ac and c.b_u == b.Ec
    assert np.allclose(c.b_x, np.concatenate([b.Bc_2, b.Bc_1]))


def test_gbar_of_table_realizations():
    F1 = Realization(Q, Q, 0, Q, Q)
    assert np.allclose(realize_controller(F1, G).Gbar, [Q, Q, 0, Q, 0])
    F2 = Realization.base(G).with_f23(0.3)
    assert np.allclose(realize_controller(F2, G).Gbar, [0, 0, 0.3, 0, 0])


def _realized_loop(F, delta):
    """(x, omega) closed loop of the realized controller and the linear perturbed plant.

    Plant states (v1, a1, e2, v2, a2), controller state omega; returns A, B, w
    in those coordinates together with xi = T @ (x, omega).
    """
    b = base_blocks(G)
    c = realize_controller(F, G)
    pt = PlantParams.from_array(P0.as_array() + delta)
    from pecacc.model import jerk_row
    r_v, r_a, r_xi, cc = jerk_row(pt, P0, V_R, G.tau_des)
    # xbar = (e2, v2, a2, v1, a1) as a selection of (v1, a1, e2, v2, a2)
    S = np.zeros((5, 5))
    S[0, 2] = S[1, 3] = S[2, 4] = S[3, 0] = S[4, 1] = 1.0
    xi_row = np.concatenate([c.Gbar @ S, [1.0]])          # xi = omega + Gbar xbar
    A = np.zeros((6, 6))
    A[0:2, 0:2] = b.A0_11
    A[2:5, 0:2] = b.A0_21
    A[2:5, 2:5] = b.A0_22
    A[2:5, :] += np.outer(b.B0_2, xi_row)
    # jerk mismatch on the a2 row
    A[4, 3] += r_v
    A[4, 4] += r_a
    A[4, :] += r_xi * xi_row
    A[5, :5] = c.b_x @ S
    A[5, 5] = c.a_omega
    B = np.zeros(6)
    B[0:2] = b.B0_1
    B[5] = c.b_u
    w = np.zeros(6)
    w[4] = cc
    T = np.eye(6)
    T[5] = xi_row
    return A, B, w, T


@pytest.mark.parametrize("seed", range(5))
def test_realized_loop_is_similar_to_assembled_loop(seed):
    rng = np.random.default_rng(seed)
    F = Realization.from_array(rng.uniform(-1, 1, 5))
    delta = _random_delta(rng)
    A, B, w, T = _realized_loop(F, delta)
    sys = assemble_closed_loop(G, P0, V_R, F.f23, delta)
    Ti = np.linalg.inv(T)
    assert np.allclose(T @ A @ Ti, sys.A, atol=1e-10)
    assert np.allclose(T @ B, sys.B_u, atol=1e-12)
    assert np.allclose(T @ w, sys.w, atol=1e-12)


def _xi_trajectory(F, delta, times):
    A, B, w, T = _realized_loop(F, delta)
    # constant leader command 1 and the drift, as augmented constant inputs
    M = np.zeros((8, 8))
    M[:6, :6] = A
    M[:6, 6] = B
    M[:6, 7] = w
    z0 = np.zeros(8)
    z0[:6] = np.linalg.solve(T, [1.0, 0.0, 0.5, 1.0, 0.0, 0.0])
    z0[6] = z0[7] = 1.0
    return np.array([T @ (expm(M * t) @ z0)[:6] for t in times])


def test_nominal_equivalence_any_realization():
    times = np.linspace(0, 30, 31)
    ref = _xi_trajectory(Realization.base(G), np.zeros(6), times)
    rng = np.random.default_rng(7)
    for _ in range(5):
        F = Realization.from_array(rng.uniform(-1, 1, 5))
        assert np.max(np.abs(_xi_trajectory(F, np.zeros(6), times) - ref)) <= 1e-10 * max(1, np.max(np.abs(ref)))


def test_uncertain_behaviour_depends_only_on_f23():
    times = np.linspace(0, 30, 31)
    delta = _random_delta(np.random.default_rng(3))
    F1 = Realization(Q, Q, 0, Q, Q)
    a = _xi_trajectory(Realization.base(G), delta, times)
    b = _xi_trajectory(F1, delta, times)
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1, np.max(np.abs(a)))
    c = _xi_trajectory(Realization.base(G).with_f23(0.3), delta, times)
    assert np.max(np.abs(a - c)) > 1e-6


def test_assemble_examples():
    A0, B0 = nominal_closed_loop(base_blocks(G))
    for f23 in (-1.0, 0.0, 0.4):
        s = assemble_closed_loop(G, P0, V_R, f23, np.zeros(6))
        assert np.array_equal(s.A, A0) and np.all(s.w == 0)
        assert np.allclose(s.B_u, [0, 1 / 0.12, 0, 0, 0, 5.0])
    s = assemble_closed_loop(G, P0, V_R, 0.0, [0, 0, 0, 0, 0.1, 0])
    assert np.allclose(s.w, [0, 0, 0, 0, -0.1, 0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31), f23=st.floats(-2, 2))
def test_assembled_structure(seed, f23):
    rng = np.random.default_rng(seed)
    delta = _random_delta(rng)
    A0, _ = nominal_closed_loop(base_blocks(G))
    s = assemble_closed_loop(G, P0, V_R, f23, delta)
    dA = s.A - A0
    assert np.all(dA[:4] == 0)
    assert np.linalg.matrix_rank(dA, tol=1e-12) <= 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_affine_in_delta_and_f23(seed):
    rng = np.random.default_rng(seed)
    d1, d2 = _random_delta(rng), _random_delta(rng)
    f = rng.uniform(-1, 1)
    A = lambda d, f23: assemble_closed_loop(G, P0, V_R, f23, d).A
    mid = A(0.5 * (d1 + d2), f)
    assert np.allclose(mid, 0.5 * (A(d1, f) + A(d2, f)), atol=1e-12)
    assert np.allclose(A(d1, 0.0) - 2 * A(d1, 0.5) + A(d1, 1.0), 0, atol=1e-12)


def test_augment_structure():
    rng = np.random.default_rng(11)
    delta = _random_delta(rng)
    s = augment(G, P0, V_R, 0.1, delta)
    assert s.A_aug.shape == (8, 8) and s.B_aug.shape == (8, 3) and s.C_z.shape == (2, 8)
    assert np.array_equal(s.A_aug[:4, :4], follower_block(G))
    assert np.all(s.A_aug[:4, 4:] == 0)
    assert np.all(s.C_z[:, :4] == 0)
    z = s.C_z @ np.concatenate([rng.normal(size=4), np.zeros(4)])
    assert np.all(z == 0)
    s0 = augment(G, P0, V_R, 0.1, np.zeros(6))
    assert np.all(s0.A_aug[4:, :4] == 0) and np.all(s0.B_aug[4:] == 0)
    assert np.all(np.linalg.eigvals(s0.A_aug[4:, 4:]).real < 0)


def test_augmented_error_matches_difference_of_loops():
    # zeta_e = x(delta) - x(0) for the follower states under the same leader signal
    rng = np.random.default_rng(5)
    delta = _random_delta(rng)
    f23 = 0.2
    so = assemble_closed_loop(G, P0, V_R, f23, np.zeros(6))
    sd = assemble_closed_loop(G, P0, V_R, f23, delta)
    aug = augment(G, P0, V_R, f23, delta)
    # leader at constant speed v_r, equilibrium start; compare after 3 s
    x0 = np.array([V_R, 0, G.h * V_R, V_R, 0, 0])

    def run(A, w, t):
        M = np.zeros((7, 7))
        M[:6, :6] = A
        M[:6, 6] = w
        return (expm(M * t) @ np.append(x0, 1.0))[:6]

    t = 3.0
    err = run(sd.A, sd.w, t) - run(so.A, so.w, t)
    M = np.zeros((9, 9))
    M[:8, :8] = aug.A_aug
    M[:8, 8] = aug.B_aug[:, 2]
    eta = (expm(M * t) @ np.append(np.zeros(8), 1.0))[:8]
    assert np.allclose(eta[4:], err[FOLLOWER], atol=1e-10)


def test_cz_modes():
    assert np.allclose(cz_matrix(G), [[1, -0.2, 0, 0], [0, 1, 0, 0]])
    assert cz_matrix(G, "spacing").shape == (1, 4)
    with pytest.raises(ClosedLoopError):
        cz_matrix(G, "bogus")


def test_enumerate_vertices_counts_and_sharing():
    poly = enumerate_vertices(LO, HI, G, V_R, 0.0, p0=P0)
    assert len(poly) == 64
    for A, _ in poly.vertices:
        assert np.array_equal(A[:4, :4], poly.vertices[0][0][:4, :4])
    single = enumerate_vertices(P0, P0, G, V_R, 0.0)
    assert len(single) == 1


def test_convex_combination_equals_interior_assembly():
    poly = enumerate_vertices(LO, HI, G, V_R, 0.3, p0=P0)
    rng = np.random.default_rng(9)
    alpha = rng.dirichlet(np.ones(len(poly)))
    A, B = poly.combine(alpha)
    delta = alpha @ poly.deltas
    s = augment(G, P0, V_R, 0.3, delta)
    assert np.allclose(A, s.A_aug, atol=1e-12)
    assert np.allclose(B, s.B_aug, atol=1e-12)


def test_prune_keeps_the_hull():
    poly = enumerate_vertices(LO, HI, G, V_R, 0.3, p0=P0)
    pr = prune_vertices(poly)
    assert 1 < len(pr) < len(poly)
    # every dropped vertex is a convex combination of the kept ones (LP feasibility)
    from scipy.optimize import linprog
    K = np.array([np.concatenate([A.ravel(), B.ravel()]) for A, B in pr.vertices])
    for A, B in poly.vertices:
        x = np.concatenate([A.ravel(), B.ravel()])
        res = linprog(np.zeros(len(K)), A_eq=np.vstack([K.T, np.ones(len(K))]), b_eq=np.append(x, 1.0),
                      bounds=[(0, None)] * len(K), method="highs")
        assert res.status == 0
    assert len(prune_vertices(enumerate_vertices(P0, P0, G, V_R, 0.0))) == 1


def test_augment_rejects_unstable_nominal():
    with pytest.raises(ClosedLoopError, match="Hurwitz"):
        augment(BaseGains(k_p=0.2, k_d=-5.0 + 1e-9, h=0.2), P0, V_R, 0.0, np.zeros(6))
