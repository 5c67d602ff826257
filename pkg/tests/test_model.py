import itertools
import math
from dataclasses import fields, replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pecacc.model import (BaseGains, ModelError, PhysicalBox, PhysicalParams, PlantParams, equilibrium_force,
                          feedback_linearization, jerk_mismatch, jerk_row, kmh, map_physical_to_p,
                          nonlinear_rhs, p_box, plant_jerk, table_i_box, table_i_gains, with_wind)

BOX = table_i_box()
NOM = BOX.nominal
P0 = map_physical_to_p(NOM)


def test_nominal_p_hand_values():
    assert P0.p1 == pytest.approx(5.55 / (778 * 0.12), rel=1e-12)
    assert P0.p1 == pytest.approx(0.0594473, abs=5e-8)
    assert P0.p3 == pytest.approx(0.00419880, abs=5e-9)
    assert P0.p6 == pytest.approx(0.0107112, abs=5e-8)
    # 0.0262 * 731 * 9.81 / 93.36
    assert P0.p5 == pytest.approx(2.0124580, abs=5e-7)
    assert P0.p2 == pytest.approx(1 / 0.12 + 5.55 / 778, rel=1e-12)
    assert P0.p4 == pytest.approx(2 * 0.392 / 778, rel=1e-12)


def test_resistance_free_vehicle():
    p = map_physical_to_p(PhysicalParams(m=500, m_eff=520, f_v=0, f_r=0, C_d=0, tau=0.2))
    assert (p.p1, p.p3, p.p4, p.p5) == (0, 0, 0, 0)
    assert p.p2 == pytest.approx(5.0)
    assert p.p6 == pytest.approx(1 / (520 * 0.2))


def test_doubling_m_eff_halves_p6():
    p2x = map_physical_to_p(replace(NOM, m_eff=2 * NOM.m_eff))
    assert p2x.p6 == P0.p6 / 2


def test_mapping_rejects_bad_divisors():
    with pytest.raises(ModelError):
        map_physical_to_p(replace(NOM, tau=0.0))


def test_param_validation():
    with pytest.raises(ModelError, match="m_eff"):
        replace(NOM, m_eff=NOM.m - 1).validate()
    with pytest.raises(ModelError, match="C_d"):
        replace(NOM, C_d=-1).validate()
    with pytest.raises(ModelError, match="lower <= nominal <= upper"):
        PhysicalBox(BOX.upper, BOX.lower, NOM).validate()
    with pytest.raises(ModelError, match="h must be"):
        BaseGains(h=0).validate()


def test_p_box_degenerate():
    lo, hi = p_box(PhysicalBox(NOM, NOM, NOM))
    assert lo == hi == P0


def test_p_box_p6_range():
    lo, hi = p_box(BOX)
    assert lo.p6 == pytest.approx(1 / (793 * 0.13), rel=1e-12)
    assert hi.p6 == pytest.approx(1 / (763 * 0.11), rel=1e-12)
    assert lo.p6 == pytest.approx(0.0097003, abs=5e-8)
    assert hi.p6 == pytest.approx(0.0119147, abs=5e-8)


def _sample_box(rng, box, n):
    lo, hi = box.lower.as_array(), box.upper.as_array()
    return lo + rng.random((n, lo.size)) * (hi - lo)


def test_p_box_contains_samples_and_nominal():
    rng = np.random.default_rng(0)
    lo, hi = (p.as_array() for p in p_box(BOX))
    for x in _sample_box(rng, BOX, 1000):
        p = map_physical_to_p(PhysicalParams.from_array(x)).as_array()
        assert np.all(p >= lo - 1e-15) and np.all(p <= hi + 1e-15)
    assert np.all(P0.as_array() >= lo) and np.all(P0.as_array() <= hi)


def test_p_box_matches_dense_grid_extremes():
    # dense tensor grid over the uncertain axes, including v_w = 0
    names = [f.name for f in fields(PhysicalParams)]
    axes = [np.linspace(a, b, 5) if b > a else [a]
            for a, b in zip(BOX.lower.as_array(), BOX.upper.as_array())]
    vals = np.array([map_physical_to_p(PhysicalParams(*pt)).as_array() for pt in itertools.product(*axes)])
    lo, hi = (p.as_array() for p in p_box(BOX))
    assert np.allclose(vals.min(axis=0), lo, rtol=1e-12, atol=0)
    assert np.allclose(vals.max(axis=0), hi, rtol=1e-12, atol=0)
    assert "v_w" in names


def test_p5_is_not_monotone_in_wind():
    # corners alone miss the p5 minimum when the wind range straddles zero
    corners = [map_physical_to_p(with_wind(NOM, w)).p5 for w in (BOX.lower.v_w, BOX.upper.v_w)]
    assert map_physical_to_p(with_wind(NOM, 0.0)).p5 < min(corners)


def test_nonlinear_rhs_examples():
    p = replace(NOM, v_w=0.0)
    dv, _ = nonlinear_rhs(0.0, p.f_r * p.m * 9.81, 0.0, p)
    assert dv == pytest.approx(0.0, abs=1e-14)
    v = kmh(15.0)
    F = p.f_v * v + p.f_r * p.m * 9.81 + p.C_d * v * v
    assert F == pytest.approx(217.814, abs=5e-4)
    dv, dF = nonlinear_rhs(v, F, F, p)
    assert dv == pytest.approx(0.0, abs=1e-13)
    assert dF == 0.0
    assert equilibrium_force(v, p) == pytest.approx(F, rel=1e-14)


def test_negative_airspeed_drag_sign():
    p = replace(NOM, v_w=-10.0)
    dv, _ = nonlinear_rhs(2.0, 0.0, 0.0, p)
    # airspeed -8 m/s pushes the vehicle forward through drag
    assert dv > -(p.f_v * 2.0 + p.f_r * p.m * 9.81) / p.m_eff


def test_feedback_linearization_examples():
    zero = PlantParams(0, 5, 0, 0, 0, 0.01)
    assert feedback_linearization(0.0, 0.0, 0.0, zero, 0.12) == 0.0
    v = kmh(15.0)
    u = feedback_linearization(0.0, v, 0.0, P0, 0.12)
    assert u == pytest.approx(equilibrium_force(v, NOM), rel=1e-12)
    assert u == pytest.approx(217.814, abs=5e-4)


@settings(max_examples=100, deadline=None)
@given(v=st.floats(0.5, 35.0), a=st.floats(-3, 3), xi=st.floats(-3, 3))
def test_feedback_linearization_exact_on_nominal_plant(v, a, xi):
    assert jerk_mismatch(v, a, xi, P0, P0, 0.12) == pytest.approx(0.0, abs=1e-9)


def _true_jerk(v, F, xi, params, p0, tau_des):
    # da/dt of the nonlinear model under the nominal feedback linearization
    a = nonlinear_rhs(v, F, 0.0, params)[0]
    u = feedback_linearization(xi, v, a, p0, tau_des)
    air = v + params.v_w
    dF = (u - F) / params.tau
    return (dF - params.f_v * a - 2 * params.C_d * abs(air) * a) / params.m_eff


def test_plant_jerk_matches_differentiated_force_balance():
    rng = np.random.default_rng(1)
    for x in _sample_box(rng, BOX, 20):
        prm = PhysicalParams.from_array(x)
        p = map_physical_to_p(prm)
        v = rng.uniform(2, 30)
        F = equilibrium_force(v, prm) + rng.uniform(-200, 200)
        a = nonlinear_rhs(v, F, 0.0, prm)[0]
        u = rng.uniform(0, 800)
        exact = ((u - F) / prm.tau - prm.f_v * a - 2 * prm.C_d * (v + prm.v_w) * a) / prm.m_eff
        assert plant_jerk(v, a, u, p) == pytest.approx(exact, rel=1e-10, abs=1e-12)


def test_feedback_linearization_exact_in_closed_simulation():
    # RK4 over 5 s with true = nominal; the jerk follows (xi - a)/tau_des exactly
    rng = np.random.default_rng(2)
    tau_d = 0.12
    for _ in range(100):
        # speed stays positive over 5 s for |xi| <= 1
        v, F = rng.uniform(8, 25), equilibrium_force(10.0, NOM) + rng.uniform(-100, 100)
        xi = rng.uniform(-1, 1)

        def f(y):
            a = nonlinear_rhs(y[0], y[1], 0.0, NOM)[0]
            u = feedback_linearization(xi, y[0], a, P0, tau_d)
            return np.array(nonlinear_rhs(y[0], y[1], u, NOM))

        y = np.array([v, F])
        worst = 0.0
        for _ in range(50):
            a = nonlinear_rhs(y[0], y[1], 0.0, NOM)[0]
            worst = max(worst, abs(_true_jerk(y[0], y[1], xi, NOM, P0, tau_d) - (xi - a) / tau_d))
            dt = 0.1
            k1 = f(y); k2 = f(y + dt / 2 * k1); k3 = f(y + dt / 2 * k2); k4 = f(y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert worst <= 1e-9


def test_jerk_row_examples():
    assert jerk_row(P0, P0, 10.0, 0.12) == (0.0, 0.0, 0.0, 0.0)
    d5 = PlantParams.from_array(P0.as_array() + [0, 0, 0, 0, 0.1, 0])
    r = jerk_row(d5, P0, 10.0, 0.12)
    assert r[:3] == (0.0, 0.0, 0.0) and r[3] == pytest.approx(-0.1, abs=1e-15)
    d3 = PlantParams.from_array(P0.as_array() + [0, 0, 1, 0, 0, 0])
    r = jerk_row(d3, P0, 2.0, 0.12)
    assert r[0] == pytest.approx(-4.0) and r[3] == pytest.approx(4.0)


@pytest.mark.parametrize("v_kmh", [15.0, 50.0])
def test_jerk_row_matches_finite_differences(v_kmh):
    v_r = kmh(v_kmh)
    tau_d = 0.12
    rng = np.random.default_rng(int(v_kmh))
    lo, hi = (p.as_array() for p in p_box(BOX))
    h = 1e-6
    for _ in range(20):
        pt = PlantParams.from_array(lo + rng.random(6) * (hi - lo))

        def m(v, a, xi):
            return jerk_mismatch(v, a, xi, pt, P0, tau_d)

        jac = np.array([(m(v_r + h, 0, 0) - m(v_r - h, 0, 0)) / (2 * h),
                        (m(v_r, h, 0) - m(v_r, -h, 0)) / (2 * h),
                        (m(v_r, 0, h) - m(v_r, 0, -h)) / (2 * h)])
        r_v, r_a, r_xi, c = jerk_row(pt, P0, v_r, tau_d)
        row = np.array([r_v, r_a, r_xi])
        assert np.all(np.abs(jac - row) <= 1e-5 * np.maximum(np.abs(row), 1e-3))
        # affine model evaluated at the operating point
        assert m(v_r, 0.0, 0.0) == pytest.approx(r_v * v_r + c, abs=1e-8)


def test_gains_defaults():
    g = table_i_gains()
    assert (g.k_p, g.k_d, g.h, g.r, g.tau_des, g.tau_leader) == (0.2, 0.7, 0.2, 0.0, 0.12, 0.12)
    assert math.isclose(kmh(15.0), 4.166666666666667)
