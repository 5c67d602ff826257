"""Nonlinear simulation of the two-vehicle platoon.

The leader follows the desired first-order acceleration model. The
follower is the nonlinear vehicle of :mod:`pecacc.model` driven through a
feedback linearization built on the *nominal* parameters, with the
controller integrated in the realization coordinates ``omega``.

Several realizations share one leader and are integrated together; each
column of the state arrays is one follower.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .closedloop import Realization, realize_controller
from .model import (BaseGains, PhysicalConstants, PhysicalParams, equilibrium_force, kmh,
                    map_physical_to_p, table_i_box, table_i_gains, with_wind)

__all__ = [
    "Scenario", "Trajectory", "RmseReport", "SimulationError", "DEFAULT_STEPS", "COLUMNS",
    "step_input", "simulate", "simulate_batch", "nominal_trajectory", "rmse", "case_study",
    "delay_study", "paper_scenario", "write_csv",
]

DEFAULT_STEPS = ((10.0, 11.0, 1.0), (21.0, 22.0, -1.0))
COLUMNS = ("t", "v1", "a1", "d", "eps2", "v2", "a2", "xi2", "u1", "u_eng")
V_LIMIT = 150.0


class SimulationError(RuntimeError):
    pass


def step_input(t, steps=DEFAULT_STEPS):
    """Leader command: amplitude ``a`` on each closed interval ``[t0, t1]``, else 0."""
    for t0, t1, amp in steps:
        if t0 <= t <= t1:
            return float(amp)
    return 0.0


@dataclass(frozen=True)
class Scenario:
    v_r: float = kmh(15.0)
    steps: tuple = DEFAULT_STEPS
    T: float = 32.0
    dt: float = 1e-3
    sample: float = 0.01
    delay: float = 0.0
    true_params: PhysicalParams = field(default_factory=lambda: table_i_box().nominal)
    nominal_params: PhysicalParams = field(default_factory=lambda: table_i_box().nominal)
    gains: BaseGains = field(default_factory=table_i_gains)
    const: PhysicalConstants = PhysicalConstants()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.delay < 0 or abs(self.delay / self.dt - round(self.delay / self.dt)) > 1e-9:
            raise ValueError("delay must be a nonnegative integer multiple of dt")
        if abs(self.sample / self.dt - round(self.sample / self.dt)) > 1e-9 or self.sample < self.dt:
            raise ValueError("sample period must be an integer multiple of dt")
        if not self.T > 22.0:
            raise ValueError("T must exceed 22 s so both steps complete")
        if self.v_r < 0:
            raise ValueError("v_r must be >= 0")
        self.true_params.validate()
        self.nominal_params.validate()
        self.gains.validate()

    @property
    def num_steps(self):
        return int(round(self.T / self.dt))

    @property
    def delay_steps(self):
        return int(round(self.delay / self.dt))

    @property
    def sample_every(self):
        return int(round(self.sample / self.dt))

    def nominal(self):
        """Same scenario with the follower at its nominal parameters and no wind."""
        return replace(self, true_params=with_wind(self.nominal_params, 0.0))


def paper_scenario(**kw) -> Scenario:
    """Follower at the lower parameter bounds, 15 km/h tail wind, leader at 15 km/h."""
    box = table_i_box()
    true = with_wind(box.lower, kmh(15.0))
    base = dict(v_r=kmh(15.0), true_params=true, nominal_params=box.nominal, gains=table_i_gains())
    base.update(kw)
    return Scenario(**base)


@dataclass
class Trajectory:
    t: np.ndarray
    v1: np.ndarray
    a1: np.ndarray
    d: np.ndarray
    eps2: np.ndarray
    v2: np.ndarray
    a2: np.ndarray
    xi2: np.ndarray
    u1: np.ndarray
    u_eng: np.ndarray

    def as_array(self):
        return np.column_stack([getattr(self, c) for c in COLUMNS])

    def __len__(self):
        return self.t.size


def _leader_rhs(a1, u1, tau_l):
    return a1, (u1 - a1) / tau_l


def simulate_batch(scenario: Scenario, realizations) -> list:
    """Simulate one follower per realization against a common leader.

    RK4 with fixed step ``dt``. The leader command is sampled at each step
    midpoint and held over the step, so switching instants on the step grid
    are integrated exactly. With ``delay > 0`` the engine command is
    computed once per step and applied ``delay`` later (zero-order hold,
    buffer pre-filled with the initial command).
    """
    realizations = list(realizations)
    sc = scenario
    g = sc.gains
    tp, const = sc.true_params, sc.const
    p0 = map_physical_to_p(sc.nominal_params, const)
    ctrls = [realize_controller(F, g) for F in realizations]
    G = np.array([c.Gbar for c in ctrls]).T          # (5, B)
    a_om = np.array([c.a_omega for c in ctrls])
    b_x = np.array([c.b_x for c in ctrls]).T          # (5, B)
    b_u = np.array([c.b_u for c in ctrls])
    B = len(ctrls)
    tau_l, tau_d, r, h = g.tau_leader, g.tau_des, g.r, g.h
    g0 = const.g
    cos_a, sin_a = math.cos(tp.alpha), math.sin(tp.alpha)
    resist0 = tp.f_r * tp.m * g0 * cos_a + tp.m * g0 * sin_a

    def accel(v, Fd):
        air = v + tp.v_w
        return (Fd - tp.f_v * v - resist0 - tp.C_d * air * np.abs(air)) / tp.m_eff

    def command(v2, a2, xi):
        return (p0.p1 * v2 + p0.p3 * v2 * v2 + (p0.p2 + p0.p4 * v2) * a2 + p0.p5
                + (xi - a2) / tau_d) / p0.p6

    def rhs(y, u1, u_hold):
        # xbar = (e2, v2, a2, v1, a1)
        v1, a1, d, v2, Fd, om = y
        a2 = accel(v2, Fd)
        e2 = d - r
        xi = om + G[0] * e2 + G[1] * v2 + G[2] * a2 + G[3] * v1 + G[4] * a1
        u_eng = command(v2, a2, xi) if u_hold is None else u_hold
        dom = (a_om * om + b_x[0] * e2 + b_x[1] * v2 + b_x[2] * a2 + b_x[3] * v1 + b_x[4] * a1
               + b_u * u1)
        dv1, da1 = _leader_rhs(a1, u1, tau_l)
        return (dv1, da1, v1 - v2, a2, (u_eng - Fd) / tp.tau, dom), xi, a2, u_eng

    ones = np.ones(B)
    v_r = sc.v_r
    F_init = equilibrium_force(v_r, tp, const)
    xb0 = np.array([h * v_r, v_r, 0.0, v_r, 0.0])
    y = [v_r * ones, 0.0 * ones, (r + h * v_r) * ones, v_r * ones, F_init * ones, -(xb0 @ G)]

    n = sc.num_steps
    every = sc.sample_every
    D = sc.delay_steps
    n_out = n // every + 1
    out = np.zeros((n_out, len(COLUMNS), B))
    buf = None
    if D > 0:
        _, xi_init, a_init, _ = rhs(y, 0.0, None)
        buf = np.repeat(command(y[3], a_init, xi_init)[None, :], D, axis=0)

    dt = sc.dt
    row = 0
    for k in range(n + 1):
        t = k * dt
        u_hold = None
        if buf is not None:
            _, xi_k, a_k, _ = rhs(y, 0.0, None)
            slot = k % D
            u_hold = buf[slot].copy()
            buf[slot] = command(y[3], a_k, xi_k)
        if k % every == 0:
            _, xi_k, a_k, ue_k = rhs(y, step_input(t, sc.steps), u_hold)
            v1, a1, d, v2 = y[0], y[1], y[2], y[3]
            out[row] = [t * ones, v1, a1, d, d - r - h * v2, v2, a_k, xi_k,
                        step_input(t, sc.steps) * ones, ue_k]
            row += 1
            if not (np.all(np.isfinite(v2)) and np.max(np.abs(v2)) <= V_LIMIT):
                bad = int(np.argmax(~np.isfinite(v2) | (np.abs(v2) > V_LIMIT)))
                raise SimulationError(
                    f"divergence at t={t:.3f} s: |v2| > {V_LIMIT} m/s for realization {bad} "
                    f"({realizations[bad]})")
        if k == n:
            break
        u1 = step_input(t + 0.5 * dt, sc.steps)
        k1 = rhs(y, u1, u_hold)[0]
        y2 = [a + 0.5 * dt * b for a, b in zip(y, k1)]
        k2 = rhs(y2, u1, u_hold)[0]
        y3 = [a + 0.5 * dt * b for a, b in zip(y, k2)]
        k3 = rhs(y3, u1, u_hold)[0]
        y4 = [a + dt * b for a, b in zip(y, k3)]
        k4 = rhs(y4, u1, u_hold)[0]
        y = [a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
    return [Trajectory(*(out[:row, j, b].copy() for j in range(len(COLUMNS)))) for b in range(B)]


def simulate(scenario: Scenario, realization: Realization) -> Trajectory:
    return simulate_batch(scenario, [realization])[0]


def nominal_trajectory(scenario: Scenario, realization: Realization | None = None) -> Trajectory:
    """:func:`simulate` with the follower at its nominal parameters and no wind."""
    if realization is None:
        realization = Realization.base(scenario.gains)
    return simulate(scenario.nominal(), realization)


@dataclass
class RmseReport:
    velocity_rmse: float
    spacing_rmse: float
    velocity_pct: float = 0.0
    spacing_pct: float = 0.0

    def to_dict(self):
        return {"velocity_rmse_mps": self.velocity_rmse, "spacing_rmse_m": self.spacing_rmse,
                "velocity_change_pct": self.velocity_pct, "spacing_change_pct": self.spacing_pct}


def rmse(traj: Trajectory, nominal: Trajectory) -> RmseReport:
    """RMS of the follower velocity and spacing-error deviations over the full horizon."""
    if traj.t.shape != nominal.t.shape or np.max(np.abs(traj.t - nominal.t), initial=0.0) > 1e-9:
        raise ValueError("trajectories are sampled on different grids")
    dv = traj.v2 - nominal.v2
    de = traj.eps2 - nominal.eps2
    return RmseReport(float(np.sqrt(np.mean(dv * dv))), float(np.sqrt(np.mean(de * de))))


def _pct(x, ref):
    return 100.0 * (x - ref) / ref if ref > 0 else 0.0


def case_study(realizations: dict, scenario: Scenario | None = None, baseline="F0",
               reference: Trajectory | None = None):
    """RMSE of every realization against the nominal trajectory.

    Returns ``(reports, trajectories)``, both keyed like ``realizations``;
    percent changes are relative to ``baseline``.
    """
    scenario = scenario or paper_scenario()
    names = list(realizations)
    if reference is None:
        reference = nominal_trajectory(scenario)
    trajs = dict(zip(names, simulate_batch(scenario, [realizations[k] for k in names])))
    reports = {k: rmse(trajs[k], reference) for k in names}
    ref = reports[baseline]
    for rep in reports.values():
        rep.velocity_pct = _pct(rep.velocity_rmse, ref.velocity_rmse)
        rep.spacing_pct = _pct(rep.spacing_rmse, ref.spacing_rmse)
    return reports, trajs


def delay_study(realizations: dict, scenario: Scenario | None = None, delay=0.2, baseline="F0"):
    """:func:`case_study` with an actuation delay on the engine command.

    The reference stays the delay-free nominal trajectory: the delay is
    part of what the realization has to cope with.
    """
    scenario = scenario or paper_scenario()
    reference = nominal_trajectory(replace(scenario, delay=0.0))
    return case_study(realizations, replace(scenario, delay=float(delay)), baseline, reference)


def write_csv(traj: Trajectory, path):
    """Trajectory as CSV with a header row and 9 significant digits."""
    data = traj.as_array()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in data:
            w.writerow([f"{x:.9g}" for x in r])
