"""Longitudinal vehicle model, plant parametrization and feedback linearization.

The follower obeys a force balance with a first-order driveline::

    m_eff * dv/dt = F - f_v v - f_r m g cos(alpha) - C_d (v + v_w)|v + v_w| - m g sin(alpha)
    tau * dF/dt   = u_eng - F

Differentiating the force balance once gives the jerk form used by the
linear analysis,

    da/dt = p6 u_eng - p1 v - p3 v**2 - p5 - (p2 + p4 v) a,

with the six plant coefficients computed by :func:`map_physical_to_p`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

__all__ = [
    "PhysicalConstants", "PhysicalParams", "PhysicalBox", "PlantParams",
    "OperatingPoint", "BaseGains", "ModelError",
    "map_physical_to_p", "p_box", "nonlinear_rhs", "feedback_linearization",
    "plant_jerk", "jerk_row", "jerk_mismatch",
    "equilibrium_force", "with_wind",
    "table_i_box", "table_i_gains", "kmh", "to_kmh",
]


class ModelError(ValueError):
    """Raised when a parameter set violates a model invariant."""


def kmh(value):
    """Convert km/h to m/s."""
    return value / 3.6


def to_kmh(value):
    return value * 3.6


@dataclass(frozen=True)
class PhysicalConstants:
    g: float = 9.81

    def __post_init__(self):
        if not self.g > 0:
            raise ModelError("g must be positive")


@dataclass(frozen=True)
class PhysicalParams:
    """Physical longitudinal parameters of one vehicle (SI units)."""

    m: float
    m_eff: float
    f_v: float
    f_r: float
    C_d: float
    tau: float
    alpha: float = 0.0
    v_w: float = 0.0

    def validate(self):
        if not self.m > 0:
            raise ModelError(f"m must be > 0 (got {self.m})")
        if not self.m_eff >= self.m:
            raise ModelError(f"m_eff must be >= m (got m_eff={self.m_eff}, m={self.m})")
        if not self.tau > 0:
            raise ModelError(f"tau must be > 0 (got {self.tau})")
        for name in ("f_v", "f_r", "C_d"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0 (got {getattr(self, name)})")
        return self

    def as_array(self):
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PhysicalBox:
    """Interval uncertainty on :class:`PhysicalParams`."""

    lower: PhysicalParams
    upper: PhysicalParams
    nominal: PhysicalParams

    def validate(self):
        lo, nom, hi = (p.as_array() for p in (self.lower, self.nominal, self.upper))
        if np.any(lo > nom) or np.any(nom > hi):
            names = [f.name for f in fields(PhysicalParams)]
            bad = [n for n, a, b, c in zip(names, lo, nom, hi) if not a <= b <= c]
            raise ModelError(f"box must satisfy lower <= nominal <= upper; violated for {bad}")
        for p in (self.lower, self.nominal, self.upper):
            p.validate()
        return self

    def uncertain_fields(self):
        """Names of the parameters with nonzero interval width."""
        return [f.name for f in fields(PhysicalParams)
                if getattr(self.upper, f.name) > getattr(self.lower, f.name)]

    def scaled(self, factor):
        """Box whose widths about the nominal are multiplied by ``factor``."""
        nom = self.nominal.as_array()
        lo = nom + factor * (self.lower.as_array() - nom)
        hi = nom + factor * (self.upper.as_array() - nom)
        return PhysicalBox(PhysicalParams.from_array(lo), PhysicalParams.from_array(hi), self.nominal)


@dataclass(frozen=True)
class PlantParams:
    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p6: float

    def as_array(self):
        return np.array([self.p1, self.p2, self.p3, self.p4, self.p5, self.p6])

    @classmethod
    def from_array(cls, values):
        values = [float(v) for v in values]
        if len(values) != 6:
            raise ValueError("PlantParams needs exactly six coefficients")
        return cls(*values)

    def __sub__(self, other):
        return self.as_array() - other.as_array()


@dataclass(frozen=True)
class OperatingPoint:
    v_r: float

    def __post_init__(self):
        if self.v_r < 0:
            raise ModelError("v_r must be >= 0")


@dataclass(frozen=True)
class BaseGains:
    """Gains of the base CACC law and the time constants it assumes."""

    k_p: float = 0.2
    k_d: float = 0.7
    h: float = 0.2
    r: float = 0.0
    tau_des: float = 0.12
    tau_leader: float = 0.12

    def validate(self):
        for name in ("h", "tau_des", "tau_leader", "k_p", "k_d"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be > 0 (got {getattr(self, name)})")
        return self

    def to_dict(self):
        return asdict(self)


def map_physical_to_p(params: PhysicalParams, const: PhysicalConstants = PhysicalConstants()) -> PlantParams:
    """Plant coefficients p1..p6 of the jerk form of the vehicle model."""
    if not params.tau > 0 or not params.m_eff > 0:
        raise ModelError("tau and m_eff must be positive")
    m, me, fv, fr, cd, tau, al, vw = (params.m, params.m_eff, params.f_v, params.f_r,
                                      params.C_d, params.tau, params.alpha, params.v_w)
    g = const.g
    lin = fv + 2.0 * cd * vw
    return PlantParams(
        p1=lin / (me * tau),
        p2=1.0 / tau + lin / me,
        p3=cd / (me * tau),
        p4=2.0 * cd / me,
        p5=(fr * m * g * math.cos(al) + m * g * math.sin(al) + cd * vw ** 2) / (me * tau),
        p6=1.0 / (me * tau),
    )


def _candidates(lo, hi, name):
    if hi <= lo:
        return [lo]
    vals = [lo, hi]
    # p5 is convex in v_w; its minimum over a straddling interval sits at v_w = 0.
    if name == "v_w" and lo < 0.0 < hi:
        vals.append(0.0)
    return vals


def p_box(box: PhysicalBox, const: PhysicalConstants = PhysicalConstants()):
    """Componentwise bounds of the plant coefficients over a physical box.

    Every coefficient is monotone in each physical parameter except ``p5``,
    which is quadratic in the wind velocity; the interval is therefore
    evaluated on all corners plus ``v_w = 0`` when the wind range straddles
    zero, which makes the bounds exact.

    Returns
    -------
    lower, upper : PlantParams
    """
    names = [f.name for f in fields(PhysicalParams)]
    lo, hi = box.lower.as_array(), box.upper.as_array()
    axes = [_candidates(a, b, n) for a, b, n in zip(lo, hi, names)]
    values = np.array([map_physical_to_p(PhysicalParams(*pt), const).as_array()
                       for pt in itertools.product(*axes)])
    return PlantParams.from_array(values.min(axis=0)), PlantParams.from_array(values.max(axis=0))


def nonlinear_rhs(v, F_drive, u_eng, params: PhysicalParams, const: PhysicalConstants = PhysicalConstants()):
    """Right-hand side ``(dv/dt, dF/dt)`` of the nonlinear vehicle model.

    Works elementwise on numpy arrays as well as on floats.
    """
    air = v + params.v_w
    resist = (params.f_v * v
              + params.f_r * params.m * const.g * math.cos(params.alpha)
              + params.C_d * air * np.abs(air)
              + params.m * const.g * math.sin(params.alpha))
    dv = (F_drive - resist) / params.m_eff
    dF = (u_eng - F_drive) / params.tau
    return dv, dF


def equilibrium_force(v, params: PhysicalParams, const: PhysicalConstants = PhysicalConstants()):
    """Drive force that holds constant speed ``v``."""
    air = v + params.v_w
    return (params.f_v * v + params.f_r * params.m * const.g * math.cos(params.alpha)
            + params.C_d * air * abs(air) + params.m * const.g * math.sin(params.alpha))


def feedback_linearization(xi, v, a, p0: PlantParams, tau_des):
    """Engine command that turns the nominal jerk dynamics into ``da/dt = (xi - a)/tau_des``."""
    return (p0.p1 * v + p0.p3 * v * v + (p0.p2 + p0.p4 * v) * a + p0.p5
            + (xi - a) / tau_des) / p0.p6


def plant_jerk(v, a, u_eng, p: PlantParams):
    """Jerk of the vehicle in the p-parametrization (valid for ``v + v_w >= 0``)."""
    return p.p6 * u_eng - p.p1 * v - p.p3 * v * v - p.p5 - (p.p2 + p.p4 * v) * a


def jerk_mismatch(v, a, xi, p_true: PlantParams, p0: PlantParams, tau_des):
    """Deviation of the true jerk from the linearized target ``(xi - a)/tau_des``."""
    u = feedback_linearization(xi, v, a, p0, tau_des)
    return plant_jerk(v, a, u, p_true) - (xi - a) / tau_des


def jerk_row(p_true: PlantParams, p0: PlantParams, v_r, tau_des):
    """Uncertainty-induced part of the follower jerk, linearized at ``v = v_r``.

    Returns ``(r_v, r_a, r_xi, c)`` such that the mismatch
    ``da/dt - (xi - a)/tau_des`` is approximated by ``r_v v + r_a a + r_xi xi + c``
    with ``v`` the absolute speed.
    """
    d1, d2, d3, d4, d5, d6 = p_true - p0
    q1, q2, q3, q4, q5, q6 = p0.as_array()
    r_v = -d1 - 2.0 * v_r * d3 + d6 * (q1 + 2.0 * q3 * v_r) / q6
    r_a = -d2 - v_r * d4 + d6 * ((q2 + q4 * v_r) / q6 - 1.0 / (q6 * tau_des))
    r_xi = d6 / (q6 * tau_des)
    c = d3 * v_r ** 2 - d5 + d6 * (q5 - q3 * v_r ** 2) / q6
    return r_v, r_a, r_xi, c


def table_i_box() -> PhysicalBox:
    """Nominal parameters and uncertainty ranges of the case-study vehicle."""
    nominal = PhysicalParams(m=731.0, m_eff=778.0, f_v=5.55, f_r=0.0262, C_d=0.392,
                             tau=0.12, alpha=0.0, v_w=0.0)
    lower = PhysicalParams(m=716.0, m_eff=763.0, f_v=5.5, f_r=0.0262, C_d=0.3528,
                           tau=0.11, alpha=0.0, v_w=-5.0)
    upper = PhysicalParams(m=746.0, m_eff=793.0, f_v=5.6, f_r=0.0262, C_d=0.4312,
                           tau=0.13, alpha=0.0, v_w=5.0)
    return PhysicalBox(lower, upper, nominal)


def table_i_gains() -> BaseGains:
    return BaseGains(k_p=0.2, k_d=0.7, h=0.2, r=0.0, tau_des=0.12, tau_leader=0.12)


def with_wind(params: PhysicalParams, v_w) -> PhysicalParams:
    return replace(params, v_w=float(v_w))
