"""Grid search over the free realization entry ``f23``.

Every grid point is an independent SDP: the bounded-real-lemma program of
the stacked nominal/error system over the vertices of the plant-offset box,
with one of three objectives (trace, gamma, or their weighted sum). The
grid is refined around the best point until the final step is reached.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .closedloop import (ClosedLoopError, PolytopicSystem, Realization, cz_matrix, enumerate_vertices,
                         follower_block, prune_vertices)
from .lmi import brl_problem, lyapunov_problem, smat, svec_dim
from .model import BaseGains, PhysicalBox, kmh, map_physical_to_p, p_box, table_i_box, table_i_gains
from .sdp import INFEASIBLE, OPTIMAL, SolverOptions, feasibility_margin, solve

__all__ = [
    "Objective", "GridSpec", "Setup", "GridPoint", "SynthesisReport", "CertifyResult",
    "SweepRow", "SynthesisError", "SolverFailure", "TRACE_PLUS_GAMMA", "TRACE_ONLY", "GAMMA_ONLY",
    "evaluate_point", "certify", "grid_search", "vr_sweep", "realization_table", "default_setup",
]

log = logging.getLogger(__name__)

TRACE_PLUS_GAMMA = "TracePlusGamma"
TRACE_ONLY = "TraceOnly"
GAMMA_ONLY = "GammaOnly"
VARIANTS = (TRACE_PLUS_GAMMA, TRACE_ONLY, GAMMA_ONLY)
TIE_TOL = 1e-12


class SynthesisError(RuntimeError):
    """No feasible grid point."""


class SolverFailure(RuntimeError):
    """The SDP solver ended without a usable status."""


@dataclass(frozen=True)
class Objective:
    variant: str = TRACE_PLUS_GAMMA
    w_trace: float = 1.0
    w_gamma: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown objective variant {self.variant!r}; expected one of {VARIANTS}")
        if self.w_trace < 0 or self.w_gamma < 0 or (self.w_trace == 0 and self.w_gamma == 0):
            raise ValueError("objective weights must be >= 0 and not both zero")

    @property
    def weights(self):
        """Effective ``(w_trace, w_gamma)`` passed to the SDP."""
        if self.variant == TRACE_ONLY:
            return self.w_trace, 0.0
        if self.variant == GAMMA_ONLY:
            return 0.0, self.w_gamma
        return self.w_trace, self.w_gamma

    @classmethod
    def from_name(cls, name, w_trace=1.0, w_gamma=1.0):
        aliases = {"both": TRACE_PLUS_GAMMA, "trace": TRACE_ONLY, "gamma": GAMMA_ONLY}
        return cls(aliases.get(name, name), w_trace, w_gamma)


@dataclass(frozen=True)
class GridSpec:
    lo: float = -1.0
    hi: float = 1.0
    coarse_step: float = 1e-2
    final_step: float = 1e-5
    refine_factor: int = 10

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi (got {self.lo}, {self.hi})")
        if not 0 < self.final_step <= self.coarse_step:
            raise ValueError("grid steps must be positive and decreasing")
        if self.refine_factor < 2:
            raise ValueError("refine_factor must be >= 2")

    @property
    def steps(self):
        out = [self.coarse_step]
        while out[-1] > self.final_step * (1 + 1e-9):
            out.append(max(out[-1] / self.refine_factor, self.final_step))
        return out

    def coarse_points(self):
        n = int(math.floor((self.hi - self.lo) / self.coarse_step + 1e-9))
        pts = [self.lo + k * self.coarse_step for k in range(n + 1)]
        if self.hi - pts[-1] > 1e-12:
            pts.append(self.hi)
        return [_key(p) for p in pts]


def _key(f23):
    # grid coordinates are compared after rounding away accumulation noise
    return float(round(f23, 12))


@dataclass(frozen=True)
class Setup:
    """Read-only synthesis data: uncertainty box, gains, operating point and output."""

    box: PhysicalBox = field(default_factory=table_i_box)
    gains: BaseGains = field(default_factory=table_i_gains)
    v_r: float = kmh(50.0)
    Cz_mode: str = "spacing+velocity"
    options: SolverOptions = SolverOptions()

    def __post_init__(self):
        self.box.validate()
        self.gains.validate()
        if self.v_r < 0:
            raise ValueError("v_r must be >= 0")
        cz_matrix(self.gains, self.Cz_mode)

    @cached_property
    def p0(self):
        return map_physical_to_p(self.box.nominal)

    @cached_property
    def p_bounds(self):
        return p_box(self.box)

    def polytope(self, f23, prune=True) -> PolytopicSystem:
        lo, hi = self.p_bounds
        poly = enumerate_vertices(lo, hi, self.gains, self.v_r, f23, self.Cz_mode, p0=self.p0)
        return prune_vertices(poly) if prune else poly

    def with_vr(self, v_r):
        return replace(self, v_r=float(v_r))

    def __getstate__(self):
        # drop cached values so pickled copies stay small and consistent
        return {k: v for k, v in self.__dict__.items() if k not in ("p0", "p_bounds")}

    def __setstate__(self, state):
        self.__dict__.update(state)


def default_setup(**kw) -> Setup:
    return Setup(**kw)


@dataclass
class GridPoint:
    f23: float
    feasible: bool
    gamma: float
    trace: float
    objective: float
    status: str


@dataclass
class SynthesisReport:
    objective: Objective
    f23_star: float
    gamma_star: float
    trace_star: float
    objective_star: float
    table: list
    P: np.ndarray | None
    margin: float
    wall_time: float
    num_vertices: int
    feasible: bool = True
    note: str = ""

    def to_dict(self):
        return {
            "objective": self.objective.variant,
            "w_trace": self.objective.w_trace,
            "w_gamma": self.objective.w_gamma,
            "feasible": self.feasible,
            "f23_star": self.f23_star,
            "gamma_star": self.gamma_star,
            "trace_star": self.trace_star,
            "objective_star": self.objective_star,
            "certificate_margin": self.margin,
            "num_vertices": self.num_vertices,
            "grid_points": len(self.table),
            "note": self.note,
            "P": None if self.P is None else self.P.tolist(),
        }


def _point_from_solution(f23, sol, objective: Objective, Cz):
    w_trace, w_gamma = objective.weights
    if sol.status != OPTIMAL:
        return GridPoint(f23, False, math.inf, math.inf, math.inf, sol.status), None
    n = Cz.shape[1]
    N = svec_dim(n)
    P = smat(sol.y[:N])
    gamma = float(sol.y[N]) if w_gamma > 0 else math.inf
    trace = float(np.trace(Cz @ P @ Cz.T))
    return GridPoint(f23, True, gamma, trace, float(sol.objective), sol.status), P


def evaluate_point(f23, objective: Objective, setup: Setup, with_margin=False):
    """Solve the synthesis SDP at one grid point.

    Returns ``(GridPoint, P, margin)``; ``margin`` is the independent
    eigenvalue check of the solution when ``with_margin`` is set.
    """
    poly = setup.polytope(f23)
    w_trace, w_gamma = objective.weights
    problem = brl_problem(poly.vertices, poly.C_z, w_trace, w_gamma)
    sol = solve(problem, setup.options)
    point, P = _point_from_solution(f23, sol, objective, poly.C_z)
    margin = math.nan
    if with_margin and point.feasible:
        margin = feasibility_margin(sol.y, problem)
    return point, P, margin


def _eval_task(args):
    f23, objective, setup = args
    point, _, _ = evaluate_point(f23, objective, setup)
    return point


def _evaluate_many(points, objective, setup, workers):
    tasks = [(p, objective, setup) for p in points]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_eval_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_eval_task(t) for t in tasks]


_BAD = ("NumericalFailure", "MaxIter")


def _best(table):
    best = None
    for pt in sorted(table.values(), key=lambda p: p.f23):
        if not pt.feasible:
            continue
        if best is None or pt.objective < best.objective - TIE_TOL:
            best = pt
    return best


def grid_search(objective: Objective, grid: GridSpec = GridSpec(), setup: Setup | None = None,
                workers=1) -> SynthesisReport:
    """Coarse-to-fine search for the ``f23`` minimizing the objective.

    Each refinement level re-grids ``best +- previous step`` with the next
    step size. Ties within ``1e-12`` go to the smallest ``f23``. Raises
    :class:`SynthesisError` when no grid point is feasible and
    :class:`SolverFailure` when every point ended in a solver failure.
    """
    setup = setup or Setup()
    t0 = time.perf_counter()
    follower_block(setup.gains)
    table = {}

    def run(points):
        new = [p for p in points if p not in table]
        for pt in _evaluate_many(new, objective, setup, workers):
            table[pt.f23] = pt

    run(grid.coarse_points())
    best = _best(table)
    if best is None:
        statuses = {p.status for p in table.values()}
        if statuses and statuses <= set(_BAD):
            raise SolverFailure(f"solver failed on every grid point ({sorted(statuses)})")
        raise SynthesisError("no feasible grid point: the BRL program is infeasible on the whole grid")
    steps = grid.steps
    for prev, step in zip(steps[:-1], steps[1:]):
        k = int(round(prev / step))
        pts = [_key(best.f23 + j * step) for j in range(-k, k + 1)]
        run([p for p in pts if grid.lo - 1e-12 <= p <= grid.hi + 1e-12])
        best = _best(table)
    point, P, margin = evaluate_point(best.f23, objective, setup, with_margin=True)
    poly = setup.polytope(best.f23)
    note = "single-vertex polytope" if len(poly) == 1 else ""
    rows = sorted(table.values(), key=lambda p: p.f23)
    log.info("grid_search %s: f23*=%.6g objective=%.6g (%d points)", objective.variant, best.f23,
             best.objective, len(rows))
    return SynthesisReport(objective=objective, f23_star=best.f23, gamma_star=point.gamma,
                           trace_star=point.trace, objective_star=point.objective, table=rows, P=P,
                           margin=margin, wall_time=time.perf_counter() - t0,
                           num_vertices=len(poly), note=note)


@dataclass
class CertifyResult:
    f23: float
    stable: bool
    gamma_min: float
    trace_min: float
    P: np.ndarray | None
    lyapunov_margin: float
    statuses: dict
    num_vertices: int

    @property
    def passed(self):
        return self.stable and math.isfinite(self.gamma_min)

    def to_dict(self):
        return {
            "f23": self.f23, "stable": self.stable, "passed": self.passed,
            "gamma_min": self.gamma_min, "trace_min": self.trace_min,
            "lyapunov_margin": self.lyapunov_margin, "statuses": self.statuses,
            "num_vertices": self.num_vertices,
            "P": None if self.P is None else self.P.tolist(),
        }


def certify(f23, setup: Setup | None = None) -> CertifyResult:
    """Quadratic-stability and BRL certificates for one realization.

    ``stable`` is feasibility of the Lyapunov program over all vertices;
    ``gamma_min`` and ``trace_min`` come from the BRL program with the
    gamma and trace objectives. A failed certificate is a result, not an error.
    """
    setup = setup or Setup()
    poly = setup.polytope(f23)
    lyap = lyapunov_problem([A for A, _ in poly.vertices])
    sl = solve(lyap, setup.options)
    statuses = {"lyapunov": sl.status}
    P = None
    margin = math.nan
    if sl.status == OPTIMAL:
        P = smat(sl.y)
        margin = feasibility_margin(sl.y, lyap)
    stable = sl.status == OPTIMAL and margin >= -setup.options.tol_feas
    N = svec_dim(poly.C_z.shape[1])
    sg = solve(brl_problem(poly.vertices, poly.C_z, 0.0, 1.0), setup.options)
    st = solve(brl_problem(poly.vertices, poly.C_z, 1.0, 0.0), setup.options)
    statuses.update(gamma=sg.status, trace=st.status)
    gamma = float(sg.y[N]) if sg.status == OPTIMAL else math.inf
    trace = float(st.objective) if st.status == OPTIMAL else math.inf
    for name, s in statuses.items():
        if s not in (OPTIMAL, INFEASIBLE):
            log.warning("certify f23=%g: %s program ended with %s", f23, name, s)
    return CertifyResult(f23=float(f23), stable=stable, gamma_min=gamma, trace_min=trace, P=P,
                         lyapunov_margin=margin, statuses=statuses, num_vertices=len(poly))


@dataclass
class SweepRow:
    v_r: float
    f23_star: float
    objective_star: float
    gamma_star: float
    trace_star: float


def vr_sweep(objective: Objective, v_r_list, setup: Setup | None = None, grid: GridSpec = GridSpec(),
             workers=1):
    """Grid searches at several operating points with a shared grid."""
    setup = setup or Setup()
    rows = []
    for v in v_r_list:
        rep = grid_search(objective, grid, setup.with_vr(v), workers=workers)
        rows.append(SweepRow(float(v), rep.f23_star, rep.objective_star, rep.gamma_star, rep.trace_star))
    return rows


def realization_table(setup: Setup | None = None, grid: GridSpec = GridSpec(), reports=None, workers=1):
    """The six realizations F0..F5 keyed ``"F0"``...``"F5"``.

    F0 is the base realization, F1 changes every entry except ``f23``, F2
    is a deliberately poor ``f23 = 0.3``; F3, F4 and F5 take ``f23`` from
    the trace+gamma, trace and gamma grid searches. ``reports`` may carry
    precomputed :class:`SynthesisReport` objects keyed by variant.
    """
    setup = setup or Setup()
    g = setup.gains
    base = Realization.base(g)
    q = -g.tau_des / g.h
    reports = dict(reports or {})
    for variant in (TRACE_PLUS_GAMMA, TRACE_ONLY, GAMMA_ONLY):
        if variant not in reports:
            reports[variant] = grid_search(Objective(variant), grid, setup, workers=workers)
    return {
        "F0": base,
        "F1": Realization(q, q, 0.0, q, q),
        "F2": base.with_f23(0.3),
        "F3": base.with_f23(reports[TRACE_PLUS_GAMMA].f23_star),
        "F4": base.with_f23(reports[TRACE_ONLY].f23_star),
        "F5": base.with_f23(reports[GAMMA_ONLY].f23_star),
    }
