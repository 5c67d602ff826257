"""Robust plant-equivalent controller realizations for a two-vehicle CACC platoon.

Modules
-------
model       vehicle model, plant coefficients, feedback linearization
closedloop  nominal and uncertain closed loops, realizations, vertex sets
lmi         LMI blocks for quadratic stability and the bounded real lemma
sdp         in-repo SDP solver, Jacobi eigenvalues, bisection oracle
synthesis   grid search over the free realization entry
sim         nonlinear RK4 simulation and RMSE reports
cli         command-line front end
"""

__version__ = "0.1.0"

from .model import (BaseGains, PhysicalBox, PhysicalParams, PlantParams, map_physical_to_p, p_box,
                    table_i_box, table_i_gains)
from .closedloop import Realization, enumerate_vertices, prune_vertices, realize_controller
from .sdp import SolverOptions, solve
from .synthesis import GridSpec, Objective, Setup, certify, grid_search, realization_table, vr_sweep
from .sim import Scenario, case_study, delay_study, paper_scenario, rmse, simulate
