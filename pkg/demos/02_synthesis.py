"""Grid search for the best f23 under the three objectives.

Each grid point is one SDP; the grid is refined around the best coarse
point. A coarse grid is used here to keep the run short, the library
default goes down to a 1e-5 step.

Run:  python3 demos/02_synthesis.py
"""

from pecacc.synthesis import GAMMA_ONLY, TRACE_ONLY, TRACE_PLUS_GAMMA, GridSpec, Objective, grid_search

grid = GridSpec(lo=-1.0, hi=1.0, coarse_step=0.05, final_step=1e-3)
for variant in (TRACE_PLUS_GAMMA, TRACE_ONLY, GAMMA_ONLY):
    rep = grid_search(Objective(variant), grid)
    print(f"{variant:15s} f23* = {rep.f23_star:+.4f}  gamma = {rep.gamma_star:.5g}  "
          f"trace = {rep.trace_star:.5g}  ({len(rep.table)} SDPs, {rep.wall_time:.1f} s)")

# the objective curve for the gamma variant, coarse part only
rep = grid_search(Objective(GAMMA_ONLY), GridSpec(-1.0, 1.0, 0.2, 0.2))
print("\nf23      gamma")
for p in rep.table:
    print(f"{p.f23:+.2f}  {p.gamma:.4g}" if p.feasible else f"{p.f23:+.2f}  infeasible")
