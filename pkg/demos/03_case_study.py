"""Nonlinear case study: F0..F5 on the lightest, windiest vehicle.

The true follower sits at a corner of the physical box while the
controller uses the nominal parameters. The leader gets a +1 and a -1
acceleration step; RMSE is measured against the nominal trajectory.

Run:  python3 demos/03_case_study.py   (several minutes: full-resolution searches)
"""

from pecacc.sim import case_study, paper_scenario
from pecacc.synthesis import realization_table

table = realization_table()
reports, _ = case_study(table, paper_scenario())
print(f"{'':3s} {'f23':>8} {'v RMSE':>10} {'dv %':>8} {'eps RMSE':>10} {'de %':>8}")
for name, F in table.items():
    r = reports[name]
    print(f"{name:3s} {F.f23:8.4f} {r.velocity_rmse:10.3e} {r.velocity_pct:8.1f} "
          f"{r.spacing_rmse:10.3e} {r.spacing_pct:8.1f}")
