"""The same comparison with a 0.2 s actuation delay.

The realizations were synthesised for the delay-free loop; the delay is an
unmodelled effect. RMSE is still measured against the delay-free nominal
trajectory.

Run:  python3 demos/04_delay.py
"""

from pecacc.closedloop import Realization
from pecacc.model import table_i_gains
from pecacc.sim import case_study, delay_study, paper_scenario

F0 = Realization.base(table_i_gains())
table = {"F0": F0, "F5": F0.with_f23(-0.599)}
sc = paper_scenario()
plain, _ = case_study(table, sc)
delayed, _ = delay_study(table, sc, delay=0.2)
for name in table:
    print(f"{name}: no delay {plain[name].velocity_rmse:.3e} ({plain[name].velocity_pct:+.1f}%)  "
          f"0.2 s delay {delayed[name].velocity_rmse:.3e} ({delayed[name].velocity_pct:+.1f}%)")
