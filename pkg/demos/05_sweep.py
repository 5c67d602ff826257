"""How the optimal f23 moves with the operating point.

Run:  python3 demos/05_sweep.py
"""

from pecacc.model import kmh
from pecacc.synthesis import GAMMA_ONLY, GridSpec, Objective, vr_sweep

rows = vr_sweep(Objective(GAMMA_ONLY), [kmh(v) for v in (10, 30, 50, 70, 90)],
                grid=GridSpec(-1.0, 1.0, 0.05, 1e-3))
for r in rows:
    print(f"v_r = {r.v_r * 3.6:5.1f} km/h  f23* = {r.f23_star:+.4f}  gamma = {r.gamma_star:.4g}")
