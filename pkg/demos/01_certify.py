"""Certify one realization over the plant-offset polytope.

The follower's PEC realization only changes the closed loop through the
single entry f23. For a given f23 we build the vertex set of the stacked
nominal/error system, then ask the SDP solver for a common Lyapunov matrix
and for the smallest BRL gamma and output-energy trace.

Run:  python3 demos/01_certify.py
"""

import numpy as np

from pecacc.synthesis import Setup, certify

setup = Setup()
print(f"operating point v_r = {setup.v_r:.3f} m/s")
print(f"{'f23':>7} {'vertices':>8} {'stable':>7} {'gamma':>10} {'trace':>10}")
for f23 in (-1.0, -0.6, 0.0, 0.3, 1.0, 1e3):
    res = certify(f23, setup)
    print(f"{f23:7.2f} {res.num_vertices:8d} {str(res.stable):>7} {res.gamma_min:10.4g} {res.trace_min:10.4g}")

# the Lyapunov matrix is a real certificate: check it on a random convex combination
res = certify(-0.6, setup)
poly = setup.polytope(-0.6)
alpha = np.random.default_rng(1).dirichlet(np.ones(len(poly)))
A = sum(a * Av for a, (Av, _) in zip(alpha, poly.vertices))
lam = np.linalg.eigvalsh(A.T @ res.P + res.P @ A)
print(f"\nlargest eigenvalue of A'P + PA at a random interior point: {lam[-1]:.3e}")
