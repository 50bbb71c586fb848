"""First-order convergence of minimizing movements to the reference solution.

Sup-in-time W2 error against the front-tracking solver for h = 4e-3, 2e-3,
1e-3 from rho = 2 on [0, 1/2].
"""

from wgf import ModelParams, PdeConfig, make_uniform
from wgf.analysis import convergence_study

params = ModelParams(1.0, 1.0)
report = convergence_study(make_uniform(0.0, 0.5, params, 256), 0.25, params, [4e-3, 2e-3, 1e-3], N=256, pde=PdeConfig())
tab = report.tables["convergence"]
print(f"{'h':>8} {'sup W2 error':>14} {'order':>7}")
for h, e, o in zip(tab["h"], tab["error"], tab["order"]):
    print(f"{h:8.0e} {e:14.4e} {o:7.2f}")
print("all checks pass" if report.passed else "FAILED: " + ", ".join(c.name for c in report.failures()))
