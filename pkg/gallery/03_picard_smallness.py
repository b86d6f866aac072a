"""How small must the data be for the cubic problem?

The nonlinear problem is solved by Picard iteration on the Duhamel form.
Contraction ratios tell us whether the map is a contraction on the current
time window; scaling the data up eventually breaks it and the solver
shrinks the window.  Bisection on the amplitude gives an empirical
smallness threshold.
"""

import numpy as np

from thermoplate.errors import NoConvergence
from thermoplate.grid import DomainSpec
from thermoplate.linear import TimeGrid, trace_norm_proxy
from thermoplate.nonlinear import NonlinearConfig, energy_report, picard_solve, smallness_threshold

dom = DomainSpec.rectangular(n2=2, modes=16)
rng = np.random.default_rng(0)
profile = rng.standard_normal((3,) + dom.shape) * np.exp(-np.sqrt(dom.zeta_sq))
profile /= trace_norm_proxy(dom, profile)
cfg = NonlinearConfig(a=1.0)
grid = TimeGrid(0.5, 64)

for amp in (0.1, 1.0, 3.0):
    try:
        traj, trace = picard_solve(dom, amp * profile, cfg, grid)
        ratios = ", ".join(f"{r:.3f}" for r in trace.ratios[1:6])
        print(f"amplitude {amp:4.1f}: {trace.iterations} iterations, ratios {ratios}")
        e = energy_report(traj, cfg.a)
        print(f"    energy {e.energy[0]:.4e} -> {e.energy[-1]:.4e}, max identity residual "
              f"{np.nanmax(np.abs(e.residual)):.2e}")
    except NoConvergence as err:
        print(f"amplitude {amp:4.1f}: {err}")

d, scale = smallness_threshold(dom, profile, cfg, grid, target=0.5, iters=20)
print(f"contraction ratio reaches 0.5 at trace-norm proxy d = {d:.4f}")
