"""Numerical Michlin and R-boundedness checks.

The resolvent family ``lambda (lambda + |xi|^2 M)^{-1}`` should satisfy
Michlin-type bounds uniformly on the sector.  We sample the scaled
derivative sups on a grid and on a doubled one and compare.  The lesson
is that the resolvent peaks sharply near the sector boundary, so a coarse
grid misses the peak and the doubled grid finds much larger values.  The
packaged default (32 radii, k up to 32) is where the ratios settle below 2.
Then
Rademacher averages give a lower estimate of the R-bound of a finite
resolvent family.
"""

import numpy as np

from thermoplate.multiplier import (
    MichlinSweep,
    RBoundSample,
    family_estimate,
    kahane_check,
    rbound_estimate,
    resolvent_family,
    sweep_stability,
)
from thermoplate.symbol import sector_lambdas, spectral_angle

for k_max, n_radii in ((8, 8), (32, 32)):
    sweep = MichlinSweep(n1=1, n2=1, n_xi=7, k_max=k_max, n_radii=n_radii, n_angles=5)
    stab = sweep_stability(sweep, [(1, 0)])
    worst = max(max(r.values()) for _, _, r in stab.values())
    print(f"k_max={k_max:2d}, {n_radii:2d} radii: worst base/doubled ratio {worst:.3f}")

sweep = MichlinSweep(n1=1, n2=1, n_xi=7, k_max=32, n_radii=32, n_angles=5)
for label, (base, fine, ratios) in sweep_stability(sweep, [(1, 0)]).items():
    print(label)
    for gamma, ratio in sorted(ratios.items()):
        print(f"  gamma={gamma}  sup={base.sup(gamma):9.4f}  doubled={fine.sup(gamma):9.4f}  ratio={ratio:.3f}")

rng = np.random.default_rng(0)
lams = sector_lambdas(spectral_angle() + 0.05, 16, 9)
N = 32
T = resolvent_family(lams[rng.choice(lams.size, N)], rng.uniform(0, 10, N) ** 2)
x = rng.standard_normal((N, 3)) + 1j * rng.standard_normal((N, 3))
print(f"R-bound lower estimate for {N} operators: {rbound_estimate(RBoundSample(T, x, 1000, 0)).ratio:.4f}")
est = family_estimate(T, 4, 2.0, 500, 0)
print(f"prefix estimates are nondecreasing: N=1 {est[0]:.4f}, N={N} {est[-1]:.4f}")

b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
ok, ratio = kahane_check(b * rng.uniform(0, 1, 5), b, rng.standard_normal((5, 3)))
print(f"Kahane contraction: holds={ok}, ratio={ratio:.4f}")
