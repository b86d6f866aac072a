"""Where the symbol lives in the complex plane.

The coupled plate system reduces, mode by mode, to ``U_t + |zeta|^2 M U``
with a fixed 3x3 matrix ``M``.  Everything downstream depends on the
eigenvalues of ``M`` lying in an open right half-plane sector, so we start
by looking at them and at how large the resolvent gets just outside it.
"""

import numpy as np

from thermoplate.symbol import (
    characteristic_polynomial,
    eigen_decompose_M,
    resolvent_at,
    sector_report,
    spectral_angle,
)

print("characteristic polynomial coefficients:", characteristic_polynomial())
eig = eigen_decompose_M()
for lam in eig.values:
    print(f"  eigenvalue {lam.real:+.6f} {lam.imag:+.6f}i   arg {np.angle(lam):+.5f}")

phi = spectral_angle()
print(f"spectral angle {phi:.6f} rad; room left before pi/2: {np.pi / 2 - phi:.6f}")

# Resolvent size along a ray just outside the sector.  The quantity
# |lambda| * ||(lambda + |zeta|^2 M)^{-1}|| is scale invariant, so a single
# |zeta| suffices.
theta = np.pi - (phi + 0.05)
for r in np.geomspace(1e-2, 1e2, 9):
    lam = r * np.exp(1j * theta)
    R = resolvent_at(lam, 1.0)
    print(f"  |lambda|={r:8.3g}   |lambda| ||R|| = {r * np.linalg.norm(R, 2):.4f}")

report, table = sector_report()
print(f"sampled sup over the sector grid: {report.resolvent_sup:.4f} "
      f"({report.n_lambda} lambdas x {report.n_zeta} |zeta| values)")
