"""Spectral solvers and symbol checks for a linear/semilinear thermoelastic plate model.

Submodules: ``symbol`` (the 3x3 symbol, its spectrum and holomorphic
calculus), ``grid`` and ``extension`` (sine/Fourier discretisation and odd
reflection), ``linear``, ``nonlinear`` and ``backtransform`` (time
integration and diagnostics), ``multiplier`` (Michlin sweeps and R-bound
estimates), ``acceptance`` and ``cli``.
"""

__version__ = "0.1.0"
