"""Mode-wise exact solver for ``U_t + A U = F``.

In the spectral basis ``A`` acts on the mode with ``s = |zeta|^2`` as the
3x3 matrix ``s M``.  The semigroup is evaluated through the cached
eigen-decomposition of ``M``; forcing is reconstructed piecewise linearly
between time nodes and integrated exactly (second-order exponential time
differencing):

    U_{n+1} = e^{-hA} U_n + h phi_1(-hA) F_n + h phi_2(-hA) (F_{n+1} - F_n)

with ``phi_1(z) = (e^z - 1)/z`` and ``phi_2(z) = (e^z - 1 - z)/z^2``.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import ShapeMismatch, SingularResolvent, ZeroForcing, ZeroModeNotInvertible
from .symbol import COUPLING_MATRIX, _resolvent_s, eigen_decompose_M

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

_TAYLOR_TERMS = 24
_TAYLOR_RADIUS = 1.0


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @classmethod
    def from_dt(cls, dt, t_end):
        n = int(round(t_end / dt))
        return cls(n * dt, n)

    @property
    def dt(self):
        return self.t_end / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


def phi_functions(z):
    """``(exp(z), phi_1(z), phi_2(z))`` with a Taylor branch near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < _TAYLOR_RADIUS
    e = np.exp(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.where(small, 0, (e - 1) / z)
        p2 = np.where(small, 0, (e - 1 - z) / z ** 2)
    if np.any(small):
        zs = z[small]
        t1 = np.zeros_like(zs)
        t2 = np.zeros_like(zs)
        pw = np.ones_like(zs)
        for k in range(_TAYLOR_TERMS):
            t1 += pw / factorial(k + 1)
            t2 += pw / factorial(k + 2)
            pw = pw * zs
        p1[small] = t1
        p2[small] = t2
    return e, p1, p2


def _spectral_matrices(values):
    """``V diag(values) V^-1`` for values of shape (3, *modes); returns real (3, 3, *modes)."""
    _, V, Vinv = eigen_decompose_M()
    out = np.einsum("ik,k...,kj->ij...", V, values, Vinv)
    return out.real


def mode_exponent(s, t):
    """Eigenvalues of ``-t s M`` arranged as (3, *s.shape)."""
    lam = eigen_decompose_M().values
    s = np.asarray(s, dtype=float)
    return -t * lam.reshape((3,) + (1,) * s.ndim) * s


def semigroup_matrices(s, t):
    """``exp(-t s M)`` for every entry of ``s``; shape (3, 3, *s.shape)."""
    return _spectral_matrices(np.exp(mode_exponent(s, t)))


def apply_modes(P, U):
    """Apply per-mode 3x3 matrices (3, 3, *modes) to a field (..., 3, *modes)."""
    U = np.asarray(U)
    nd = P.ndim - 2
    lead = U.ndim - nd - 1
    out = np.empty(U.shape, dtype=np.result_type(P, U))
    for i in range(3):
        acc = P[i, 0] * U[(slice(None),) * lead + (0,)]
        acc = acc + P[i, 1] * U[(slice(None),) * lead + (1,)]
        acc = acc + P[i, 2] * U[(slice(None),) * lead + (2,)]
        out[(slice(None),) * lead + (i,)] = acc
    return out


def apply_A(domain, U):
    """Coefficient-space action of ``A``: ``(A U)^ = |zeta|^2 M U^``."""
    U = domain.check(U)
    s = domain.zeta_sq
    MU = np.tensordot(COUPLING_MATRIX, np.moveaxis(U, -domain.ndim - 1, 0), axes=1)
    return np.moveaxis(MU, 0, -domain.ndim - 1) * s


def propagate_mode(u0, zeta, t):
    """``exp(-t |zeta|^2 M) u0`` for a single mode."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    lam, V, Vinv = eigen_decompose_M()
    u0 = np.asarray(u0, dtype=complex)
    if t == 0 or z @ z == 0:
        return u0.copy()
    return V @ (np.exp(-t * float(z @ z) * lam) * (Vinv @ u0))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    domain: object
    times: np.ndarray
    coeffs: np.ndarray
    forcing: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    def physical(self, n=None):
        data = self.coeffs if n is None else self.coeffs[n]
        return self.domain.inverse(data)

    def time_derivative(self):
        """``U_t = F - A U`` evaluated at the nodes (exact for the discrete flow's equation)."""
        AU = apply_A(self.domain, self.coeffs)
        if self.forcing is None:
            return -AU
        return self.forcing - AU

    def report(self, p=2.0):
        return solve_report(self, p)


def _forcing_samples(domain, F, grid):
    if F is None:
        return None
    if callable(F):
        return np.stack([np.asarray(F(t)) for t in grid.times])
    F = np.asarray(F)
    base = (3,) + domain.shape
    if F.shape == base:
        return np.broadcast_to(F, (grid.n_steps + 1,) + base)
    if F.shape == (grid.n_steps + 1,) + base:
        return F
    raise ShapeMismatch(f"forcing shape {F.shape} matches neither {base} nor per-node samples")


def step_matrices(domain, dt):
    """Per-mode (E, h*phi_1, h*phi_2) matrices for step ``dt``."""
    z = mode_exponent(domain.zeta_sq, dt)
    e, p1, p2 = phi_functions(z)
    return _spectral_matrices(e), dt * _spectral_matrices(p1), dt * _spectral_matrices(p2)


def solve_linear(domain, U0, F, grid):
    """Integrate ``U_t + A U = F`` on the uniform time grid.

    ``F`` may be ``None``, a constant coefficient field of shape
    ``(3, *domain.shape)``, per-node samples ``(n_steps + 1, 3, *shape)`` or a
    callable ``t -> coefficients``.
    """
    U0 = np.asarray(U0)
    if U0.shape != (3,) + domain.shape:
        raise ShapeMismatch(f"U0 must have shape {(3,) + domain.shape}, got {U0.shape}")
    Fs = _forcing_samples(domain, F, grid)
    E, P1, P2 = step_matrices(domain, grid.dt)
    dtype = np.result_type(U0, complex if domain.has_fourier else float,
                           Fs.dtype if Fs is not None else float)
    out = np.empty((grid.n_steps + 1,) + U0.shape, dtype=dtype)
    out[0] = U0
    U = out[0]
    for n in range(grid.n_steps):
        nxt = apply_modes(E, U)
        if Fs is not None:
            nxt = nxt + apply_modes(P1, Fs[n]) + apply_modes(P2, Fs[n + 1] - Fs[n])
        out[n + 1] = nxt
        U = nxt
    forcing = None if Fs is None else np.array(Fs)
    return Trajectory(domain, grid.times, out, forcing)


def steady_state(domain, F):
    """``U_inf = A^-1 F`` for time-independent forcing (mode-wise ``(s M)^-1 F^``)."""
    F = domain.check(F)
    s = domain.zeta_sq
    zero = s == 0
    if np.any(zero) and np.any(np.abs(F[..., zero]) > 0):
        raise ZeroModeNotInvertible("steady state needs zero forcing on |zeta|^2 = 0 modes")
    Minv = np.linalg.inv(COUPLING_MATRIX)
    out = np.moveaxis(np.tensordot(Minv, np.moveaxis(F, -domain.ndim - 1, 0), axes=1), 0, -domain.ndim - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero, 0.0, out / np.where(zero, 1.0, s))
    return out


def solve_to_steady_state(domain, U0, F, dt, t_max, tol=1e-10):
    """March with constant forcing until ``||U_t||_{L2} < tol`` (or ``t_max``)."""
    F = domain.check(F)
    E, P1, _ = step_matrices(domain, dt)
    U = np.asarray(U0, dtype=np.result_type(U0, F, float))
    times = [0.0]
    states = [U]
    forcing_step = apply_modes(P1, F)
    t = 0.0
    while t < t_max:
        U = apply_modes(E, U) + forcing_step
        t += dt
        times.append(t)
        states.append(U)
        Ut = F - apply_A(domain, U)
        if domain.l2_norm_coeffs(Ut, axis_components=0) < tol:
            break
    coeffs = np.stack(states)
    return Trajectory(domain, np.array(times), coeffs, np.broadcast_to(F, coeffs.shape).copy(),
                      meta={"converged": bool(t < t_max)})


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def vector_lp(domain, coeffs, p):
    """Discrete ``L^p(Omega)^3`` norms (pointwise Euclidean length) of coefficient fields."""
    phys = domain.inverse(coeffs)
    mag = np.sqrt(np.sum(phys ** 2, axis=-domain.ndim - 1))
    return domain.lp_norm(mag, p)


def time_lp(values, times, p):
    """Trapezoid ``L^p`` norm in time of a nonnegative sample series."""
    return float(_trapezoid(np.asarray(values) ** p, times) ** (1.0 / p))


@dataclass
class SolveReport:
    times: np.ndarray
    p: float
    norm_U_l2: np.ndarray
    norm_U_lp: np.ndarray
    norm_AU_lp: np.ndarray
    norm_Ut_lp: np.ndarray
    norm_F_lp: np.ndarray
    dissipation_residual: np.ndarray | None
    max_reg_ratio: float | None

    def to_dict(self):
        def arr(a):
            return None if a is None else [float(x) for x in a]
        return {
            "p": float(self.p),
            "times": arr(self.times),
            "norm_U_l2": arr(self.norm_U_l2),
            "norm_U_lp": arr(self.norm_U_lp),
            "norm_AU_lp": arr(self.norm_AU_lp),
            "norm_Ut_lp": arr(self.norm_Ut_lp),
            "norm_F_lp": arr(self.norm_F_lp),
            "dissipation_residual": arr(self.dissipation_residual),
            "max_reg_ratio": None if self.max_reg_ratio is None else float(self.max_reg_ratio),
        }


def solve_report(traj, p=2.0):
    d = traj.domain
    AU = apply_A(d, traj.coeffs)
    Ut = traj.time_derivative()
    F = traj.forcing if traj.forcing is not None else np.zeros_like(traj.coeffs)
    nU = vector_lp(d, traj.coeffs, p)
    nAU = vector_lp(d, AU, p)
    nUt = vector_lp(d, Ut, p)
    nF = vector_lp(d, F, p)
    diss = None
    if traj.forcing is None or not np.any(traj.forcing):
        diss = np.full(traj.times.shape, np.nan)
        diss[1:-1] = dissipation_residual(traj)[1]
    ratio = None
    Fn = time_lp(nF, traj.times, p)
    if Fn > 0:
        ratio = (time_lp(nUt, traj.times, p) + time_lp(nAU, traj.times, p)) / Fn
    return SolveReport(traj.times, p, d.l2_norm_coeffs(traj.coeffs, axis_components=-1),
                       nU, nAU, nUt, nF, diss, ratio)


def max_reg_ratio(domain, F, p, grid):
    """``(||U_t|| + ||A U||) / ||F||`` in ``L^p_t L^p_x`` for the solution with ``U0 = 0``."""
    Fs = _forcing_samples(domain, F, grid)
    if Fs is None or not np.any(Fs):
        raise ZeroForcing("maximal-regularity ratio needs nonzero forcing")
    U0 = np.zeros((3,) + domain.shape, dtype=Fs.dtype)
    traj = solve_linear(domain, U0, Fs, grid)
    t = traj.times
    nF = time_lp(vector_lp(domain, Fs, p), t, p)
    if nF == 0:
        raise ZeroForcing("maximal-regularity ratio needs nonzero forcing")
    nUt = time_lp(vector_lp(domain, traj.time_derivative(), p), t, p)
    nAU = time_lp(vector_lp(domain, apply_A(domain, traj.coeffs), p), t, p)
    return (nUt + nAU) / nF


def energy_l2(domain, coeffs):
    """``1/2 ||U||_{L2}^2`` per time node."""
    return 0.5 * domain.l2_norm_coeffs(coeffs, axis_components=-1) ** 2


def grad_sq(domain, coeffs):
    """``||grad f||_{L2}^2`` of a scalar coefficient field (leading axes kept)."""
    c = domain.check(coeffs)
    axes = tuple(range(-domain.ndim, 0))
    return np.sum(domain.zeta_sq * np.abs(c) ** 2, axis=axes) * domain.parseval_weight


def dissipation_residual(traj):
    """``|d/dt 1/2||U||^2 + ||grad U_3||^2|`` at interior nodes (centered differences).

    Returns ``(times, residual)`` for nodes ``1 .. n-1``.
    """
    E = energy_l2(traj.domain, traj.coeffs)
    D = grad_sq(traj.domain, traj.coeffs[:, 2])
    h = np.diff(traj.times)
    dE = (E[2:] - E[:-2]) / (h[1:] + h[:-1])
    return traj.times[1:-1], np.abs(dE + D[1:-1])


def trace_norm_proxy(domain, U0, p=2.0):
    """Fourier-weighted ``W^{2-2/p}`` proxy for the trace-space norm of ``U0``."""
    U0 = domain.check(U0)
    mag = np.sqrt(np.sum(np.abs(U0) ** 2, axis=0))
    w = (1.0 + domain.zeta_sq) ** (1.0 - 1.0 / p)
    return float((np.sum((w * mag) ** p) * domain.parseval_weight) ** (1.0 / p))


def smoothing_constant(domain, U0, t):
    """``t * max_modes |zeta|^2 ||U(t, zeta)|| / ||U0(zeta)||`` for the free flow.

    The discrete counterpart of ``||A e^{-tA}|| <= C / t``.
    """
    U0 = domain.check(U0)
    P = semigroup_matrices(domain.zeta_sq, t)
    Ut = apply_modes(P, U0)
    n0 = np.sqrt(np.sum(np.abs(U0) ** 2, axis=0))
    nt = np.sqrt(np.sum(np.abs(Ut) ** 2, axis=0))
    mask = n0 > 0
    return float(t * np.max(domain.zeta_sq[mask] * nt[mask] / n0[mask]))


def decay_rate(times, values):
    """Least-squares slope of ``-log(values)`` against time."""
    values = np.asarray(values, dtype=float)
    keep = values > 0
    slope = np.polyfit(np.asarray(times)[keep], np.log(values[keep]), 1)[0]
    return -float(slope)


def apply_resolvent(domain, lam, F):
    """``(lam + A)^-1 F`` mode-wise; raises SingularResolvent on the spectrum."""
    F = domain.check(F)
    R, bad = _resolvent_s(lam, domain.zeta_sq)
    if np.any(bad):
        raise SingularResolvent(f"lambda={lam!r} hits the spectrum of -A on this lattice")
    P = np.moveaxis(R, (-2, -1), (0, 1))
    return apply_modes(P, F)
