"""Cubic nonlinearity and the Picard fixed-point solver.

The nonlinear system reads ``U_t + A U = Phi(U) + G`` with

    Phi(U) = -a Laplace (0, U_1^3, 0)

so in coefficient space only the second component is nonzero and equals
``a |zeta|^2 (U_1^3)^``.  The cube is formed pseudo-spectrally on a grid
enlarged by ``dealias_factor`` and truncated back, which is exact for
band-limited ``U_1`` once the factor is at least 2.

``picard_solve`` iterates whole trajectories through the Duhamel formula,
reusing the exact linear stepper with piecewise-linear forcing.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientBand, NoConvergence, ShapeMismatch
from .linear import TimeGrid, Trajectory, _trapezoid, apply_A, solve_linear, trace_norm_proxy


@dataclass(frozen=True)
class NonlinearConfig:
    a: float = 1.0
    T: float | None = None
    max_picard_iters: int = 50
    contraction_tol: float = 1e-12
    dealias_factor: float = 2.0
    shrink_factor: float = 0.5
    stall_eps: float = 0.05
    stall_count: int = 3

    def __post_init__(self):
        # a = 0 is accepted as the degenerate linear case
        if not (np.isfinite(self.a) and self.a >= 0):
            raise ValueError("a must be a finite nonnegative number")
        if self.T is not None and not self.T > 0:
            raise ValueError("T must be positive")
        if self.max_picard_iters < 1:
            raise ValueError("max_picard_iters must be >= 1")
        if not self.contraction_tol > 0:
            raise ValueError("contraction_tol must be positive")
        if self.dealias_factor < 2:
            raise ValueError("dealias_factor must be >= 2 for a cubic nonlinearity")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if not 0 < self.stall_eps < 1:
            raise ValueError("stall_eps must lie in (0, 1)")


def cube_coeffs(domain, c, dealias_factor=2.0):
    """Coefficients of ``f^3`` for a scalar field ``f`` given by coefficients ``c``."""
    c = domain.check(c)
    big = domain.padded(dealias_factor)
    f = big.inverse(domain.pad(c, big))
    return domain.truncate(big.forward(f ** 3), big)


def phi(domain, U, a, dealias_factor=2.0):
    """``Phi(U)`` in coefficient space; accepts leading (e.g. time) axes."""
    U = domain.check(U)
    comp = U.ndim - domain.ndim - 1
    if comp < 0 or U.shape[comp] != 3:
        raise ShapeMismatch(f"expected a 3-component field, got shape {U.shape}")
    out = np.zeros(U.shape, dtype=np.result_type(U, float))
    if a == 0:
        return out
    u1 = np.take(U, 0, axis=comp)
    cube = cube_coeffs(domain, u1, dealias_factor)
    idx = (slice(None),) * comp + (1,)
    out[idx] = a * domain.zeta_sq * cube
    return out


def mr_norm(domain, W, W_t, times):
    """Discrete maximal-regularity norm ``||W_t|| + ||A W||`` in ``L^2_t L^2_x``."""
    AW = apply_A(domain, W)
    n1 = domain.l2_norm_coeffs(W_t, axis_components=-1)
    n2 = domain.l2_norm_coeffs(AW, axis_components=-1)
    return float(np.sqrt(_trapezoid(n1 ** 2, times)) + np.sqrt(_trapezoid(n2 ** 2, times)))


@dataclass
class PicardTrace:
    increments: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    shrinks: int = 0
    converged: bool = False

    @property
    def iterations(self):
        return len(self.increments)

    def ratios_on_final_window(self):
        w = self.windows[-1] if self.windows else None
        return [r for r, x in zip(self.ratios, self.windows) if x == w]

    def to_dict(self):
        def num(x):
            return None if x is None or not np.isfinite(x) else float(x)
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "shrinks": self.shrinks,
            "increments": [num(x) for x in self.increments],
            "ratios": [num(x) for x in self.ratios],
            "windows": [float(x) for x in self.windows],
        }


def _forcing_on(G, domain, grid):
    if G is None:
        return None
    if callable(G):
        return np.stack([np.asarray(G(t)) for t in grid.times])
    G = np.asarray(G)
    if G.shape == (3,) + domain.shape:
        return np.broadcast_to(G, (grid.n_steps + 1,) + G.shape)
    if G.shape[0] >= grid.n_steps + 1:
        return G[: grid.n_steps + 1]
    raise ShapeMismatch("forcing samples do not cover the time window")


def _sweep(domain, U0, cfg, grid, G):
    """Picard iteration on one window; returns (trajectory, status)."""
    trace_inc, trace_ratio = [], []
    zero = np.zeros((grid.n_steps + 1, 3) + domain.shape)
    base = zero if G is None else G
    current = solve_linear(domain, U0, base, grid)
    phi_prev = np.zeros_like(zero)
    stalls = 0
    for _ in range(cfg.max_picard_iters):
        with np.errstate(all="ignore"):
            phi_cur = phi(domain, current.coeffs, cfg.a, cfg.dealias_factor)
            nxt = solve_linear(domain, U0, base + phi_cur, grid)
            W = nxt.coeffs - current.coeffs
            W_t = (phi_cur - phi_prev) - apply_A(domain, W)
            inc = mr_norm(domain, W, W_t, grid.times)
        ratio = inc / trace_inc[-1] if trace_inc and trace_inc[-1] > 0 else np.nan
        trace_inc.append(inc)
        trace_ratio.append(ratio)
        if not np.isfinite(inc):
            return None, trace_inc, trace_ratio, "nonfinite"
        current = nxt
        phi_prev = phi_cur
        if inc < cfg.contraction_tol:
            return current, trace_inc, trace_ratio, "converged"
        stalls = stalls + 1 if np.isfinite(ratio) and ratio > 1 - cfg.stall_eps else 0
        if stalls >= cfg.stall_count:
            return None, trace_inc, trace_ratio, "stalled"
    return None, trace_inc, trace_ratio, "maxiter"


def picard_solve(domain, U0, cfg, grid, forcing=None):
    """Fixed-point iteration ``U <- e^{-tA} U0 + int e^{-(t-s)A} (Phi(U) + G) ds``.

    ``grid`` fixes the step; the window starts at ``cfg.T`` (or
    ``grid.t_end``) and is multiplied by ``cfg.shrink_factor`` whenever the
    iteration stalls, diverges or runs out of iterations.  Returns
    ``(trajectory, trace)``; the trajectory's ``forcing`` holds the total
    right-hand side ``G + Phi(U)`` at the nodes.
    """
    U0 = np.asarray(U0)
    if U0.shape != (3,) + domain.shape:
        raise ShapeMismatch(f"U0 must have shape {(3,) + domain.shape}, got {U0.shape}")
    dt = grid.dt
    window = cfg.T if cfg.T is not None else grid.t_end
    n_steps = int(round(window / dt))
    full_G = forcing
    trace = PicardTrace()
    while True:
        if n_steps < 1:
            raise NoConvergence(f"window shrank below the time step {dt:g}", trace=trace)
        g = TimeGrid(n_steps * dt, n_steps)
        G = _forcing_on(full_G, domain, g)
        traj, incs, ratios, status = _sweep(domain, U0, cfg, g, G)
        trace.increments += incs
        trace.ratios += ratios
        trace.windows += [g.t_end] * len(incs)
        if status == "converged":
            trace.converged = True
            total = phi(domain, traj.coeffs, cfg.a, cfg.dealias_factor)
            if G is not None:
                total = total + G
            out = Trajectory(domain, g.times, traj.coeffs, total,
                             meta={"a": cfg.a, "external": None if G is None else np.array(G)})
            return out, trace
        trace.shrinks += 1
        n_steps = int(np.floor(n_steps * cfg.shrink_factor))


def duhamel_defect(traj, cfg):
    """MR-norm distance between ``traj`` and one further Duhamel sweep."""
    d = traj.domain
    G = traj.meta.get("external")
    rhs = phi(d, traj.coeffs, cfg.a, cfg.dealias_factor)
    if G is not None:
        rhs = rhs + G
    g = TimeGrid(float(traj.times[-1]), len(traj.times) - 1)
    nxt = solve_linear(d, traj.coeffs[0], rhs, g)
    W = nxt.coeffs - traj.coeffs
    W_t = (rhs - traj.forcing) - apply_A(d, W)
    return mr_norm(d, W, W_t, g.times)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def quartic_integral(domain, c, dealias_factor=2.0):
    """``int f^4`` for a band-limited field, by quadrature on the padded grid."""
    c = domain.check(c)
    big = domain.padded(dealias_factor)
    f = big.inverse(domain.pad(c, big))
    axes = tuple(range(-domain.ndim, 0))
    return np.sum(f ** 4, axis=axes) * big.cell_volume


@dataclass
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray

    def rows(self):
        return zip(self.times, self.energy, self.dissipation, self.residual)


def energy_report(traj, a, dealias_factor=2.0):
    """Energy ``E = 1/2 ||U||^2 + (a/4) int U_1^4`` and the residual of ``dE/dt = -||grad theta||^2``.

    ``1/2 ||U||^2`` equals ``1/2 (||Laplace u||^2 + ||u_t||^2 + ||theta||^2)``.
    The residual is reported at interior nodes (NaN at both ends).
    """
    d = traj.domain
    c = traj.coeffs
    E = 0.5 * d.l2_norm_coeffs(c, axis_components=-1) ** 2
    if a:
        E = E + 0.25 * a * quartic_integral(d, c[:, 0], dealias_factor)
    diss = np.sum(d.zeta_sq * np.abs(c[:, 2]) ** 2, axis=tuple(range(-d.ndim, 0))) * d.parseval_weight
    t = traj.times
    res = np.full(t.shape, np.nan)
    h = np.diff(t)
    res[1:-1] = np.abs((E[2:] - E[:-2]) / (h[1:] + h[:-1]) + diss[1:-1])
    return EnergyReport(t, E, -diss, res)


def analyticity_proxy(traj, t_probe, floor=1e-14, min_modes=8):
    """Slope of ``log ||U^(t_probe, zeta)||`` against ``|zeta|`` over the resolved band."""
    if not t_probe > 0:
        raise ValueError("t_probe must be positive")
    n = int(np.argmin(np.abs(traj.times - t_probe)))
    d = traj.domain
    mag = np.sqrt(np.sum(np.abs(traj.coeffs[n]) ** 2, axis=0))
    mask = mag > floor
    if np.count_nonzero(mask) < min_modes:
        raise InsufficientBand(f"only {np.count_nonzero(mask)} modes above {floor:g}")
    x = np.sqrt(d.zeta_sq)[mask]
    if np.ptp(x) == 0:
        raise InsufficientBand("resolved modes share a single frequency")
    return float(np.polyfit(x, np.log(mag[mask]), 1)[0])


def worst_ratio(domain, U0, cfg, grid, skip=1):
    """Largest Picard ratio after the first ``skip`` ratios on the full window.

    Returns ``inf`` when the window had to shrink or the iteration failed.
    """
    try:
        _, trace = picard_solve(domain, U0, cfg, grid)
    except NoConvergence:
        return np.inf
    if trace.shrinks:
        return np.inf
    tail = [r for r in trace.ratios[skip:] if np.isfinite(r)]
    return max(tail, default=0.0)


def smallness_threshold(domain, profile, cfg, grid, target=0.5, p=2.0, hi=1.0, iters=40):
    """Bisect the amplitude of ``profile`` at which the worst Picard ratio reaches ``target``.

    Returns ``(d, scale)`` where ``d`` is the trace-norm proxy of ``scale * profile``.
    """
    while worst_ratio(domain, hi * profile, cfg, grid) <= target:
        hi *= 2.0
        if hi > 1e12:
            raise NoConvergence("no amplitude reaches the target ratio")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if worst_ratio(domain, mid * profile, cfg, grid) <= target:
            lo = mid
        else:
            hi = mid
    return trace_norm_proxy(domain, lo * profile, p), lo
