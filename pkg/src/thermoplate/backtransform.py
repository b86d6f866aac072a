"""Recovery of the plate variables and residuals of the second-order system.

With ``U = (Laplace u, u_t, theta)`` the plate deflection is recovered by the
Dirichlet inverse Laplacian.  The residuals

    r1 = || u_tt + Laplace^2 u + Laplace theta + a Laplace (Laplace u)^3 - g ||
    r2 = || theta_t - Laplace theta - Laplace u_t - h ||

are evaluated spectrally in space and by centered differences in time;
``u_tt`` is taken as the time difference of ``U_2``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .nonlinear import cube_coeffs


@dataclass
class PlateFields:
    u: np.ndarray
    u_t: np.ndarray
    theta: np.ndarray


def recover(domain, U):
    """``(u, u_t, theta)`` from ``U``; leading (time) axes are kept."""
    U = domain.check(U)
    comp = U.ndim - domain.ndim - 1
    if comp < 0 or U.shape[comp] != 3:
        raise ShapeMismatch(f"expected a 3-component field, got shape {U.shape}")
    v1, v2, v3 = (np.take(U, i, axis=comp) for i in range(3))
    return PlateFields(domain.dirichlet_inverse_laplacian(v1), v2, v3)


def to_first_order(domain, u, u_t, theta):
    """Inverse of :func:`recover`."""
    return np.stack([domain.laplacian(u), np.asarray(u_t), np.asarray(theta)], axis=-domain.ndim - 1)


def _centered(values, times):
    out = np.full(values.shape, np.nan, dtype=values.dtype if np.iscomplexobj(values) else float)
    h = np.diff(times)
    shape = (-1,) + (1,) * (values.ndim - 1)
    out[1:-1] = (values[2:] - values[:-2]) / (h[1:] + h[:-1]).reshape(shape)
    return out


@dataclass
class ResidualSeries:
    times: np.ndarray
    r1: np.ndarray
    r2: np.ndarray

    def interior_max(self):
        return float(np.max(self.r1[1:-1])), float(np.max(self.r2[1:-1]))

    def rows(self):
        return zip(self.times, self.r1, self.r2)


def residual_original(domain, times, fields, a=0.0, g=None, h=None, dealias_factor=2.0):
    """Residuals of both plate equations per time node (NaN at the end nodes).

    ``fields`` is a :class:`PlateFields` of trajectories with a leading time
    axis; ``g`` and ``h`` are optional coefficient-space forcings sampled at
    the nodes.
    """
    times = np.asarray(times, dtype=float)
    u, v, th = (domain.check(x) for x in (fields.u, fields.u_t, fields.theta))
    if not (u.shape == v.shape == th.shape) or u.shape[0] != times.size:
        raise ShapeMismatch("trajectories must share the time grid")
    s = domain.zeta_sq
    v_t = _centered(v, times)
    th_t = _centered(th, times)
    lap_u = -s * u
    line1 = v_t + s * s * u - s * th
    if a:
        line1 = line1 - a * s * cube_coeffs(domain, lap_u, dealias_factor)
    line2 = th_t + s * th + s * v
    if g is not None:
        line1 = line1 - np.asarray(g)
    if h is not None:
        line2 = line2 - np.asarray(h)
    r1 = np.full(times.shape, np.nan)
    r2 = np.full(times.shape, np.nan)
    r1[1:-1] = domain.l2_norm_coeffs(line1[1:-1])
    r2[1:-1] = domain.l2_norm_coeffs(line2[1:-1])
    return ResidualSeries(times, r1, r2)


def residual_from_trajectory(traj, a=0.0, g=None, h=None, dealias_factor=2.0):
    return residual_original(traj.domain, traj.times, recover(traj.domain, traj.coeffs),
                             a, g, h, dealias_factor)
