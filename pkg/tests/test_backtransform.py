import numpy as np
import pytest

from thermoplate.backtransform import (
    PlateFields,
    recover,
    residual_from_trajectory,
    residual_original,
    to_first_order,
)
from thermoplate.errors import ShapeMismatch, ZeroModeNotInvertible
from thermoplate.grid import FOURIER, Direction, DomainSpec
from thermoplate.linear import TimeGrid, solve_linear
from thermoplate.nonlinear import NonlinearConfig, phi, picard_solve


@pytest.fixture
def square():
    return DomainSpec.rectangular(n2=2, modes=16)


def smooth(domain, seed=0, decay=2.5):
    return np.random.default_rng(seed).standard_normal((3,) + domain.shape) * np.exp(-decay * np.sqrt(domain.zeta_sq))


def test_recover_round_trip(square):
    U = smooth(square)
    f = recover(square, U)
    np.testing.assert_allclose(to_first_order(square, f.u, f.u_t, f.theta), U, atol=1e-15)
    np.testing.assert_allclose(-square.zeta_sq * f.u, U[0], atol=1e-15)


def test_recover_keeps_time_axis(square):
    U = np.stack([smooth(square, s) for s in range(4)])
    f = recover(square, U)
    assert f.u.shape == (4,) + square.shape
    np.testing.assert_array_equal(f.theta, U[:, 2])


def test_recover_rejects_bad_shapes_and_zero_mode(square):
    with pytest.raises(ShapeMismatch):
        recover(square, np.zeros((2,) + square.shape))
    periodic = DomainSpec([Direction(FOURIER, 2 * np.pi, 8)])
    U = np.zeros((3, 8), dtype=complex)
    U[0, 0] = 1.0
    with pytest.raises(ZeroModeNotInvertible):
        recover(periodic, U)


def test_exact_forcing_gives_round_off_residual(square):
    # u = e^{-t} sin x sin y, theta = t^2 sin 2x sin y; g, h computed from the equations
    t = np.linspace(0, 1, 11)
    s1 = 2.0
    u = np.zeros((11,) + square.shape)
    th = np.zeros_like(u)
    u[:, 0, 0] = np.exp(-t)
    th[:, 1, 0] = t ** 2
    v = np.zeros_like(u)
    v[:, 0, 0] = -np.exp(-t)
    v_t = np.zeros_like(u)
    v_t[:, 0, 0] = np.exp(-t)
    th_t = np.zeros_like(u)
    th_t[:, 1, 0] = 2 * t
    s = square.zeta_sq
    g = v_t + s * s * u - s * th
    h = th_t + s * th + s * v
    res = residual_original(square, t, PlateFields(u, v, th), g=g, h=h)
    # the centered difference is exact for the quadratic theta only; u contributes e^-t curvature
    assert np.isnan(res.r1[0]) and np.isnan(res.r2[-1])
    r1, r2 = res.interior_max()
    assert r2 < 1e-12  # theta is quadratic in time, so its centered difference is exact
    assert r1 < 0.1 ** 2 / 6 * s1  # v_t error from the e^-t curvature only


def test_linear_run_residual_is_second_order(square):
    U0 = smooth(square)
    out = []
    for n in (100, 200):
        traj = solve_linear(square, U0, None, TimeGrid(1.0, n))
        out.append(residual_from_trajectory(traj).interior_max())
    for k in range(2):
        assert out[0][k] / out[1][k] == pytest.approx(4.0, rel=0.1)


def test_nonlinear_run_satisfies_plate_equations(square):
    U0 = smooth(square)
    cfg = NonlinearConfig(a=1.0)
    out = []
    for n in (250, 500):
        traj, _ = picard_solve(square, U0, cfg, TimeGrid(0.5, n))
        out.append(residual_from_trajectory(traj, a=1.0).interior_max())
    assert max(out[1]) <= 1e-6
    assert out[0][0] / out[1][0] == pytest.approx(4.0, rel=0.15)
    # dropping the cubic term leaves a visible defect
    linear_view = residual_from_trajectory(traj, a=0.0).interior_max()[0]
    assert linear_view > 10 * out[1][0]


def test_external_forcing_is_subtracted(square):
    U0 = smooth(square)
    out = []
    for n in (200, 400):
        g = TimeGrid(0.5, n)
        G = np.zeros((n + 1, 3) + square.shape)
        G[:, 1, 2, 3] = np.cos(g.times)
        G[:, 2, 0, 1] = g.times
        traj, _ = picard_solve(square, U0, NonlinearConfig(a=1.0), g, forcing=G)
        out.append(residual_from_trajectory(traj, a=1.0, g=G[:, 1], h=G[:, 2]).interior_max())
    for k in range(2):
        assert out[0][k] / out[1][k] == pytest.approx(4.0, rel=0.15)
    r_missing = residual_from_trajectory(traj, a=1.0).interior_max()
    assert r_missing[1] > 0.1


def test_residual_time_grid_mismatch(square):
    f = recover(square, np.stack([smooth(square)] * 3))
    with pytest.raises(ShapeMismatch):
        residual_original(square, [0.0, 1.0], f)


def test_phi_enters_second_line(square):
    U = smooth(square, decay=1.0)
    assert np.abs(phi(square, U, 1.0)[1]).max() > 0
