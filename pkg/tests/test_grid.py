import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermoplate.errors import ShapeMismatch, ZeroModeNotInvertible
from thermoplate.grid import FOURIER, SINE, Direction, DomainSpec


def mixed_domain():
    return DomainSpec.rectangular(n1=1, n2=1, n3=1, modes=(8, 6, 10), L_r=2 * np.pi, L_h=5.0)


def test_rectangular_layout():
    d = mixed_domain()
    assert [x.kind for x in d.directions] == [FOURIER, SINE, SINE]
    assert [x.role for x in d.directions] == ["r", "box", "half"]
    assert d.shape == (8, 6, 10)
    assert d.has_fourier and d.coeff_dtype is complex
    assert not DomainSpec.rectangular(n2=2, modes=8).has_fourier


@pytest.mark.parametrize("n", [3, 5, 2])
def test_mode_counts_validated(n):
    with pytest.raises(ValueError):
        DomainSpec.rectangular(n2=1, modes=n)


def test_single_sine_mode_has_unit_coefficient():
    d = DomainSpec.rectangular(n2=2, modes=8)
    x, y = d.mesh()
    c = d.forward(np.sin(x) * np.sin(3 * y))
    expected = np.zeros(d.shape)
    expected[0, 2] = 1.0
    np.testing.assert_allclose(c, expected, atol=1e-14)


def test_single_fourier_mode_has_unit_coefficient():
    d = DomainSpec([Direction(FOURIER, 2 * np.pi, 8)])
    (x,) = d.mesh()
    c = d.forward(np.exp(2j * x))
    assert c[2] == pytest.approx(1.0)
    assert np.abs(np.delete(c, 2)).max() < 1e-14


def test_zeta_squared_matches_laplacian_of_sine():
    d = DomainSpec.rectangular(n2=1, n3=1, modes=8, L_h=2.0)
    assert d.zeta_sq[1, 2] == pytest.approx(4 + (3 * np.pi / 2.0) ** 2)
    assert d.laplacian_symbol((2, 3)) == pytest.approx(d.zeta_sq[1, 2])
    assert d.mode_position((2, 3)) == (1, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_transform_round_trip(seed):
    d = mixed_domain()
    f = np.random.default_rng(seed).standard_normal((2,) + d.shape)
    np.testing.assert_allclose(d.inverse(d.forward(f)), f, atol=1e-12)


def test_parseval_matches_grid_quadrature():
    d = mixed_domain()
    f = np.random.default_rng(3).standard_normal(d.shape)
    via_coeffs = d.l2_norm_coeffs(d.forward(f))
    assert via_coeffs == pytest.approx(d.lp_norm(f, 2), rel=1e-12)


def test_lp_norm_of_constant_sine_box():
    d = DomainSpec.rectangular(n2=1, modes=16)
    f = np.ones(d.shape)
    assert d.lp_norm(f, 4) == pytest.approx((16 * np.pi / 17) ** 0.25)
    assert d.lp_norm(f, np.inf) == 1.0


def test_pad_then_truncate_is_identity_and_padding_is_exact():
    d = mixed_domain()
    c = d.forward(np.random.default_rng(1).standard_normal(d.shape))
    big = d.padded(2.0)
    assert big.shape == (18, 13, 21)
    cp = d.pad(c, big)
    np.testing.assert_allclose(d.truncate(cp, big), c, atol=1e-15)
    # norms are preserved by zero padding once the split Nyquist mode is removed
    c[4] = 0.0
    cp = d.pad(c, big)
    assert big.l2_norm_coeffs(cp) == pytest.approx(d.l2_norm_coeffs(c), rel=1e-13)


def test_padded_sine_field_interpolates_on_shared_nodes():
    d = DomainSpec.rectangular(n2=2, modes=6)
    big = d.padded(2.0)
    c = d.forward(np.random.default_rng(1).standard_normal(d.shape))
    fine = big.inverse(d.pad(c, big))
    np.testing.assert_allclose(fine[1::2, 1::2], d.inverse(c), atol=1e-12)


def test_dealiased_square_is_exact():
    d = DomainSpec.rectangular(n2=1, modes=8)
    big = d.padded(2.0)
    c = np.zeros(8)
    c[[0, 2]] = [1.0, 0.5]
    (x,) = big.mesh()
    u = big.inverse(d.pad(c, big))
    np.testing.assert_allclose(u, np.sin(x) + 0.5 * np.sin(3 * x), atol=1e-14)


def test_inverse_laplacian():
    d = DomainSpec.rectangular(n2=2, modes=8)
    x, y = d.mesh()
    c = d.forward(-2 * np.sin(x) * np.sin(y))
    u = d.dirichlet_inverse_laplacian(c)
    np.testing.assert_allclose(d.inverse(u), np.sin(x) * np.sin(y), atol=1e-14)
    np.testing.assert_allclose(d.laplacian(u), c, atol=1e-14)


def test_inverse_laplacian_rejects_mean_on_periodic_cell():
    d = DomainSpec([Direction(FOURIER, 2 * np.pi, 8)])
    c = np.zeros(8, dtype=complex)
    c[0] = 1.0
    with pytest.raises(ZeroModeNotInvertible):
        d.dirichlet_inverse_laplacian(c)
    c[0] = 0.0
    c[1] = 1.0
    assert d.dirichlet_inverse_laplacian(c)[1] == pytest.approx(-1.0)


def test_shape_check():
    d = DomainSpec.rectangular(n2=2, modes=8)
    with pytest.raises(ShapeMismatch):
        d.forward(np.zeros((8, 6)))
    with pytest.raises(ShapeMismatch):
        d.check(np.zeros(8))
