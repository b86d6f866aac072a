"""Coupling matrix, Fourier symbol and fiberwise functional calculus.

The first-order plate system reads ``U_t - M Delta U = F`` with the fixed
matrix ``M``.  On the Fourier side the spatial operator acts on a mode with
frequency ``zeta`` through the 3x3 symbol ``a(zeta) = |zeta|^2 M``.  Every
quantity in this module therefore depends on ``zeta`` only through
``s = |zeta|^2`` (except ``kappa``, which also carries ``zeta**alpha``).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateSymbol, NumericalFailure, SingularResolvent

__all__ = [
    "COUPLING_MATRIX",
    "Eigensystem",
    "SectorReport",
    "ContourSpec",
    "TestFunction",
    "characteristic_polynomial",
    "eigen_decompose_M",
    "spectral_angle",
    "symbol",
    "resolvent_at",
    "kappa",
    "holomorphic_calculus",
    "matrix_function_oracle",
    "sector_lambdas",
    "resolvent_sweep",
    "sector_report",
    "RHO",
    "SQRT_EXP",
    "resolvent_function",
    "exponential_function",
    "scaled",
    "multiplied",
    "TEST_FUNCTIONS",
]

COUPLING_MATRIX = np.array(
    [[0.0, 1.0, 0.0],
     [-1.0, 0.0, -1.0],
     [0.0, 1.0, 1.0]]
)
COUPLING_MATRIX.setflags(write=False)

_SINGULAR_TOL = 1e-14


def _as_zeta(zeta):
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    if z.ndim != 1:
        raise ValueError("zeta must be a 1-D frequency vector")
    return z


def inv3(A):
    """Invert a stack of 3x3 matrices by cofactor expansion.

    Returns ``(inverse, determinant)``; the caller decides what a small
    determinant means.
    """
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
    d, e, f = A[..., 1, 0], A[..., 1, 1], A[..., 1, 2]
    g, h, i = A[..., 2, 0], A[..., 2, 1], A[..., 2, 2]
    adj = np.empty(A.shape, dtype=np.result_type(A, float))
    adj[..., 0, 0] = e * i - f * h
    adj[..., 0, 1] = c * h - b * i
    adj[..., 0, 2] = b * f - c * e
    adj[..., 1, 0] = f * g - d * i
    adj[..., 1, 1] = a * i - c * g
    adj[..., 1, 2] = c * d - a * f
    adj[..., 2, 0] = d * h - e * g
    adj[..., 2, 1] = b * g - a * h
    adj[..., 2, 2] = a * e - b * d
    det = a * adj[..., 0, 0] + b * adj[..., 1, 0] + c * adj[..., 2, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        adj /= det[..., None, None]
    return adj, det


# ---------------------------------------------------------------------------
# spectrum of M
# ---------------------------------------------------------------------------

def characteristic_polynomial(A=COUPLING_MATRIX):
    """Coefficients of det(lambda I - A), highest degree first.

    Uses trace / principal-minor sums, so for the coupling matrix the result
    is exactly (1, -1, 2, -1).
    """
    A = np.asarray(A, dtype=float)
    tr = np.trace(A)
    minors = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
              + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
              + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
    return np.array([1.0, -tr, minors, -np.linalg.det(A)])


def _polyval(c, x):
    p = 0.0 * x
    dp = 0.0 * x
    for ck in c:
        dp = dp * x + p
        p = p * x + ck
    return p, dp


def _newton(c, x0, maxiter=100, tol=1e-15):
    x = x0
    for _ in range(maxiter):
        p, dp = _polyval(c, x)
        if dp == 0:
            break
        step = p / dp
        x = x - step
        if abs(step) <= tol * max(1.0, abs(x)):
            return x
    raise NumericalFailure(f"Newton iteration did not converge from {x0!r}")


def polynomial_roots(coeffs):
    """Roots by Newton iteration with deflation, polished on the full polynomial."""
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    roots = []
    work = c.copy()
    while len(work) > 2:
        r = _newton(work, 0.4 + 0.9j)
        # synthetic division by (x - r)
        q = np.empty(len(work) - 1, dtype=complex)
        q[0] = work[0]
        for k in range(1, len(work) - 1):
            q[k] = work[k] + r * q[k - 1]
        roots.append(r)
        work = q
    roots.append(-work[1] / work[0])
    roots = np.array([_newton(c, r) for r in roots])
    # snap real roots, keep conjugate pairs exactly symmetric
    out = []
    for r in roots:
        if abs(r.imag) <= 1e-13 * max(1.0, abs(r)):
            r = complex(r.real, 0.0)
        out.append(r)
    out = np.array(out)
    for k, r in enumerate(out):
        if r.imag > 0:
            j = np.argmin(np.abs(out - np.conj(r)))
            mean = 0.5 * (r + np.conj(out[j]))
            out[k], out[j] = mean, np.conj(mean)
    return out


class Eigensystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray


def _null_vector(B):
    rows = [B[0], B[1], B[2]]
    best = None
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = np.cross(rows[i], rows[j])
        if best is None or np.linalg.norm(v) > np.linalg.norm(best):
            best = v
    return best / np.linalg.norm(best)


@lru_cache(maxsize=None)
def eigen_decompose_M():
    """Eigen-decomposition ``M = V diag(lam) V^-1``, eigenvalues sorted by (Re, Im).

    Computed once by root finding on the characteristic polynomial.
    """
    lam = polynomial_roots(characteristic_polynomial())
    lam = np.array(sorted(lam, key=lambda z: (round(z.real, 12), z.imag)))
    V = np.stack([_null_vector(COUPLING_MATRIX - l * np.eye(3)) for l in lam], axis=1)
    Vinv, det = inv3(V)
    if not np.all(np.isfinite(Vinv)) or abs(det) < 1e-12:
        raise NumericalFailure("eigenvector matrix of M is singular")
    recon = V @ np.diag(lam) @ Vinv
    if np.abs(recon - COUPLING_MATRIX).max() > 1e-12:
        raise NumericalFailure("eigen-decomposition of M failed to reconstruct M")
    for arr in (lam, V, Vinv):
        arr.setflags(write=False)
    return Eigensystem(lam, V, Vinv)


def spectral_angle():
    """Largest ``|arg|`` over the eigenvalues of M (identical for every a(zeta), zeta != 0)."""
    return float(np.max(np.abs(np.angle(eigen_decompose_M().values))))


# ---------------------------------------------------------------------------
# symbol, resolvent, kappa
# ---------------------------------------------------------------------------

def symbol(zeta):
    """The 3x3 matrix ``a(zeta) = |zeta|^2 M``."""
    z = _as_zeta(zeta)
    return float(z @ z) * COUPLING_MATRIX


def _resolvent_s(lam, s):
    """(lam I + s M)^-1 broadcast over arrays ``lam`` and ``s``."""
    lam = np.asarray(lam, dtype=complex)
    s = np.asarray(s, dtype=float)
    lam, s = np.broadcast_arrays(lam, s)
    A = lam[..., None, None] * np.eye(3) + s[..., None, None] * COUPLING_MATRIX
    R, _ = inv3(A)
    ev = eigen_decompose_M().values
    gap = np.min(np.abs(lam[..., None] + s[..., None] * ev), axis=-1)
    scale = np.maximum(1.0, np.maximum(np.abs(lam), s))
    bad = gap <= _SINGULAR_TOL * scale
    return R, bad


def resolvent_at(lam, zeta):
    """``(lam I + a(zeta))^-1``.

    Raises SingularResolvent when ``-lam`` is (numerically) an eigenvalue of
    ``a(zeta)``.
    """
    z = _as_zeta(zeta)
    R, bad = _resolvent_s(lam, z @ z)
    if bad:
        raise SingularResolvent(f"lambda={lam!r} lies in -spectrum(a(zeta)) for |zeta|^2={z @ z!r}")
    return R


def kappa(lam, zeta, alpha):
    """``lam^(1-|alpha|/2) zeta^alpha (lam + a(zeta))^-1`` with principal square root."""
    z = _as_zeta(zeta)
    alpha = np.asarray(alpha, dtype=int)
    if alpha.shape != z.shape:
        raise ValueError("alpha must have one entry per frequency direction")
    if np.any(alpha < 0) or alpha.sum() > 2:
        raise ValueError("alpha must be a multi-index with |alpha| <= 2")
    order = int(alpha.sum())
    lam = complex(lam)
    weight = np.sqrt(lam) ** (2 - order) * np.prod(z ** alpha)
    return weight * resolvent_at(lam, z)


# ---------------------------------------------------------------------------
# holomorphic functional calculus on a(zeta)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A bounded holomorphic function on the sector of half-angle ``sigma``."""

    __test__ = False

    name: str
    func: Callable = field(compare=False)
    sigma: float

    def __call__(self, z):
        return self.func(np.asarray(z, dtype=complex))


RHO = TestFunction("rho", lambda z: z / (1.0 + z) ** 2, 0.9 * np.pi)
SQRT_EXP = TestFunction("sqrt_exp", lambda z: np.sqrt(z) * np.exp(-z), 0.5 * np.pi)


def resolvent_function(lam0=1.0):
    """``z -> lam0 / (lam0 + z)`` for fixed ``lam0 > 0``."""
    if lam0 <= 0:
        raise ValueError("lam0 must be positive")
    return TestFunction(f"resolvent[{lam0:g}]", lambda z: lam0 / (lam0 + z), 0.9 * np.pi)


def exponential_function(t=1.0):
    """``z -> exp(-t z)``; used with the diagonalization oracle only."""
    return TestFunction(f"exp[{t:g}]", lambda z: np.exp(-t * z), 0.5 * np.pi)


def scaled(f, c):
    """``z -> f(c z)`` on the same sector."""
    return TestFunction(f"{f.name}(c={c:g})", lambda z: f.func(c * z), f.sigma)


def multiplied(f, c):
    """``z -> c f(z)``."""
    return TestFunction(f"{c:g}*{f.name}", lambda z: c * f.func(z), f.sigma)


TEST_FUNCTIONS = (RHO, SQRT_EXP, resolvent_function(1.0))


@dataclass(frozen=True)
class ContourSpec:
    """Truncated two-ray path at angle ``psi`` with log-radial Gauss-Legendre panels.

    ``n_nodes`` is the number of base nodes per ray, split into panels of
    ``order`` points.  With ``adaptive=True`` panels are bisected until the
    panel estimate agrees with its two halves to ``tol`` times the absolute
    mass of the integrand.  ``psi=None`` selects the midpoint between the
    spectral angle and the sector of the integrated function.
    """

    psi: float | None = None
    r_min: float = 1e-12
    r_max: float = 1e12
    n_nodes: int = 400
    order: int = 8
    adaptive: bool = True
    tol: float = 1e-14
    max_panels: int = 20000

    def resolve_psi(self, f):
        phi = spectral_angle()
        psi = 0.5 * (phi + f.sigma) if self.psi is None else self.psi
        if not (phi < psi < f.sigma <= np.pi):
            raise ValueError(f"need spectral_angle < psi < sigma <= pi, got psi={psi}, sigma={f.sigma}")
        if not (0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.n_nodes < 2 or self.order < 2:
            raise ValueError("need n_nodes >= 2 and order >= 2")
        return psi


@lru_cache(maxsize=1)
def _adjugate_parts():
    # Cayley-Hamilton: adj(mu I - s M) = mu^2 I + mu s B1 + s^2 B2, det = p(mu, s)
    c = characteristic_polynomial()
    M = COUPLING_MATRIX
    B1 = M + c[1] * np.eye(3)
    B2 = M @ M + c[1] * M + c[2] * np.eye(3)
    return c, B1, B2


def _panel_integrals(f, s, psi, lo, hi, nodes, weights):
    """Integral of f(mu)(mu - s M)^-1 over both rays restricted to log-radius panels.

    Shapes: lo, hi (P,); s (S,); result (P, S, 3, 3).
    """
    c, B1, B2 = _adjugate_parts()
    half = 0.5 * (hi - lo)[:, None]
    t = half * nodes + 0.5 * (hi + lo)[:, None]
    w = half * weights
    r = np.exp(t)
    m = np.zeros((3, lo.size, s.size), dtype=complex)
    # upper ray runs inward (minus sign), lower ray outward
    for sign, direction in ((1.0, -1.0), (-1.0, 1.0)):
        e = np.exp(1j * sign * psi)
        mu = r * e
        g = direction * w * r * e * f(mu)
        x = mu[..., None]
        det = ((x + c[1] * s) * x + c[2] * s * s) * x + c[3] * s ** 3
        inv = 1.0 / det
        m[0] += np.einsum("pn,pns->ps", g * mu * mu, inv)
        m[1] += np.einsum("pn,pns->ps", g * mu, inv)
        m[2] += np.einsum("pn,pns->ps", g, inv)
    out = (m[0][..., None, None] * np.eye(3)
           + (m[1] * s)[..., None, None] * B1
           + (m[2] * s * s)[..., None, None] * B2)
    return out / (2j * np.pi)


def _contour_h(f, s, contour):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    psi = contour.resolve_psi(f)
    nodes, weights = np.polynomial.legendre.leggauss(contour.order)
    n_panels = max(1, contour.n_nodes // contour.order)
    edges = np.linspace(np.log(contour.r_min), np.log(contour.r_max), n_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    if not contour.adaptive:
        return _panel_integrals(f, s, psi, lo, hi, nodes, weights).sum(axis=0)
    total = np.zeros((s.size, 3, 3), dtype=complex)
    mass = None
    accepted = 0
    while lo.size:
        mid = 0.5 * (lo + hi)
        coarse = _panel_integrals(f, s, psi, lo, hi, nodes, weights)
        fine = (_panel_integrals(f, s, psi, lo, mid, nodes, weights)
                + _panel_integrals(f, s, psi, mid, hi, nodes, weights))
        if mass is None:
            mass = np.abs(fine).sum(axis=0).max(axis=(1, 2))
        err = np.abs(coarse - fine).max(axis=(2, 3))
        ok = np.all(err <= contour.tol * mass, axis=1)
        total += fine[ok].sum(axis=0)
        accepted += int(ok.sum())
        lo, hi = np.concatenate([lo[~ok], mid[~ok]]), np.concatenate([mid[~ok], hi[~ok]])
        if accepted + lo.size > contour.max_panels:
            raise NumericalFailure(f"contour quadrature for {f.name} exceeded {contour.max_panels} panels")
    return total


def holomorphic_calculus(f, zeta, contour=None):
    """``h_f(zeta) = 1/(2 pi i) int_Gamma f(mu) (mu - a(zeta))^-1 dmu`` by quadrature."""
    z = _as_zeta(zeta)
    s = float(z @ z)
    if s == 0.0:
        raise DegenerateSymbol("h_f(0) is not defined: a(0) = 0 sits at the vertex of the contour")
    return _contour_h(f, s, contour or ContourSpec())[0]


def holomorphic_calculus_s(f, s_values, contour=None):
    """Vectorised ``h_f`` as a function of ``s = |zeta|^2`` (all entries must be > 0)."""
    s = np.atleast_1d(np.asarray(s_values, dtype=float))
    if np.any(s <= 0):
        raise DegenerateSymbol("h_f is only evaluated for |zeta|^2 > 0")
    return _contour_h(f, s, contour or ContourSpec())


def matrix_function_oracle(f, zeta):
    """``f(a(zeta)) = V diag(f(|zeta|^2 lam_i)) V^-1`` by spectral decomposition."""
    z = _as_zeta(zeta)
    lam, V, Vinv = eigen_decompose_M()
    return (V * f(float(z @ z) * lam)) @ Vinv


# ---------------------------------------------------------------------------
# sector analysis
# ---------------------------------------------------------------------------

def sector_lambdas(phi=None, n_radii=16, n_angles=9, r_range=(1e-3, 1e3)):
    """Sample points of the sector ``|arg lam| <= pi - phi`` (log radii x uniform angles).

    ``phi`` defaults to ``spectral_angle() + 0.05``.
    """
    if phi is None:
        phi = spectral_angle() + 0.05
    radii = np.logspace(np.log10(r_range[0]), np.log10(r_range[1]), n_radii)
    angles = np.linspace(-(np.pi - phi), np.pi - phi, n_angles)
    return (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()


def resolvent_sweep(lambdas, s_values):
    """Table of ``||lam (lam + s M)^-1||_2`` over all pairs; columns (re, im, s, norm)."""
    lam = np.asarray(lambdas, dtype=complex)
    s = np.asarray(s_values, dtype=float)
    L, S = np.meshgrid(lam, s, indexing="ij")
    R, bad = _resolvent_s(L, S)
    if np.any(bad):
        raise SingularResolvent("resolvent sweep touched the spectrum of -a(zeta)")
    norms = np.linalg.norm(L[..., None, None] * R, ord=2, axis=(-2, -1))
    return np.column_stack([L.real.ravel(), L.imag.ravel(), S.ravel(), norms.ravel()])


@dataclass
class SectorReport:
    eigenvalues_of_M: np.ndarray
    spectral_angle: float
    margin: float
    resolvent_sup: float
    phi: float
    n_lambda: int
    n_zeta: int

    def to_dict(self):
        return {
            "eigenvalues_of_M": [[float(l.real), float(l.imag)] for l in self.eigenvalues_of_M],
            "spectral_angle": self.spectral_angle,
            "margin": self.margin,
            "resolvent_sup": self.resolvent_sup,
            "phi": self.phi,
            "n_lambda": self.n_lambda,
            "n_zeta": self.n_zeta,
        }


def sector_report(phi=None, n_radii=16, n_angles=9, abs_zeta=None):
    """Spectral angle plus a sampled sup of ``||lam (lam + a(zeta))^-1||``.

    Returns ``(report, sweep_table)``.
    """
    angle = spectral_angle()
    if phi is None:
        phi = angle + 0.05
    lambdas = sector_lambdas(phi, n_radii, n_angles)
    if abs_zeta is None:
        abs_zeta = np.logspace(-3, 3, 25)
    table = resolvent_sweep(lambdas, np.asarray(abs_zeta, dtype=float) ** 2)
    report = SectorReport(
        eigenvalues_of_M=np.array(eigen_decompose_M().values),
        spectral_angle=angle,
        margin=0.5 * np.pi - angle,
        resolvent_sup=float(table[:, 3].max()),
        phi=float(phi),
        n_lambda=lambdas.size,
        n_zeta=len(abs_zeta),
    )
    return report, table
