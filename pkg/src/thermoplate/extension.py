"""Odd reflection from Dirichlet directions onto a doubled periodic cell.

A sine direction of length ``L`` with ``N`` modes is reflected oddly (about
``x = L`` for box directions, about ``x = 0`` for half-line directions; on the
periodic cell both are the same operation) onto a Fourier direction of
length ``2 L`` with ``2 (N + 1)`` points.  The reflection is carried out in
coefficient space: ``sin(k pi x / L) = (e^{i k pi x/L} - e^{-i k pi x/L}) / 2i``,
so the extended grid reproduces the source grid exactly, with zeros on the
mirror planes ``x = 0`` and ``x = L``.

On the extended grid the half-line mirror ``x = 0`` sits at index 0 and the
reflected copy of ``(0, L)`` occupies ``(L, 2 L)``, i.e. ``(-L, 0)`` modulo
the period.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import BoundaryViolation, ShapeMismatch
from .grid import FOURIER, SINE, Direction, DomainSpec

_BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class ReflectionPlan:
    source: DomainSpec
    axes: tuple

    def __post_init__(self):
        axes = tuple(sorted(set(int(a) % self.source.ndim for a in self.axes)))
        if len(axes) != len(tuple(self.axes)):
            raise ValueError("reflection axes must be distinct")
        for a in axes:
            if self.source.directions[a].kind != SINE:
                raise ValueError(f"axis {a} is not a Dirichlet (sine) direction")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def all_dirichlet(cls, source):
        """Reflect every sine direction (half-line and box directions alike)."""
        return cls(source, tuple(i for i, d in enumerate(source.directions) if d.kind == SINE))

    @property
    def target(self):
        dirs = list(self.source.directions)
        for a in self.axes:
            d = dirs[a]
            dirs[a] = Direction(FOURIER, 2 * d.length, 2 * (d.n + 1), d.role + "-ext")
        return DomainSpec(dirs)


def _strip_boundary(field, plan):
    """Accept grids with or without the mirror nodes; strip and check them."""
    nd = plan.source.ndim
    out = np.asarray(field, dtype=float)
    lead = out.ndim - nd
    if lead < 0:
        raise ShapeMismatch("field has fewer axes than the domain")
    for i, d in enumerate(plan.source.directions):
        ax = lead + i
        size = out.shape[ax]
        if size == d.n:
            continue
        if size == d.n + 2 and i in plan.axes:
            edge = np.take(out, [0, size - 1], axis=ax)
            if np.abs(edge).max(initial=0.0) > _BOUNDARY_TOL:
                raise BoundaryViolation(f"field does not vanish on the mirror planes of axis {i}")
            out = np.take(out, np.arange(1, size - 1), axis=ax)
            continue
        raise ShapeMismatch(f"axis {i}: expected {d.n} (or {d.n + 2} with boundary nodes), got {size}")
    return out


def sine_to_fourier(coeffs, plan):
    """Map sine coefficients of the reflected axes to Fourier coefficients of the target."""
    c = plan.source.check(coeffs)
    nd = plan.source.ndim
    for a in plan.axes:
        n = plan.source.directions[a].n
        ax = a - nd
        c = np.moveaxis(c, ax, -1)
        out = np.zeros(c.shape[:-1] + (2 * (n + 1),), dtype=complex)
        out[..., 1:n + 1] = c / 2j
        out[..., n + 2:] = (-c / 2j)[..., ::-1]
        c = np.moveaxis(out, -1, ax)
    return c


def fourier_to_sine(coeffs, plan):
    """Inverse of :func:`sine_to_fourier` on odd data (keeps only the odd part).

    On purely sine sources the result is returned as a real array when its
    imaginary part is at round-off level.
    """
    c = plan.target.check(coeffs)
    nd = plan.source.ndim
    for a in plan.axes:
        n = plan.source.directions[a].n
        ax = a - nd
        c = np.moveaxis(c, ax, -1)
        pos = c[..., 1:n + 1]
        neg = c[..., n + 2:][..., ::-1]
        out = 1j * (pos - neg)
        c = np.moveaxis(out, -1, ax)
    if not plan.source.has_fourier:
        scale = np.abs(c).max(initial=0.0)
        if np.abs(c.imag).max(initial=0.0) <= 1e-13 * max(scale, 1e-300):
            c = c.real
    return c


def odd_extend(field, plan):
    """Odd extension of a Dirichlet grid field to the doubled periodic cell."""
    u = _strip_boundary(field, plan)
    nd = plan.source.ndim
    for a in plan.axes:
        d = plan.source.directions[a]
        ax = a - nd
        b = sfft.dst(u, type=1, axis=ax) / (d.n + 1)
        b = np.moveaxis(b, ax, -1)
        c = np.zeros(b.shape[:-1] + (2 * (d.n + 1),), dtype=complex)
        c[..., 1:d.n + 1] = b / 2j
        c[..., d.n + 2:] = (-b / 2j)[..., ::-1]
        vals = sfft.ifft(c, axis=-1) * c.shape[-1]
        u = np.moveaxis(vals.real, -1, ax)
    return u


def restrict(field, plan):
    """Pointwise restriction from the extended cell back to the source grid."""
    f = plan.target.check(field)
    nd = plan.source.ndim
    for a in plan.axes:
        n = plan.source.directions[a].n
        f = np.take(f, np.arange(1, n + 1), axis=a - nd)
    return f
