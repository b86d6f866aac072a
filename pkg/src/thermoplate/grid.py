"""Rectangular product domains and the mixed sine/Fourier spectral transform.

A domain is an ordered list of directions.  Whole-line directions are
replaced by a periodic box (complex Fourier basis ``exp(i zeta x)``),
``(0, pi)`` and truncated half-line directions use the Dirichlet sine basis
``sin(zeta x)``.  Field arrays carry the spatial axes last; any number of
leading axes (components, time nodes) is allowed.

Coefficient conventions (chosen so that a single basis function has
coefficient exactly 1):

* sine, length ``L``, ``N`` modes: ``zeta_k = k pi / L`` for ``k = 1..N``,
  grid ``x_j = j L / (N + 1)`` for ``j = 1..N`` (type-I DST),
  ``u_hat_k = (2 / L) int_0^L u sin(zeta_k x) dx``;
* Fourier, length ``L``, ``N`` points: ``zeta_j = 2 pi j / L`` with ``j`` in
  FFT order, grid ``x_j = j L / N``, ``u_hat_j = (1 / L) int u exp(-i zeta_j x) dx``.

Parseval weights: ``int |u|^2 = sum_k w_k |u_hat_k|^2`` with ``w = L / 2`` per
sine direction and ``w = L`` per Fourier direction.
"""

from dataclasses import dataclass
from math import ceil, pi

import numpy as np
import scipy.fft as sfft

from .errors import ShapeMismatch, ZeroModeNotInvertible

FOURIER = "fourier"
SINE = "sine"


@dataclass(frozen=True)
class Direction:
    kind: str
    length: float
    n: int
    role: str = ""

    def __post_init__(self):
        if self.kind not in (FOURIER, SINE):
            raise ValueError(f"unknown direction kind {self.kind!r}")
        if self.length <= 0 or self.n < 1:
            raise ValueError("direction needs positive length and mode count")

    @property
    def indices(self):
        if self.kind == SINE:
            return np.arange(1, self.n + 1)
        return np.rint(sfft.fftfreq(self.n) * self.n).astype(int)

    @property
    def zeta(self):
        if self.kind == SINE:
            return self.indices * (pi / self.length)
        return self.indices * (2 * pi / self.length)

    @property
    def coords(self):
        if self.kind == SINE:
            return np.arange(1, self.n + 1) * self.length / (self.n + 1)
        return np.arange(self.n) * self.length / self.n

    @property
    def cell(self):
        return self.length / (self.n + 1 if self.kind == SINE else self.n)

    @property
    def weight(self):
        return self.length / 2 if self.kind == SINE else self.length

    def padded(self, factor):
        if self.kind == SINE:
            m = max(self.n, int(ceil(factor * (self.n + 1))) - 1)
        else:
            m = max(self.n, int(ceil(factor * self.n)) + 2)
            m += m % 2
        return Direction(self.kind, self.length, m, self.role)


class DomainSpec:
    """Ordered product of spectral directions.

    Build the ``R^n1 x (0, pi)^n2 x (0, inf)^n3`` surrogate with
    :meth:`rectangular`; arbitrary direction lists (e.g. extended periodic
    cells) go through the constructor.
    """

    def __init__(self, directions, validate=True):
        self.directions = tuple(directions)
        if not self.directions:
            raise ValueError("a domain needs at least one direction")
        if validate:
            for d in self.directions:
                if d.n < 4 or d.n % 2:
                    raise ValueError(f"mode counts must be even and >= 4, got {d.n}")
        self._zeta_sq = None

    @classmethod
    def rectangular(cls, n1=0, n2=0, n3=0, modes=16, L_r=8 * pi, L_h=8 * pi):
        counts = [n1, n2, n3]
        if min(counts) < 0 or sum(counts) < 1:
            raise ValueError("need nonnegative n1, n2, n3 with n1 + n2 + n3 >= 1")
        n = sum(counts)
        modes = [modes] * n if np.isscalar(modes) else list(modes)
        if len(modes) != n:
            raise ValueError("one mode count per direction required")
        dirs = []
        it = iter(modes)
        dirs += [Direction(FOURIER, L_r, next(it), "r") for _ in range(n1)]
        dirs += [Direction(SINE, pi, next(it), "box") for _ in range(n2)]
        dirs += [Direction(SINE, L_h, next(it), "half") for _ in range(n3)]
        return cls(dirs)

    def __repr__(self):
        parts = ", ".join(f"{d.role or d.kind}:{d.kind}[L={d.length:.6g}, N={d.n}]" for d in self.directions)
        return f"DomainSpec({parts})"

    def __eq__(self, other):
        return isinstance(other, DomainSpec) and self.directions == other.directions

    def __hash__(self):
        return hash(self.directions)

    @property
    def ndim(self):
        return len(self.directions)

    @property
    def shape(self):
        return tuple(d.n for d in self.directions)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def has_fourier(self):
        return any(d.kind == FOURIER for d in self.directions)

    @property
    def coeff_dtype(self):
        return complex if self.has_fourier else float

    def _axes(self):
        return tuple(range(-self.ndim, 0))

    def _bcast(self, vec, axis):
        shape = [1] * self.ndim
        shape[axis] = vec.size
        return vec.reshape(shape)

    def zeta_components(self):
        """Per-direction frequency arrays, broadcastable to :attr:`shape`."""
        return [self._bcast(d.zeta, i) for i, d in enumerate(self.directions)]

    @property
    def zeta_sq(self):
        """``|zeta|^2`` on the mode lattice (the coefficient-space action of ``-Laplace``)."""
        if self._zeta_sq is None:
            out = np.zeros(self.shape)
            for z in self.zeta_components():
                out = out + z ** 2
            out.setflags(write=False)
            self._zeta_sq = out
        return self._zeta_sq

    def mode_indices(self):
        """Integer index arrays per direction, broadcastable to :attr:`shape`."""
        return [self._bcast(d.indices, i) for i, d in enumerate(self.directions)]

    def coords(self):
        return [self._bcast(d.coords, i) for i, d in enumerate(self.directions)]

    def mesh(self):
        return np.meshgrid(*[d.coords for d in self.directions], indexing="ij")

    @property
    def cell_volume(self):
        return float(np.prod([d.cell for d in self.directions]))

    @property
    def parseval_weight(self):
        return float(np.prod([d.weight for d in self.directions]))

    def check(self, arr):
        arr = np.asarray(arr)
        if arr.ndim < self.ndim or arr.shape[arr.ndim - self.ndim:] != self.shape:
            raise ShapeMismatch(f"expected trailing shape {self.shape}, got {arr.shape}")
        return arr

    # -- transforms ---------------------------------------------------------

    def forward(self, field):
        """Physical grid values -> spectral coefficients."""
        out = self.check(field)
        for i, d in enumerate(self.directions):
            ax = i - self.ndim
            if d.kind == SINE:
                out = sfft.dst(out, type=1, axis=ax) / (d.n + 1)
            else:
                out = sfft.fft(out, axis=ax) / d.n
        return out

    def inverse(self, coeffs, real=True):
        """Spectral coefficients -> physical grid values (real part unless ``real=False``)."""
        out = self.check(coeffs)
        for i, d in enumerate(self.directions):
            ax = i - self.ndim
            if d.kind == SINE:
                out = sfft.dst(out, type=1, axis=ax) / 2
            else:
                out = sfft.ifft(out, axis=ax) * d.n
        if real and np.iscomplexobj(out):
            out = out.real
        return out

    # -- padding for pseudo-spectral products --------------------------------

    def padded(self, factor=2.0):
        return DomainSpec([d.padded(factor) for d in self.directions], validate=False)

    def pad(self, coeffs, target):
        """Zero-pad coefficients onto the larger lattice of ``target``."""
        c = self.check(coeffs)
        for i, (d, t) in enumerate(zip(self.directions, target.directions)):
            c = _pad_axis(c, d, t, i - self.ndim)
        return c

    def truncate(self, coeffs, source):
        """Drop coefficients of ``source``'s lattice that are not on this lattice."""
        c = source.check(coeffs)
        for i, (d, s) in enumerate(zip(self.directions, source.directions)):
            c = _truncate_axis(c, d, s, i - self.ndim)
        return c

    # -- operators ----------------------------------------------------------

    def laplacian_symbol(self, mode):
        """``|zeta|^2`` of the mode with per-direction indices ``mode``."""
        mode = tuple(int(m) for m in np.atleast_1d(mode))
        if len(mode) != self.ndim:
            raise ShapeMismatch(f"mode needs {self.ndim} indices")
        total = 0.0
        for m, d in zip(mode, self.directions):
            if d.kind == SINE:
                if not 1 <= m <= d.n:
                    raise ValueError(f"sine index {m} outside 1..{d.n}")
                total += (m * pi / d.length) ** 2
            else:
                if not -d.n // 2 <= m < d.n // 2 + (d.n % 2):
                    raise ValueError(f"Fourier index {m} outside the lattice")
                total += (2 * pi * m / d.length) ** 2
        return total

    def mode_position(self, mode):
        """Array position of the mode with per-direction indices ``mode``."""
        pos = []
        for m, d in zip(mode, self.directions):
            if d.kind == SINE:
                pos.append(int(m) - 1)
            else:
                pos.append(int(m) % d.n)
        return tuple(pos)

    def laplacian(self, coeffs):
        """Coefficient-space Laplacian: multiplication by ``-|zeta|^2``."""
        return -self.zeta_sq * self.check(coeffs)

    def dirichlet_inverse_laplacian(self, coeffs, rtol=1e-13):
        """Solve ``Laplace u = f`` mode-wise: multiply by ``-1 / |zeta|^2``.

        Modes with ``|zeta|^2 = 0`` (only present without sine directions)
        must carry a zero coefficient; otherwise ZeroModeNotInvertible.
        """
        c = self.check(coeffs)
        zero = self.zeta_sq == 0
        out = np.zeros_like(c)
        if np.any(zero):
            zc = np.abs(c[..., zero])
            scale = np.abs(c).max() if c.size else 0.0
            if np.any(zc > rtol * scale):
                raise ZeroModeNotInvertible("zero frequency carries a nonzero coefficient")
        nz = ~zero
        out[..., nz] = -c[..., nz] / self.zeta_sq[nz]
        return out

    # -- norms --------------------------------------------------------------

    def l2_norm_coeffs(self, coeffs, axis_components=None):
        """L2 norm over space via Parseval; leading axes are kept."""
        c = self.check(coeffs)
        val = np.sum(np.abs(c) ** 2, axis=self._axes()) * self.parseval_weight
        if axis_components is not None:
            val = val.sum(axis=axis_components)
        return np.sqrt(val)

    def lp_norm(self, field, p=2.0):
        """Discrete L^p norm over the spatial grid (leading axes kept)."""
        f = self.check(field)
        if np.isinf(p):
            return np.abs(f).max(axis=self._axes())
        return (np.sum(np.abs(f) ** p, axis=self._axes()) * self.cell_volume) ** (1.0 / p)


def _pad_axis(c, d, t, ax):
    n, m = d.n, t.n
    if d.kind != t.kind:
        raise ShapeMismatch("padding requires matching direction kinds")
    c = np.moveaxis(c, ax, -1)
    out = np.zeros(c.shape[:-1] + (m,), dtype=c.dtype)
    if d.kind == SINE:
        out[..., :n] = c
    else:
        h = n // 2
        if n % 2 == 0:
            out[..., :h] = c[..., :h]
            out[..., m - h + 1:] = c[..., h + 1:]
            # split the Nyquist coefficient between +n/2 and -n/2
            out[..., h] = 0.5 * c[..., h]
            out[..., m - h] = 0.5 * c[..., h]
        else:
            out[..., :h + 1] = c[..., :h + 1]
            out[..., m - h:] = c[..., h + 1:]
    return np.moveaxis(out, -1, ax)


def _truncate_axis(c, d, s, ax):
    n, m = d.n, s.n
    c = np.moveaxis(c, ax, -1)
    if d.kind == SINE:
        out = c[..., :n]
    else:
        h = n // 2
        out = np.zeros(c.shape[:-1] + (n,), dtype=c.dtype)
        if n % 2 == 0:
            out[..., :h] = c[..., :h]
            out[..., h + 1:] = c[..., m - h + 1:]
            out[..., h] = c[..., h] + c[..., m - h]
        else:
            out[..., :h + 1] = c[..., :h + 1]
            out[..., h + 1:] = c[..., m - h:]
    return np.moveaxis(out, -1, ax)
