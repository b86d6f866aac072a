"""Sampled Michlin-type symbol bounds and Monte Carlo R-bound estimates.

Symbols live on ``(xi, k)`` with ``xi`` in ``R^{n1} \\ {0}`` and ``k`` in
``Z^{n2}``.  For every ``gamma = (gamma1, gamma2)`` in ``{0, 1}^{n1 + n2}`` the
sweep records

    sup | xi^gamma1 k^gamma2 d_xi^gamma1 Delta_k^gamma2 m_lam(xi, k) |

(spectral norm), where ``Delta_k`` is the backward difference
``M(k) - M(k - e_j)``.  Terms with ``gamma2 != 0`` are sampled only outside
the cube ``[-1, 1]^{n2}``.

Everything random goes through a seeded Philox generator, so reports are
reproducible from the recorded seed.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import (DegenerateDenominator, MissingIndex, NonFiniteValue,
                     PreconditionViolated)
from .symbol import (_SINGULAR_TOL, RHO, ContourSpec, _resolvent_s, eigen_decompose_M,
                     holomorphic_calculus_s, sector_lambdas, spectral_angle)

KAPPA = "kappa"
H_F = "h_f"


# ---------------------------------------------------------------------------
# discrete differences
# ---------------------------------------------------------------------------

def _key(k):
    return tuple(int(x) for x in np.atleast_1d(k))


def discrete_difference(values, gamma2, at=None):
    """Iterated backward differences of a map ``k -> matrix``.

    ``values`` maps integer tuples (or ints in one dimension) to arrays.  The
    result is defined at every ``k`` whose shifted indices are all present.
    With ``at`` given, only those indices are returned and a missing shifted
    index raises MissingIndex.
    """
    gamma2 = tuple(int(g) for g in np.atleast_1d(gamma2))
    if any(g not in (0, 1) for g in gamma2):
        raise ValueError("gamma2 entries must be 0 or 1")
    table = {_key(k): np.asarray(v) for k, v in values.items()}
    dims = {len(k) for k in table}
    if dims and dims != {len(gamma2)}:
        raise ValueError("index dimension does not match gamma2")
    scalar = all(not isinstance(k, tuple) for k in values)
    if at is not None:
        at = [_key(k) for k in at]
        for k in at:
            for shift in product(*[(0, 1) if g else (0,) for g in gamma2]):
                need = tuple(a - b for a, b in zip(k, shift))
                if need not in table:
                    raise MissingIndex(f"value at k={need} needed for the difference at k={k}")
    for j, g in enumerate(gamma2):
        if not g:
            continue
        step = tuple(1 if i == j else 0 for i in range(len(gamma2)))
        table = {k: v - table[tuple(a - b for a, b in zip(k, step))]
                 for k, v in table.items()
                 if tuple(a - b for a, b in zip(k, step)) in table}
    if at is not None:
        table = {k: table[k] for k in at}
    if scalar:
        return {k[0]: v for k, v in table.items()}
    return table


# ---------------------------------------------------------------------------
# symbol families
# ---------------------------------------------------------------------------

def kappa_grid(lams, zetas, alpha):
    """Vectorised ``lam^(1-|alpha|/2) zeta^alpha (lam + |zeta|^2 M)^-1``.

    ``lams`` has shape (L,), ``zetas`` shape (..., n); output (L, ..., 3, 3).
    """
    lams = np.asarray(lams, dtype=complex)
    zetas = np.asarray(zetas, dtype=float)
    alpha = np.asarray(alpha, dtype=int)
    order = int(alpha.sum())
    s = np.sum(zetas ** 2, axis=-1)
    lam = lams.reshape((-1,) + (1,) * s.ndim)
    R, bad = _resolvent_s(lam, s)
    if np.any(bad):
        raise NonFiniteValue("kappa sampled on the spectrum of -a(zeta)")
    weight = np.sqrt(lam) ** (2 - order) * np.prod(zetas ** alpha, axis=-1)
    return weight[..., None, None] * R


@dataclass(frozen=True)
class MichlinSweep:
    """Sample set and symbol family for one Michlin-condition sweep.

    ``family`` is ``"kappa"`` (with multi-index ``alpha``) or ``"h_f"`` (with
    test function ``f``).  The grids are generated from the counts so that
    :meth:`doubled` can refine all of them at once.
    """

    family: str = KAPPA
    alpha: tuple | None = None
    f: object = RHO
    n1: int = 1
    n2: int = 1
    n_xi: int = 13
    xi_range: tuple = (1e-2, 1e2)
    k_max: int = 32
    n_radii: int = 32
    n_angles: int = 9
    r_range: tuple = (1e-3, 1e3)
    phi: float | None = None
    scale: float = 1.0
    delta: float = 1e-3
    contour: ContourSpec = field(default_factory=ContourSpec)

    def __post_init__(self):
        if self.family not in (KAPPA, H_F):
            raise ValueError(f"unknown symbol family {self.family!r}")
        if self.n1 < 1 or self.n2 < 0:
            raise ValueError("need n1 >= 1 continuous and n2 >= 0 discrete directions")
        if self.family == KAPPA:
            alpha = (0,) * (self.n1 + self.n2) if self.alpha is None else tuple(self.alpha)
            if len(alpha) != self.n1 + self.n2 or min(alpha) < 0 or sum(alpha) > 2:
                raise ValueError("alpha must be a multi-index of length n1 + n2 with |alpha| <= 2")
            object.__setattr__(self, "alpha", alpha)
        if self.n_xi < 2 or self.k_max < 2:
            raise ValueError("grids too small")

    @property
    def label(self):
        if self.family == KAPPA:
            return "kappa[" + ",".join(str(a) for a in self.alpha) + "]"
        return f"h_{getattr(self.f, 'name', 'f')}"

    @property
    def lambdas(self):
        phi = spectral_angle() + 0.05 if self.phi is None else self.phi
        return self.scale ** 2 * sector_lambdas(phi, self.n_radii, self.n_angles, self.r_range)

    @property
    def xi_values(self):
        lo, hi = self.xi_range
        mags = np.logspace(np.log10(lo), np.log10(hi), self.n_xi)
        return self.scale * np.concatenate([-mags[::-1], mags])

    @property
    def xi_points(self):
        v = self.xi_values
        return np.array(list(product(v, repeat=self.n1)))

    @property
    def k_values(self):
        """``-k_max - 1 .. k_max``; the extra left index feeds the backward difference."""
        return np.arange(-self.k_max - 1, self.k_max + 1)

    @property
    def n_lambda(self):
        return 1 if self.family == H_F else self.n_radii * self.n_angles

    def doubled(self):
        """Double the xi density, the k range and the lambda sample count."""
        return replace(self, n_xi=2 * self.n_xi - 1, k_max=2 * self.k_max,
                       n_radii=2 * self.n_radii, n_angles=2 * self.n_angles - 1)

    def gammas(self):
        return list(product((0, 1), repeat=self.n1 + self.n2))


def _zeta_grid(sweep, xi):
    """Frequencies ``(xi, k)`` flattened to (Z, n1 + n2) plus the grid shape (P, *[nk]*n2)."""
    kv = sweep.scale * sweep.k_values
    P = xi.shape[0]
    if not sweep.n2:
        return xi, (P,)
    kgrid = np.stack(np.meshgrid(*([kv] * sweep.n2), indexing="ij"), axis=-1)
    kflat = kgrid.reshape(-1, sweep.n2)
    z = np.concatenate([np.repeat(xi, kflat.shape[0], axis=0), np.tile(kflat, (P, 1))], axis=1)
    return z, (P,) + (kv.size,) * sweep.n2


def _evaluate(sweep, xi, lams, alphas):
    """Symbol samples on (lambda, xi point, k grid) for every key in ``alphas``.

    For kappa the result is the diagonal of ``V^-1 m V`` (trailing axis of
    length 3), using ``(lam + s M)^-1 = V diag(1 / (lam + s mu_i)) V^-1``.
    For h_f the full contour matrices are returned (trailing 3 x 3).
    """
    z, shape = _zeta_grid(sweep, xi)
    s = np.sum(z ** 2, axis=-1)
    if sweep.family == H_F:
        if np.any(s <= 0):
            raise NonFiniteValue("h_f sampled at zeta = 0")
        uniq, inv = np.unique(s, return_inverse=True)
        h = holomorphic_calculus_s(sweep.f, uniq, sweep.contour)[inv]
        if not np.all(np.isfinite(h)):
            raise NonFiniteValue(f"non-finite value in the {sweep.label} symbol")
        return {a: h.reshape((1,) + shape + (3, 3)) for a in alphas}
    mu = eigen_decompose_M().values
    lam = np.asarray(lams, dtype=complex)[:, None]
    denom = lam[..., None] + s[None, :, None] * mu
    scale = np.maximum(1.0, np.maximum(np.abs(lam), s))[..., None]
    if np.any(np.abs(denom) <= _SINGULAR_TOL * scale):
        raise NonFiniteValue("kappa sampled on the spectrum of -a(zeta)")
    d = 1.0 / denom
    out = {}
    for a in alphas:
        order = int(sum(a))
        w = np.sqrt(lam) ** (2 - order) * np.prod(z ** np.asarray(a), axis=-1)
        out[a] = (w[..., None] * d).reshape((lam.shape[0],) + shape + (3,))
    return out


def _tail(sweep):
    return 2 if sweep.family == H_F else 1


def _xi_derivative(sweep, gamma1, h, lams, alphas):
    """Mixed central difference in the xi directions flagged by ``gamma1``."""
    xi = sweep.xi_points
    dirs = [j for j, g in enumerate(gamma1) if g]
    if not dirs:
        return _evaluate(sweep, xi, lams, alphas)
    steps = h * np.abs(xi[:, dirs])
    denom = np.prod(2 * steps, axis=1).reshape((1, -1) + (1,) * (sweep.n2 + _tail(sweep)))
    total = {a: 0.0 for a in alphas}
    for signs in product((1, -1), repeat=len(dirs)):
        shifted = xi.copy()
        shifted[:, dirs] += np.array(signs) * steps
        vals = _evaluate(sweep, shifted, lams, alphas)
        for a in alphas:
            total[a] = total[a] + np.prod(signs) * vals[a]
    return {a: t / denom for a, t in total.items()}


def _xi_terms(sweep, g1, lams, alphas):
    """Weighted ``xi^g1 d_xi^g1 m`` with Richardson extrapolation; returns {alpha: (term, gap)}."""
    weight = np.prod(np.where(np.array(g1, bool), sweep.xi_points, 1.0), axis=1)
    weight = weight.reshape((1, -1) + (1,) * (sweep.n2 + _tail(sweep)))
    if not any(g1):
        vals = _evaluate(sweep, sweep.xi_points, lams, alphas)
        return {a: (v * weight, 0.0) for a, v in vals.items()}
    d1 = _xi_derivative(sweep, g1, sweep.delta, lams, alphas)
    d2 = _xi_derivative(sweep, g1, 0.5 * sweep.delta, lams, alphas)
    out = {}
    for a in alphas:
        gap = np.abs(d2[a] - d1[a]) * np.abs(weight)
        out[a] = ((4.0 * d2[a] - d1[a]) / 3.0 * weight, float(gap.max()))
    return out


def _k_term(sweep, d, g2):
    """Apply ``k^g2 Delta_k^g2`` and drop the cube ``[-1, 1]^n2`` when ``g2 != 0``."""
    tail = _tail(sweep)
    kv = sweep.k_values
    for j, g in enumerate(g2):
        ax = 2 + j
        d = np.diff(d, axis=ax) if g else np.take(d, np.arange(1, kv.size), axis=ax)
    if sweep.n2:
        kgrid = np.stack(np.meshgrid(*([kv[1:]] * sweep.n2), indexing="ij"), axis=-1)
        kw = np.prod(np.where(np.array(g2, bool), kgrid, 1.0), axis=-1)
        d = d * kw[(None, None, Ellipsis) + (None,) * tail]
        if any(g2):
            d = d[:, :, ~np.all(np.abs(kgrid) <= 1, axis=-1)]
    return d.reshape((-1,) + d.shape[d.ndim - tail:])


def _approx_norms(mats):
    """Spectral norms of 3x3 matrices from the closed-form top eigenvalue of ``A^H A``.

    Accurate to a few ulps of ``||A||^2``; used to rank candidates before the SVD.
    """
    B = np.conj(np.swapaxes(mats, -1, -2)) @ mats
    q = np.trace(B, axis1=-2, axis2=-1).real / 3.0
    off = np.abs(B[:, 0, 1]) ** 2 + np.abs(B[:, 0, 2]) ** 2 + np.abs(B[:, 1, 2]) ** 2
    diag = [B[:, i, i].real - q for i in range(3)]
    p = np.sqrt((diag[0] ** 2 + diag[1] ** 2 + diag[2] ** 2 + 2.0 * off) / 6.0)
    safe = np.where(p > 0, p, 1.0)
    C = (B - q[:, None, None] * np.eye(3)) / safe[:, None, None]
    r = np.clip(np.linalg.det(C).real / 2.0, -1.0, 1.0)
    top = q + 2.0 * p * np.cos(np.arccos(r) / 3.0)
    return np.sqrt(np.maximum(top, 0.0))


def _exact_sup(mats, approx, best):
    """Refine ``best`` by SVD on the entries whose approximate norm can still win."""
    order = np.argsort(approx)[::-1]
    for start in range(0, order.size, 16):
        part = order[start:start + 16]
        if approx[part[0]] * (1 + 1e-7) + 1e-300 <= best:
            break
        best = max(best, float(np.linalg.norm(mats[part], ord=2, axis=(-2, -1)).max()))
    return best


def sup_spectral_norm(mats):
    """Largest spectral norm in a stack of 3x3 matrices."""
    mats = np.asarray(mats).reshape(-1, 3, 3)
    if mats.shape[0] == 0:
        return 0.0
    if not np.all(np.isfinite(mats)):
        raise NonFiniteValue("non-finite Michlin term")
    return _exact_sup(mats, _approx_norms(mats), 0.0)


@lru_cache(maxsize=1)
def _frobenius_form():
    # ||V diag(d) V^-1||_F^2 = sum_ij conj(d_i) (V^H V)_ij (V^-1 V^-H)_ji d_j
    _, V, Vinv = eigen_decompose_M()
    return (V.conj().T @ V) * (Vinv @ Vinv.conj().T).T


def sup_spectral_norm_diag(d, floor=0.0):
    """Largest ``||V diag(d) V^-1||_2`` over a stack of eigen-coefficient vectors.

    Entries whose Frobenius norm cannot beat ``floor`` are skipped; the
    return value is ``max(floor, sup)``.
    """
    d = np.asarray(d).reshape(-1, 3)
    best = float(floor)
    if d.shape[0] == 0:
        return best
    K = _frobenius_form()
    fro = np.sqrt(np.maximum(np.sum((d.conj() @ K) * d, axis=-1).real, 0.0))
    if not np.all(np.isfinite(fro)):
        raise NonFiniteValue("non-finite Michlin term")
    # guard the quadratic form against rounding before pruning
    idx = np.flatnonzero(fro * (1 + 1e-10) > best)
    if idx.size == 0:
        return best
    _, V, Vinv = eigen_decompose_M()
    mats = (V * d[idx, None, :]) @ Vinv
    return _exact_sup(mats, _approx_norms(mats), best)


@dataclass
class SweepResult:
    label: str
    rows: list

    def sup(self, gamma):
        return self.sups[tuple(gamma)]

    @property
    def sups(self):
        return {r["gamma"]: r["sup"] for r in self.rows}


def michlin_family(sweep, alphas=None, level=0, chunk=16):
    """Per-gamma sups for several kappa multi-indices sharing one sample set.

    Returns ``{label: SweepResult}``.  For the h_f family ``alphas`` is ignored.
    """
    if sweep.family == H_F:
        keys = [None]
    else:
        keys = [tuple(a) for a in (alphas if alphas is not None else [sweep.alpha])]
        for a in keys:
            replace(sweep, alpha=a)  # validates the multi-index
    gammas = sweep.gammas()
    sups = {(a, g): 0.0 for a in keys for g in gammas}
    gaps = dict(sups)
    lams = sweep.lambdas if sweep.family == KAPPA else np.ones(1)
    g1_set = sorted({g[: sweep.n1] for g in gammas})
    for start in range(0, lams.size, chunk):
        part = lams[start:start + chunk]
        for g1 in g1_set:
            terms = _xi_terms(sweep, g1, part, keys)
            for a, (d, gap) in terms.items():
                for g in gammas:
                    if g[: sweep.n1] != g1:
                        continue
                    term = _k_term(sweep, d, g[sweep.n1:])
                    if sweep.family == H_F:
                        sups[a, g] = max(sups[a, g], sup_spectral_norm(term))
                    else:
                        sups[a, g] = sup_spectral_norm_diag(term, sups[a, g])
                    gaps[a, g] = max(gaps[a, g], gap)
    out = {}
    for a in keys:
        label = sweep.label if a is None else replace(sweep, alpha=a).label
        rows = [{
            "family": label,
            "gamma": tuple(int(x) for x in g),
            "sup": sups[a, g],
            "level": level,
            "n_lambda": sweep.n_lambda,
            "n_xi": sweep.n_xi,
            "k_max": sweep.k_max,
            "richardson_gap": gaps[a, g],
        } for g in gammas]
        out[label] = SweepResult(label, rows)
    return out


def michlin_sweep(sweep, level=0):
    """Per-gamma sups of the weighted derivative/difference terms."""
    return next(iter(michlin_family(sweep, level=level).values()))


def all_alphas(n):
    """Multi-indices of length ``n`` with ``|alpha| <= 2``."""
    return [a for a in product(range(3), repeat=n) if sum(a) <= 2]


def stability_ratios(base, fine):
    """Per-gamma ``max / min`` of two sweeps of the same family."""
    ratios = {}
    for g, s0 in base.sups.items():
        s1 = fine.sups[g]
        lo, hi = min(s0, s1), max(s0, s1)
        ratios[g] = hi / lo if lo > 0 else (1.0 if hi == 0 else np.inf)
    return ratios


def sweep_stability(sweep, alphas=None):
    """Base and doubled sweeps; returns ``{label: (base, fine, ratios)}``."""
    base = michlin_family(sweep, alphas, level=0)
    fine = michlin_family(sweep.doubled(), alphas, level=1)
    return {k: (base[k], fine[k], stability_ratios(base[k], fine[k])) for k in base}


# ---------------------------------------------------------------------------
# Rademacher averages
# ---------------------------------------------------------------------------

def rademacher(seed, n_draws, n):
    """``n_draws x n`` random signs from a Philox stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.integers(0, 2, size=(n_draws, n), dtype=np.int8).astype(float) * 2.0 - 1.0


def rademacher_norm(vectors, signs, p):
    """``(E || sum_j eps_j y_j ||^p)^(1/p)`` averaged over the rows of ``signs``."""
    sums = signs @ np.asarray(vectors)
    norms = np.linalg.norm(sums, axis=-1)
    return float(np.mean(norms ** p) ** (1.0 / p))


@dataclass
class RBoundSample:
    operators: np.ndarray
    vectors: np.ndarray
    n_draws: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.operators = np.asarray(self.operators, dtype=complex)
        self.vectors = np.asarray(self.vectors, dtype=complex)
        if self.operators.ndim != 3 or self.operators.shape[0] < 1:
            raise ValueError("operators must have shape (N, d, d) with N >= 1")
        if self.vectors.shape != self.operators.shape[:2]:
            raise ValueError("vectors must have shape (N, d)")
        if self.n_draws < 100:
            raise ValueError("n_draws must be at least 100")

    @property
    def N(self):
        return self.operators.shape[0]


@dataclass
class RBoundResult:
    ratio: float
    numerator: float
    denominator: float
    N: int
    p: float
    n_draws: int
    seed: int
    exact: bool

    def to_dict(self):
        return {k: (float(v) if isinstance(v, float) else v) for k, v in self.__dict__.items()}


def rbound_estimate(sample, p=2.0):
    """Ratio of Rademacher averages, a lower estimate of the family's R-bound."""
    images = np.einsum("nij,nj->ni", sample.operators, sample.vectors)
    if sample.N == 1:
        den = float(np.linalg.norm(sample.vectors[0]))
        if den < 1e-14:
            raise DegenerateDenominator("vector has vanishing norm")
        num = float(np.linalg.norm(images[0]))
        return RBoundResult(num / den, num, den, 1, p, 0, sample.seed, True)
    signs = rademacher(sample.seed, sample.n_draws, sample.N)
    den = rademacher_norm(sample.vectors, signs, p)
    if den < 1e-14:
        raise DegenerateDenominator("Rademacher average of the vectors vanishes")
    num = rademacher_norm(images, signs, p)
    return RBoundResult(num / den, num, den, sample.N, p, sample.n_draws, sample.seed, False)


def resolvent_family(lams, s_values):
    """Operators ``lam_j (lam_j + s_j M)^-1``; shape (N, 3, 3)."""
    lams = np.asarray(lams, dtype=complex)
    R, bad = _resolvent_s(lams, np.asarray(s_values, dtype=float))
    if np.any(bad):
        raise NonFiniteValue("resolvent family touches the spectrum")
    return lams[:, None, None] * R


def family_estimate(operators, n_configs=8, p=2.0, n_draws=1000, seed=0):
    """Sup over random vector choices of the Rademacher ratio, per family prefix.

    Returns an array ``est`` with ``est[n-1]`` the estimate for the first
    ``n`` operators.  Vector choices that vanish beyond the first ``m``
    operators are admissible for every larger prefix, so the estimate is a
    running maximum and never decreases as the family grows.  Signs and
    vectors are drawn once for the largest family and shared.
    """
    ops = np.asarray(operators, dtype=complex)
    N, d, _ = ops.shape
    rng = np.random.Generator(np.random.Philox(seed))
    vecs = rng.standard_normal((n_configs, N, d)) + 1j * rng.standard_normal((n_configs, N, d))
    signs = rademacher(seed + 1, n_draws, N)
    est = np.empty(N)
    best = 0.0
    for n in range(1, N + 1):
        for c in range(n_configs):
            x = vecs[c, :n]
            y = np.einsum("nij,nj->ni", ops[:n], x)
            den = rademacher_norm(x, signs[:, :n], p)
            if den < 1e-14:
                continue
            best = max(best, rademacher_norm(y, signs[:, :n], p) / den)
        est[n - 1] = best
    return est


def kahane_check(a, b, x, p=2.0, n_draws=1000, seed=0, slack=1.05):
    """Contraction ``||sum a_j eps_j x_j|| <= 2 ||sum b_j eps_j x_j||`` on sampled signs.

    Returns ``(holds, lhs / rhs)``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if a.shape != b.shape or x.shape[0] != a.size:
        raise ValueError("a, b and x must describe the same number of terms")
    if np.any(np.abs(a) > np.abs(b)):
        raise PreconditionViolated("need |a_j| <= |b_j| for every j")
    if not np.any(b):
        raise PreconditionViolated("b must not vanish identically")
    signs = rademacher(seed, n_draws, a.size)
    rhs = rademacher_norm(b[:, None] * x, signs, p)
    if rhs < 1e-14:
        raise DegenerateDenominator("right-hand Rademacher average vanishes")
    lhs = rademacher_norm(a[:, None] * x, signs, p)
    ratio = lhs / rhs
    return bool(ratio <= 2.0 * slack), float(ratio)
