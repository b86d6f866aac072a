"""Executable acceptance suite.

Each check is a function ``ctx -> (passed, measured)`` registered with a
number, a short name and a runtime budget in seconds.  ``run_suite`` runs
them in order; ``CriterionResult.to_dict`` omits wall-clock time so that
serialized results are reproducible byte for byte.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .backtransform import residual_from_trajectory
from .errors import NoConvergence
from .extension import ReflectionPlan, fourier_to_sine, sine_to_fourier
from .grid import SINE, Direction, DomainSpec
from .linear import (
    TimeGrid,
    apply_A,
    apply_resolvent,
    decay_rate,
    dissipation_residual,
    max_reg_ratio,
    propagate_mode,
    smoothing_constant,
    solve_linear,
    solve_to_steady_state,
    steady_state,
    trace_norm_proxy,
)
from .multiplier import (
    H_F,
    MichlinSweep,
    RBoundSample,
    all_alphas,
    family_estimate,
    kahane_check,
    rbound_estimate,
    resolvent_family,
    sweep_stability,
)
from .nonlinear import (
    NonlinearConfig,
    analyticity_proxy,
    energy_report,
    phi,
    picard_solve,
    smallness_threshold,
)
from .symbol import (
    COUPLING_MATRIX,
    TEST_FUNCTIONS,
    ContourSpec,
    characteristic_polynomial,
    eigen_decompose_M,
    holomorphic_calculus_s,
    kappa,
    matrix_function_oracle,
    spectral_angle,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    budget: float
    elapsed: float = 0.0
    error: str | None = None

    @property
    def within_budget(self):
        return self.elapsed <= self.budget

    def to_dict(self):
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "measured": self.measured, "budget_seconds": self.budget, "error": self.error}

    def line(self, timing=True):
        flag = "PASS" if self.passed else "FAIL"
        text = f"[{flag}] {self.number:2d} {self.name}"
        if timing:
            text += f"  ({self.elapsed:.1f}s / {self.budget:g}s)"
        if self.error:
            text += f"  error: {self.error}"
        return text


@dataclass
class Context:
    seed: int = 0
    cache: dict = field(default_factory=dict)

    def rng(self, offset):
        return np.random.default_rng([self.seed, offset])

    def memo(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]


CRITERIA = []


def criterion(number, name, budget):
    def register(fn):
        CRITERIA.append((number, name, budget, fn))
        return fn
    return register


def _order(coarse, fine):
    return float(np.log2(coarse / fine))


def _smooth(domain, rng, amp, decay):
    return amp * rng.standard_normal((3,) + domain.shape) * np.exp(-decay * np.sqrt(domain.zeta_sq))


# ---------------------------------------------------------------------------

@criterion(1, "sector angle", 1)
def sector_angle(ctx):
    coeffs = characteristic_polynomial()
    lam = eigen_decompose_M().values
    real = lam[np.abs(lam.imag) < 1e-12].real
    pair = lam[np.abs(lam.imag) >= 1e-12]
    angle = spectral_angle()
    margin = np.pi / 2 - angle
    ok = (list(coeffs) == [1.0, -1.0, 2.0, -1.0] and real.size == 1 and pair.size == 2
          and 0.56 <= real[0] <= 0.58 and bool(np.all((0.21 <= pair.real) & (pair.real <= 0.22)))
          and margin > 0.1)
    return ok, {"real_root": float(real[0]), "pair_real_part": float(pair.real[0]),
                "spectral_angle": float(angle), "margin": float(margin)}


@criterion(2, "quasi-homogeneity of kappa", 1)
def quasi_homogeneity(ctx):
    rng = ctx.rng(2)
    phi_max = np.pi - (spectral_angle() + 0.05)
    lams = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), 100)) * np.exp(1j * rng.uniform(-phi_max, phi_max, 100))
    zetas = rng.uniform(-3, 3, (100, 2))
    worst = 0.0
    for lam, z in zip(lams, zetas):
        for alpha in all_alphas(2):
            base = kappa(lam, z, alpha)
            for r in (2.0, 10.0):
                worst = max(worst, float(np.abs(kappa(r * r * lam, r * z, alpha) - base).max()))
    return worst <= 1e-10, {"max_abs_error": worst, "points": 100}


@criterion(3, "holomorphic calculus", 10)
def holomorphic(ctx):
    s = np.logspace(-2, 2, 20)
    rel = {}
    shrinks = {}
    for f in TEST_FUNCTIONS:
        ref = np.array([matrix_function_oracle(f, [np.sqrt(x)]) for x in s])
        h = holomorphic_calculus_s(f, s)
        rel[f.name] = float(np.max(np.abs(h - ref).max(axis=(1, 2)) / np.abs(ref).max(axis=(1, 2))))
        errs = []
        for n in (96, 192):
            spec = ContourSpec(adaptive=False, n_nodes=n, r_min=1e-8, r_max=1e8)
            errs.append(float(np.abs(holomorphic_calculus_s(f, s, spec) - ref).max()))
        shrinks[f.name] = errs
    ok = max(rel.values()) <= 1e-6 and all(e[1] < e[0] for e in shrinks.values())
    return ok, {"max_rel_error": rel, "fixed_node_errors_96_192": shrinks}


@criterion(4, "propagator exactness", 5)
def propagator(ctx):
    rng = ctx.rng(4)
    worst = 0.0
    for _ in range(1000):
        u0 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        z = rng.uniform(-3, 3, 2)
        t = rng.uniform(0, 2)
        ref = expm(-t * (z @ z) * COUPLING_MATRIX) @ u0
        worst = max(worst, float(np.linalg.norm(propagate_mode(u0, z, t) - ref) / np.linalg.norm(ref)))
    return worst <= 1e-10, {"max_rel_error": worst, "samples": 1000}


@criterion(5, "extension equivalence", 10)
def extension(ctx):
    box = DomainSpec([Direction(SINE, np.pi, 32), Direction(SINE, np.pi, 32)])
    plan = ReflectionPlan.all_dirichlet(box)
    F = box.forward(ctx.rng(5).standard_normal((3,) + box.shape))
    worst = 0.0
    for lam in (1.0, 0.4 + 0.3j, -0.2 + 2.0j, 30.0 * np.exp(2.5j)):
        direct = apply_resolvent(box, lam, F)
        via = fourier_to_sine(apply_resolvent(plan.target, lam, sine_to_fourier(F, plan)), plan)
        worst = max(worst, float(np.abs(direct - via).max()))
    return worst <= 1e-11, {"max_abs_error": worst}


@criterion(6, "linear dissipation", 30)
def linear_dissipation(ctx):
    d = DomainSpec.rectangular(n2=2, modes=32)
    U0 = _smooth(d, ctx.rng(6), 1.0, 2.0)
    res = {}
    monotone = True
    for n in (100, 200, 400):
        traj = solve_linear(d, U0, None, TimeGrid(1.0, n))
        res[n] = float(np.nanmax(dissipation_residual(traj)[1]))
        norms = d.l2_norm_coeffs(traj.coeffs, axis_components=-1)
        monotone &= bool(np.all(np.diff(norms) <= 1e-14 * norms[0]))
    orders = [_order(res[100], res[200]), _order(res[200], res[400])]
    ok = monotone and all(1.8 <= o <= 2.2 for o in orders)
    return ok, {"max_residual": {str(k): v for k, v in res.items()}, "observed_orders": orders,
                "norm_monotone": monotone}


@criterion(7, "maximal-regularity proxy", 120)
def max_regularity(ctx):
    small = DomainSpec.rectangular(n2=2, modes=16)
    big = DomainSpec.rectangular(n2=2, modes=32)
    grid = TimeGrid(1.0, 64)
    rng = ctx.rng(7)
    weight = 1.0 / np.sqrt(small.zeta_sq)
    wave = np.cos(2 * np.pi * grid.times)[:, None, None, None]
    worst, sups = 0.0, {}
    for p in (2.0, 4.0):
        sup16 = sup32 = 0.0
        for _ in range(100):
            a0, a1 = (rng.standard_normal((3,) + small.shape) * weight for _ in range(2))
            F16 = a0 + wave * a1
            F32 = np.stack([small.pad(F16[n], big) for n in range(grid.n_steps + 1)])
            r16 = max_reg_ratio(small, F16, p, grid)
            r32 = max_reg_ratio(big, F32, p, grid)
            worst = max(worst, abs(r32 - r16) / r16)
            sup16, sup32 = max(sup16, r16), max(sup32, r32)
        sups[f"p={p:g}"] = [sup16, sup32]
    return worst < 0.5, {"max_relative_change": worst, "sup_ratio_16_32": sups, "forcings": 100}


@criterion(8, "steady state", 10)
def steady(ctx):
    d = DomainSpec.rectangular(n2=2, modes=8)
    F = np.zeros((3,) + d.shape)
    F[:, 0, 0] = [1.0, 0.5, -0.3]
    Uinf = steady_state(d, F)
    traj = solve_to_steady_state(d, np.zeros_like(F), F, dt=0.01, t_max=200.0)
    dist = d.l2_norm_coeffs(traj.coeffs - Uinf, axis_components=-1)
    keep = dist > 1e-9
    rate = decay_rate(traj.times[keep], dist[keep])
    predicted = float(d.zeta_sq[0, 0] * eigen_decompose_M().values.real.min())
    final = float(np.abs(traj.coeffs[-1] - Uinf).max())
    ok = traj.meta["converged"] and final < 1e-9 and abs(rate - predicted) <= 0.1 * predicted
    return ok, {"measured_rate": rate, "predicted_rate": predicted, "final_error": final}


def _manufactured(n):
    d = DomainSpec.rectangular(n2=1, modes=16)
    rate = float(eigen_decompose_M().values.real.min())
    c = np.array([0.4, -1.0, 0.7])
    g = TimeGrid(1.0, n)
    Ue = np.zeros((n + 1, 3) + d.shape)
    Ue[:, :, 0] = np.exp(-rate * g.times)[:, None] * c
    G = -rate * Ue + apply_A(d, Ue) - phi(d, Ue, 1.0)
    traj, _ = picard_solve(d, Ue[0], NonlinearConfig(a=1.0), g, forcing=G)
    return float(np.abs(traj.coeffs - Ue).max())


@criterion(9, "nonlinear correctness", 60)
def nonlinear_correctness(ctx):
    line = DomainSpec([Direction(SINE, np.pi, 16)])
    U = np.zeros((3, 16))
    U[0, 0] = 1.0
    expected = np.zeros(16)
    expected[[0, 2]] = [0.75, -0.25 * 9]
    sin3 = float(np.abs(phi(line, U, 1.0)[1] - expected).max())
    errs = {n: _manufactured(n) for n in (64, 128)}
    order = _order(errs[64], errs[128])
    d = DomainSpec.rectangular(n2=2, modes=16)
    U0 = _smooth(d, ctx.rng(9), 3.0, 1.0)
    g = TimeGrid(0.5, 32)
    traj, trace = picard_solve(d, U0, NonlinearConfig(a=0.0), g)
    bit_equal = bool(np.array_equal(traj.coeffs, solve_linear(d, U0, None, g).coeffs))
    ok = sin3 <= 1e-12 and errs[128] <= 1e-6 and 1.8 <= order <= 2.2 and bit_equal and trace.iterations == 1
    return ok, {"sin3_error": sin3, "manufactured_error": {str(k): v for k, v in errs.items()},
                "observed_order": order, "a0_bit_equal": bit_equal}


@criterion(10, "contraction behavior", 120)
def contraction(ctx):
    d = DomainSpec.rectangular(n2=2, modes=16)
    profile = _smooth(d, ctx.rng(10), 1.0, 1.0)
    profile /= trace_norm_proxy(d, profile)
    cfg = NonlinearConfig(a=1.0)
    grid = TimeGrid(0.5, 64)
    dstar, scale = smallness_threshold(d, profile, cfg, grid, target=0.5, iters=25)
    small_ratios = {}
    ok = True
    for frac in (0.5, 1.0):
        traj, trace = picard_solve(d, frac * scale * profile, cfg, grid)
        tail = [r for r in trace.ratios[1:] if np.isfinite(r)]
        worst = max(tail, default=0.0)
        small_ratios[f"{frac:g}d"] = worst
        ok &= trace.converged and trace.shrinks == 0 and worst <= 0.55
    try:
        _, trace = picard_solve(d, 100 * scale * profile, cfg, grid)
    except NoConvergence as err:
        trace = err.trace
    ok &= trace.shrinks >= 1
    return ok, {"d": dstar, "amplitude": scale, "worst_ratio_after_second": small_ratios,
                "large_data_shrinks": trace.shrinks, "large_data_converged": trace.converged}


def _energy_runs(ctx):
    d = DomainSpec.rectangular(n2=2, modes=32)
    U0 = _smooth(d, ctx.rng(11), 1.0, 3.0)
    out = {}
    for n in (500, 1000):
        traj, trace = picard_solve(d, U0, NonlinearConfig(a=1.0), TimeGrid(1.0, n))
        out[n] = traj
    return out


@criterion(11, "nonlinear energy identity", 60)
def energy_identity(ctx):
    runs = ctx.memo("energy_runs", lambda: _energy_runs(ctx))
    res, monotone = {}, True
    for n, traj in runs.items():
        rep = energy_report(traj, 1.0)
        res[n] = float(np.nanmax(rep.residual))
        monotone &= bool(np.all(np.diff(rep.energy) <= 1e-14 * rep.energy[0]))
    order = _order(res[500], res[1000])
    ok = res[1000] <= 1e-6 and 1.8 <= order <= 2.2 and monotone
    return ok, {"max_residual": {f"dt={1 / n:g}": v for n, v in res.items()},
                "observed_order": order, "energy_nonincreasing": monotone}


@criterion(12, "original-system residuals", 60)
def original_residuals(ctx):
    runs = ctx.memo("energy_runs", lambda: _energy_runs(ctx))
    res = {n: residual_from_trajectory(traj, a=1.0).interior_max() for n, traj in runs.items()}
    orders = [_order(res[500][k], res[1000][k]) for k in range(2)]
    ok = max(res[1000]) <= 1e-6 and all(1.8 <= o <= 2.2 for o in orders)
    return ok, {"r1": {f"dt={1 / n:g}": v[0] for n, v in res.items()},
                "r2": {f"dt={1 / n:g}": v[1] for n, v in res.items()}, "observed_orders": orders}


@criterion(13, "Michlin sweep stability", 120)
def michlin(ctx):
    ratios = {}
    for sweep, alphas in ((MichlinSweep(), all_alphas(2)), (MichlinSweep(family=H_F), None)):
        for label, (_, _, r) in sweep_stability(sweep, alphas).items():
            ratios[label] = {"".join(map(str, g)): v for g, v in r.items()}
    worst = max(v for r in ratios.values() for v in r.values())
    return worst < 2.0, {"worst_ratio": worst, "ratios": ratios}


@criterion(14, "R-bound and Kahane", 60)
def rbound(ctx):
    rng = ctx.rng(14)
    T = resolvent_family([2.0 + 1.0j], [3.0])
    x = rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3))
    single = rbound_estimate(RBoundSample(T, x))
    direct = np.linalg.norm(T[0] @ x[0]) / np.linalg.norm(x[0])
    exact_error = abs(single.ratio - direct) / direct
    exact = single.exact and single.n_draws == 0 and exact_error <= 1e-14
    worst, holds = 0.0, True
    for trial in range(1000):
        n = int(rng.integers(2, 9))
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        a = b * rng.uniform(0, 1, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        ok, ratio = kahane_check(a, b, rng.standard_normal((n, 3)), seed=ctx.seed * 1000 + trial)
        holds &= ok
        worst = max(worst, ratio)
    phi_max = np.pi - (spectral_angle() + 0.05)
    lams = np.exp(rng.uniform(-3, 3, 64)) * np.exp(1j * rng.uniform(-phi_max, phi_max, 64))
    est = family_estimate(resolvent_family(lams, rng.uniform(0, 10, 64) ** 2), n_configs=4,
                          n_draws=400, seed=ctx.seed)
    monotone = bool(np.all(np.diff(est) >= 0))
    stable = bool(est[63] <= 2 * est[31])
    return exact and holds and monotone and stable, {
        "single_operator_exact": bool(exact), "single_operator_rel_error": float(exact_error),
        "kahane_worst_ratio": worst, "kahane_trials": 1000,
        "family_estimate_N8_16_32_64": [float(est[n - 1]) for n in (8, 16, 32, 64)],
        "monotone": monotone, "stable_under_doubling": stable}


@criterion(15, "analyticity proxy", 60)
def analyticity(ctx):
    d = DomainSpec.rectangular(n2=2, modes=32)
    rng = ctx.rng(15)
    U0 = rng.standard_normal((3,) + d.shape) / np.sqrt(d.zeta_sq)
    C = {f"t={t:g}": smoothing_constant(d, U0, t) for t in (0.05, 0.1, 0.5)}
    spread = max(C.values()) / min(C.values())
    white = rng.standard_normal((3,) + d.shape)
    g = TimeGrid(0.2, 40)
    lin = analyticity_proxy(solve_linear(d, white, None, g), 0.1)
    # algebraically decaying coefficients: finite smoothness, small amplitude
    traj, _ = picard_solve(d, 0.2 * white / (1 + d.zeta_sq), NonlinearConfig(a=1.0), g)
    non = analyticity_proxy(traj, 0.1)
    ok = spread <= 2.0 and lin < 0 and non < 0
    return ok, {"smoothing_constants": C, "spread": spread, "linear_slope": lin, "nonlinear_slope": non}


# ---------------------------------------------------------------------------

def run_criterion(number, ctx):
    for num, name, budget, fn in CRITERIA:
        if num == number:
            break
    else:
        raise KeyError(f"no acceptance criterion {number}")
    start = time.perf_counter()
    try:
        passed, measured = fn(ctx)
        error = None
    except Exception as err:  # a crash is reported as a failed criterion
        passed, measured, error = False, {}, f"{type(err).__name__}: {err}"
    return CriterionResult(num, name, bool(passed), measured, budget, time.perf_counter() - start, error)


def run_suite(seed=0, numbers=None, progress=None):
    ctx = Context(seed)
    out = []
    for num, *_ in CRITERIA:
        if numbers is not None and num not in numbers:
            continue
        res = run_criterion(num, ctx)
        if progress:
            progress(res)
        out.append(res)
    return out


def determinism_check(first_bytes, rerun_bytes, elapsed):
    """Criterion 16: compare two serialized runs of the suite."""
    same = first_bytes == rerun_bytes
    return CriterionResult(16, "determinism", same, {"identical_bytes": same, "size": len(first_bytes)},
                           600, elapsed)
