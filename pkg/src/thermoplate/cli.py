"""Command-line front end.

    thermoplate <subcommand> [--config PATH] [--out DIR] [--seed N] [--threads N] [--quiet]

Subcommands: symbol-report, multiplier-check, solve-linear, solve-nonlinear,
verify.  Exit status is 0 on success, 1 for invalid input or configuration
and 2 for a numerical failure (including a failed check).
"""

import argparse
import copy
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigInvalid, NumericalFailure, ThermoplateError

SUBCOMMANDS = ("symbol-report", "multiplier-check", "solve-linear", "solve-nonlinear", "verify")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _data_text(name):
    return resources.files("thermoplate").joinpath("data", name).read_text()


def default_config():
    return json.loads(_data_text("default_config.json"))


def _line_of(text, key):
    needle = json.dumps(key)
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, seed=None):
    """Defaults overlaid with the file at ``path``; raises ConfigInvalid with field diagnostics."""
    user, text = {}, ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigInvalid(f"cannot read config file {path}: {err.strerror}") from err
        try:
            user = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigInvalid(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from err
    schema = json.loads(_data_text("config.schema.json"))
    validator = jsonschema.Draft202012Validator(schema)
    problems = []
    for err in sorted(validator.iter_errors(user), key=lambda e: list(map(str, e.absolute_path))):
        field = ".".join(str(p) for p in err.absolute_path) or "<root>"
        where = ""
        if err.absolute_path and text:
            line = _line_of(text, str(err.absolute_path[-1]))
            where = f" (line {line})" if line else ""
        problems.append(f"{field}{where}: {err.message}")
    if problems:
        raise ConfigInvalid(f"{path or 'config'}: " + "; ".join(problems))
    cfg = _merge(default_config(), user)
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigInvalid("--seed must be an unsigned 64-bit integer")
        cfg["rng"]["seed"] = seed
    return cfg


# ---------------------------------------------------------------------------
# subcommands (numerical modules are imported after the thread count is set)

def _domain(cfg):
    from .grid import DomainSpec

    d = cfg["domain"]
    return DomainSpec.rectangular(d["n1"], d["n2"], d["n3"], d["modes"], d["L_r"], d["L_h"])


def _initial_data(cfg, domain):
    import numpy as np

    rng = np.random.default_rng(cfg["rng"]["seed"])
    weight = np.exp(-cfg["data"]["decay"] * np.sqrt(domain.zeta_sq))
    U0 = cfg["data"]["amplitude"] * rng.standard_normal((3,) + domain.shape) * weight
    if domain.has_fourier:
        U0 = domain.forward(domain.inverse(U0).real)
    F = None
    if cfg["data"]["forcing"]:
        F = cfg["data"]["forcing"] * rng.standard_normal((3,) + domain.shape) * weight
        if domain.has_fourier:
            F = domain.forward(domain.inverse(F).real)
    return U0, F


def _write_trajectory(path, traj, every):
    import numpy as np

    from .io import write_csv

    d = traj.domain
    complex_ = np.iscomplexobj(traj.coeffs)
    header = ["t", "component"] + [f"k{i}" for i in range(d.ndim)] + (["re", "im"] if complex_ else ["value"])
    nodes = sorted(set(range(0, len(traj.times), every)) | {len(traj.times) - 1})

    def rows():
        for n in nodes:
            for c in range(3):
                block = traj.coeffs[n, c]
                for idx in np.ndindex(block.shape):
                    v = block[idx]
                    vals = [float(v.real), float(v.imag)] if complex_ else [float(v)]
                    yield [float(traj.times[n]), c, *idx, *vals]

    write_csv(path, header, rows())


def _write_series(out, traj, a, external):
    from .backtransform import residual_from_trajectory
    from .io import write_csv
    from .nonlinear import energy_report

    rep = energy_report(traj, a)
    write_csv(out / "energy.csv", ["t", "energy", "minus_grad_theta_sq", "residual"], rep.rows())
    g = h = None
    if external is not None:
        g, h = external[:, 1], external[:, 2]
    res = residual_from_trajectory(traj, a, g, h)
    write_csv(out / "residual.csv", ["t", "r1", "r2"], res.rows())


def cmd_symbol_report(cfg, out, log):
    from .io import write_json
    from .symbol import sector_report

    report, table = sector_report()
    payload = report.to_dict()
    payload["resolvent_sweep"] = {"columns": ["re_lambda", "im_lambda", "abs_zeta_sq", "norm"],
                                  "rows": table}
    write_json(out / "sector_report.json", payload)
    log(f"spectral angle {report.spectral_angle:.6f}, margin {report.margin:.6f}, "
        f"sampled resolvent sup {report.resolvent_sup:.6g}")
    return 0


def cmd_multiplier_check(cfg, out, log):
    import numpy as np

    from .io import write_csv, write_json
    from .multiplier import (H_F, MichlinSweep, RBoundSample, all_alphas, family_estimate,
                             kahane_check, rbound_estimate, resolvent_family, sweep_stability)
    from .symbol import sector_lambdas, spectral_angle

    sw = cfg["sweep"]
    seed = cfg["rng"]["seed"]
    grid = {k: sw[k] for k in ("n1", "n2", "n_xi", "k_max", "n_radii", "n_angles")}
    families = [(MichlinSweep(**grid), all_alphas(sw["n1"] + sw["n2"]))]
    if sw["include_h_rho"]:
        families.append((MichlinSweep(family=H_F, **grid), None))
    rows, worst = [], 0.0
    for sweep, alphas in families:
        for label, (base, fine, ratios) in sweep_stability(sweep, alphas).items():
            for res in (base, fine):
                for r in res.rows:
                    g = "".join(map(str, r["gamma"]))
                    rows.append([label, g, r["level"], r["sup"], r["n_lambda"], r["n_xi"], r["k_max"],
                                 r["richardson_gap"], ratios[r["gamma"]]])
            worst = max(worst, max(ratios.values()))
    write_csv(out / "michlin_sweep.csv",
              ["family", "gamma", "level", "sup", "n_lambda", "n_xi", "k_max", "richardson_gap",
               "stability_ratio"], rows)
    log(f"Michlin sweep: worst base/doubled ratio {worst:.4f}")

    rng = np.random.default_rng([seed, 1])
    N = sw["rbound_N"]
    lams = sector_lambdas(spectral_angle() + 0.05, 16, 9)
    pick = rng.choice(lams.size, N, replace=lams.size < N)
    T = resolvent_family(lams[pick], rng.uniform(0, 10, N) ** 2)
    est = family_estimate(T, sw["rbound_configs"], 2.0, sw["rbound_draws"], seed)
    x = rng.standard_normal((N, 3)) + 1j * rng.standard_normal((N, 3))
    full = rbound_estimate(RBoundSample(T, x, sw["rbound_draws"], seed))
    single = rbound_estimate(RBoundSample(T[:1], x[:1], sw["rbound_draws"], seed))
    kahane_worst, kahane_ok = 0.0, True
    for trial in range(sw["kahane_trials"]):
        n = int(rng.integers(2, 9))
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        a = b * rng.uniform(0, 1, n)
        ok, ratio = kahane_check(a, b, rng.standard_normal((n, 3)), 2.0, sw["rbound_draws"], seed + trial)
        kahane_ok &= ok
        kahane_worst = max(kahane_worst, ratio)
    monotone = bool(np.all(np.diff(est) >= 0))
    write_json(out / "rbound.json", {
        "seed": seed,
        "p": 2.0,
        "single_operator": single.to_dict(),
        "family": full.to_dict(),
        "prefix_estimates": est,
        "prefix_monotone": monotone,
        "kahane": {"trials": sw["kahane_trials"], "worst_ratio": kahane_worst, "holds": kahane_ok},
    })
    log(f"R-bound estimate (N={N}) {full.ratio:.6g}; Kahane worst ratio {kahane_worst:.4f}")
    return 0 if worst < 2.0 and kahane_ok and monotone else 2


def cmd_solve_linear(cfg, out, log):
    from .io import write_json
    from .linear import TimeGrid, solve_linear, solve_report

    d = _domain(cfg)
    U0, F = _initial_data(cfg, d)
    grid = TimeGrid(cfg["time"]["t_end"], cfg["time"]["n_steps"])
    traj = solve_linear(d, U0, F, grid)
    _write_trajectory(out / "trajectory.csv", traj, cfg["time"]["save_every"])
    report = solve_report(traj, cfg["data"]["p"])
    write_json(out / "solve_report.json", {"domain": repr(d), **report.to_dict()})
    _write_series(out, traj, 0.0, traj.forcing)
    log(f"solved {grid.n_steps} steps on {d!r}")
    return 0


def cmd_solve_nonlinear(cfg, out, log):
    from .errors import NoConvergence
    from .io import write_json
    from .linear import TimeGrid, solve_report
    from .nonlinear import NonlinearConfig, picard_solve

    d = _domain(cfg)
    U0, F = _initial_data(cfg, d)
    grid = TimeGrid(cfg["time"]["t_end"], cfg["time"]["n_steps"])
    ncfg = NonlinearConfig(**cfg["nonlinear"])
    try:
        traj, trace = picard_solve(d, U0, ncfg, grid, forcing=F)
    except NoConvergence as err:
        if err.trace is not None:
            write_json(out / "picard_trace.json", err.trace.to_dict())
        raise
    write_json(out / "picard_trace.json", trace.to_dict())
    _write_trajectory(out / "trajectory.csv", traj, cfg["time"]["save_every"])
    report = solve_report(traj, cfg["data"]["p"])
    write_json(out / "solve_report.json", {"domain": repr(d), "a": ncfg.a, **report.to_dict()})
    _write_series(out, traj, ncfg.a, traj.meta.get("external"))
    log(f"Picard converged in {trace.iterations} iterations on window {traj.times[-1]:g} "
        f"({trace.shrinks} shrinks)")
    return 0


def cmd_verify(cfg, out, log):
    from .acceptance import determinism_check, run_suite
    from .io import dumps

    seed = cfg["rng"]["seed"]
    start = time.perf_counter()
    first = run_suite(seed, progress=lambda r: log(r.line()))
    again = run_suite(seed)
    a = dumps([r.to_dict() for r in first])
    b = dumps([r.to_dict() for r in again])
    det = determinism_check(a.encode(), b.encode(), time.perf_counter() - start)
    log(det.line())
    results = first + [det]
    (out / "acceptance.json").write_text(dumps({"seed": seed, "criteria": [r.to_dict() for r in results]}))
    passed = sum(r.passed for r in results)
    print(f"acceptance: {passed}/{len(results)} criteria passed")
    for r in results:
        print(r.line(timing=False))
    return 0 if passed == len(results) else 2


COMMANDS = {
    "symbol-report": cmd_symbol_report,
    "multiplier-check": cmd_multiplier_check,
    "solve-linear": cmd_solve_linear,
    "solve-nonlinear": cmd_solve_nonlinear,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="thermoplate", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON configuration (defaults are used for missing fields)")
    p.add_argument("--out", default="thermoplate-out", help="output directory")
    p.add_argument("--seed", type=int, help="override rng.seed")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP threads (fallback: THERMOPLATE_THREADS)")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return p


def _set_threads(n):
    if n is None:
        env = os.environ.get("THERMOPLATE_THREADS")
        n = int(env) if env and env.isdigit() else None
    if n is not None and n > 0:
        for var in _THREAD_VARS:
            os.environ[var] = str(n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)

    def log(msg):
        if not args.quiet:
            print(msg, file=sys.stderr, flush=True)

    try:
        cfg = load_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.subcommand](cfg, out, log)
    except ConfigInvalid as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (ThermoplateError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
