"""Config-driven experiment runner and analysis tables.

``qpelab run config.json`` executes a tau sweep of one estimation
algorithm over one model, post-processes each point with the configured
estimator, fits the circular regression, and writes a JSON record plus
plot-ready CSV tables.  ``qpelab analyze`` emits the standalone sweeps
(estimator error curves, sampling dispersion, Trotter error scaling).

Exit codes: 0 success, 2 configuration error, 3 resource limit.
All randomness derives from the config seed (overridable via the
QPELAB_SEED environment variable); re-running a config reproduces its
output files byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import circstats, fitting, models, qpe
from .statevec import ResourceLimitError, substream


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


_ALGORITHMS = ("pea", "ipea-exhaustive", "ipea-nonexhaustive")
_ESTIMATORS = ("majority", "mean_direction", "mean_direction_inverted")

_MODEL_BUILDERS = {
    "zeeman": (("omega",), models.zeeman),
    "ising": (("w1", "w2", "wj"), models.ising),
    "hubbard_compact": (("t", "u"), models.hubbard_compact),
    "hubbard_jw": (("t", "u"), models.hubbard_jw),
}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config field {key!r}")
    return cfg[key]


def build_model(spec) -> models.PauliTermSum:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("model must be an object with 'name' and 'params'")
    name = spec["name"]
    if name not in _MODEL_BUILDERS:
        raise ConfigError(f"unknown model {name!r}")
    wanted, builder = _MODEL_BUILDERS[name]
    params = spec.get("params", {})
    if set(params) != set(wanted):
        raise ConfigError(f"model {name!r} needs parameters {wanted}")
    return builder(**{k: float(params[k]) for k in wanted})


def tau_grid(spec) -> np.ndarray:
    """Either an inclusive [start, stop] grid or a symmetric open |tau| < abs_max one."""
    if not isinstance(spec, dict):
        raise ConfigError("tau must be an object")
    count = int(spec.get("count", 0))
    if count < 1:
        raise ConfigError("tau.count must be >= 1")
    if "abs_max" in spec:
        if not spec.get("symmetric", False):
            raise ConfigError("tau.abs_max requires symmetric = true")
        amax = float(spec["abs_max"])
        if amax <= 0:
            raise ConfigError("tau.abs_max must be positive")
        step = 2 * amax / count
        return -amax + (np.arange(count) + 0.5) * step
    if "start" not in spec or "stop" not in spec:
        raise ConfigError("tau needs either start/stop or abs_max/symmetric")
    start, stop = float(spec["start"]), float(spec["stop"])
    if stop <= start:
        raise ConfigError("tau.stop must exceed tau.start")
    return np.linspace(start, stop, count)


def build_plan(spec, h: models.PauliTermSum):
    if spec == "exact":
        if not models.all_terms_commute(h):
            raise ConfigError("trotter='exact' needs mutually commuting terms")
        return "exact"
    if isinstance(spec, dict):
        order = int(spec.get("order", 0))
        n = int(spec.get("n", 0))
        if order not in (1, 2) or n < 1:
            raise ConfigError("trotter needs order in {1,2} and n >= 1")
        return models.TrotterPlan.split_commuting(h, order, n)
    raise ConfigError("trotter must be 'exact' or {order, n}")


def validate_config(cfg: dict) -> dict:
    h = build_model(_require(cfg, "model"))
    algorithm = _require(cfg, "algorithm")
    if algorithm not in _ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {_ALGORITHMS}")
    estimator = _require(cfg, "estimator")
    if estimator not in _ESTIMATORS:
        raise ConfigError(f"estimator must be one of {_ESTIMATORS}")
    if estimator.startswith("mean_direction") and algorithm == "ipea-nonexhaustive":
        raise ConfigError(
            "the mean-direction estimator needs the full readout distribution; "
            "use algorithm 'pea' or 'ipea-exhaustive'"
        )
    R = int(_require(cfg, "R"))
    if R < 1:
        raise ConfigError("R must be >= 1")
    shots = int(_require(cfg, "shots"))
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    n_needed = h.n_qubits + (R if algorithm == "pea" else 1)
    if n_needed > 14:
        raise ResourceLimitError(f"{n_needed} qubits needed, cap is 14")
    taus = tau_grid(_require(cfg, "tau"))
    plan = build_plan(cfg.get("trotter", "exact"), h)
    fit_spec = cfg.get("fit", {})
    fit_kind = fit_spec.get("model", "linear")
    if fit_kind not in ("linear", "mu_wrapped"):
        raise ConfigError("fit.model must be 'linear' or 'mu_wrapped'")
    if fit_kind == "mu_wrapped" and R < 2:
        raise ConfigError("fit.model 'mu_wrapped' requires R >= 2")
    states = _require(cfg, "initial_state")
    if not isinstance(states, list) or states and isinstance(states[0], (int, float)):
        states = [states]
    for s in states:
        try:
            qpe.resolve_initial_state(h, s if not isinstance(s, list) else np.asarray(s))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad initial_state {s!r}: {exc}") from exc
    seed = cfg.get("seed", 0)
    if os.environ.get("QPELAB_SEED"):
        seed = int(os.environ["QPELAB_SEED"])
    return {
        "h": h,
        "algorithm": algorithm,
        "estimator": estimator,
        "R": R,
        "shots": shots,
        "taus": taus,
        "plan": plan,
        "fit_kind": fit_kind,
        "fit_tau_max": fit_spec.get("tau_max"),
        "slope_window": fit_spec.get("slope_window"),
        "states": states,
        "seed": int(seed),
    }


def _state_label(spec, index: int) -> str:
    if isinstance(spec, str):
        return spec
    return f"custom{index}"


def _run_point(args):
    """One tau point; top-level so process pools can dispatch it."""
    h, algorithm, estimator, state_spec, tau, R, plan, shots, seed, run_idx, idx = args
    rng = substream(seed, run_idx, idx)
    state = qpe.resolve_initial_state(
        h, state_spec if not isinstance(state_spec, list) else np.asarray(state_spec)
    )
    if algorithm == "ipea-nonexhaustive":
        string, tree = qpe.run_ipea_nonexhaustive(h, state, tau, R, plan, shots, rng)
        lpmf = qpe.lpmf_reconstruct(tree)
        moment = circstats.sample_moment(lpmf)
        sigma = 0.0 if moment.rho >= 1 - 1e-15 else circstats.circular_std(moment.rho)
        counts = {
            "estimate": string,
            "iterations": [[rec.k, rec.f0, rec.bit] for rec in tree.levels],
        }
        value = int(string, 2) / 2**R
    else:
        if algorithm == "pea":
            sample = qpe.run_pea(h, state, tau, R, plan, shots, rng)
        else:
            sample = qpe.run_ipea_exhaustive(h, state, tau, R, plan, shots, rng)
        est = circstats.estimate(sample, estimator)
        value, sigma, counts = est.value, est.sigma, sample.counts
    return {"index": idx, "tau": float(tau), "estimate": float(value), "sigma": float(sigma), "counts": counts}


def run_experiment(cfg: dict, jobs: int = 1) -> dict:
    """Execute a validated (or raw) config and return the experiment record."""
    norm = validate_config(cfg)
    h, taus, R = norm["h"], norm["taus"], norm["R"]
    runs = []
    for run_idx, state_spec in enumerate(norm["states"]):
        tasks = [
            (
                h,
                norm["algorithm"],
                norm["estimator"],
                state_spec,
                float(taus[i]),
                R,
                norm["plan"],
                norm["shots"],
                norm["seed"],
                run_idx,
                i,
            )
            for i in range(len(taus))
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                points = list(pool.map(_run_point, tasks, chunksize=8))
        else:
            points = [_run_point(t) for t in tasks]
        points.sort(key=lambda p: p["index"])

        shift = h.constant_shift()
        fit_row = _fit_points(points, norm, h)
        runs.append(
            {
                "initial_state": _state_label(state_spec, run_idx),
                "energy_shift": shift,
                "points": points,
                "fit": fit_row,
                "energy_estimate": fit_row["eps_hat"] + shift,
                "energy_error": fit_row["d_eps"],
            }
        )
    return {"config": cfg, "seed_used": norm["seed"], "runs": runs}


def _fit_points(points, norm, h) -> dict:
    tau = np.array([p["tau"] for p in points])
    phi = np.array([p["estimate"] for p in points])
    sigma = np.array([p["sigma"] for p in points])
    if norm["fit_tau_max"] is not None:
        keep = np.abs(tau) < float(norm["fit_tau_max"])
        tau, phi, sigma = tau[keep], phi[keep], sigma[keep]
    # point-mass samples carry the readout grid's quantization noise
    floor = 2.0 ** -norm["R"] / np.sqrt(12.0)
    sigma = np.where(sigma <= 0.0, floor, sigma)
    window = norm["slope_window"]
    if window is None:
        bound = h.spectral_bound() / (2 * np.pi) * 1.15 + 0.02
        spacings = np.diff(np.sort(tau))
        nyquist = 0.5 / float(np.min(spacings[spacings > 0]))
        bound = min(bound, nyquist)
        window = (-bound, bound)
    model = fitting.FitModel(norm["fit_kind"], norm["R"])
    res = fitting.fit(tau, phi, sigma, model, slope_window=tuple(window))
    return {
        "model": norm["fit_kind"],
        "m": res.m,
        "dm": res.dm,
        "b": res.b,
        "db": res.db,
        "chi2_per_ndf": res.chi2_per_ndf,
        "eps_hat": res.eps_hat,
        "d_eps": res.d_eps,
        "n_points": res.n_points,
    }


def write_outputs(record: dict, out_dir: str) -> None:
    """Write record.json, one points CSV per run, and the fits table."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "record.json"), "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for run in record["runs"]:
        path = os.path.join(out_dir, f"points_{run['initial_state']}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "estimate", "sigma", "counts_json"])
            for p in run["points"]:
                writer.writerow(
                    [repr(p["tau"]), repr(p["estimate"]), repr(p["sigma"]),
                     json.dumps(p["counts"], sort_keys=True)]
                )
    with open(os.path.join(out_dir, "fits.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["initial_state", "m", "dm", "b", "db", "chi2_per_ndf",
             "eps_hat", "d_eps", "energy_shift", "energy_estimate", "energy_error", "n_points"]
        )
        for run in record["runs"]:
            f = run["fit"]
            writer.writerow(
                [run["initial_state"], repr(f["m"]), repr(f["dm"]), repr(f["b"]),
                 repr(f["db"]), repr(f["chi2_per_ndf"]), repr(f["eps_hat"]),
                 repr(f["d_eps"]), repr(run["energy_shift"]),
                 repr(run["energy_estimate"]), repr(run["energy_error"]), f["n_points"]]
            )


def _table_writer(out_path):
    if out_path in (None, "-"):
        return sys.stdout, False
    return open(out_path, "w", newline=""), True


def analyze_error_curves(args) -> int:
    fh, close = _table_writer(args.out)
    writer = csv.writer(fh)
    writer.writerow(["R", "phi", "majority_error", "mean_direction_error"])
    for R in range(args.r_min, args.r_max + 1):
        maj = circstats.error_curves(R, "majority", args.density)
        avg = circstats.error_curves(R, "mean_direction", args.density)
        for (phi, e_maj), (_, e_avg) in zip(maj, avg):
            writer.writerow([R, repr(float(phi)), repr(float(e_maj)), repr(float(e_avg))])
    if close:
        fh.close()
    return 0


def dispersion_table(r_values, o_values, samples, seed, phi=None):
    """sigma of the sample mean direction vs observation count, per resolution.

    Each row is (R, O, total propagator executions, sigma_mu_hat) where the
    dispersion is the circular std of `samples` independent sample means
    drawn at the maximally dispersive phase (the grid midpoint) unless an
    explicit phi is given.
    """
    rows = []
    slopes = {}
    for R in r_values:
        phi_r = (0.5**(R + 1)) if phi is None else phi
        parent = qpe.analytic_pmf(phi_r, R).p
        grid = np.exp(2j * np.pi * np.arange(2**R) / 2**R)
        sigs = []
        for j, O in enumerate(o_values):
            rng = substream(seed, R, j)
            counts = rng.multinomial(int(O), parent, size=int(samples))
            mus = (np.angle(counts.astype(float) @ grid) / (2 * np.pi)) % 1.0
            rho = abs(np.mean(np.exp(2j * np.pi * mus)))
            sig = circstats.circular_std(min(rho, 1.0))
            sigs.append(sig)
            rows.append((R, int(O), int(O) * qpe.resource_count(R), sig))
        coef = np.polyfit(np.log(np.asarray(o_values, float)), np.log(sigs), 1)
        slopes[R] = float(coef[0])
    return rows, slopes


def analyze_dispersion(args) -> int:
    rows, slopes = dispersion_table(
        args.resolution, args.observations, args.samples, args.seed, args.phi
    )
    fh, close = _table_writer(args.out)
    writer = csv.writer(fh)
    writer.writerow(["R", "O", "total_executions", "sigma_mu_hat"])
    for R, O, total, sig in rows:
        writer.writerow([R, O, total, repr(sig)])
    if close:
        fh.close()
    for R, slope in slopes.items():
        print(f"R={R}: log-log slope of sigma vs O = {slope:.4f}", file=sys.stderr)
    return 0


def analyze_trotter_error(args) -> int:
    h = models.hubbard_compact(args.hopping, args.interaction)
    taus = np.geomspace(args.tau_min, args.tau_max, args.points)
    fh, close = _table_writer(args.out)
    writer = csv.writer(fh)
    writer.writerow(["order", "tau", "error_norm"])
    for order in args.order:
        plan = models.TrotterPlan.split_commuting(h, order, args.trotter_n)
        errs = [models.trotter_error_norm(h, t, plan) for t in taus]
        for t, e in zip(taus, errs):
            writer.writerow([order, repr(float(t)), repr(float(e))])
        slope = float(np.polyfit(np.log(taus), np.log(errs), 1)[0])
        print(f"order={order}: log-log slope of error vs tau = {slope:.4f}", file=sys.stderr)
    if close:
        fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute a config-driven tau sweep")
    runp.add_argument("config", help="path to the experiment JSON config")
    runp.add_argument("--out", default="qpelab_out", help="output directory")
    runp.add_argument("--jobs", type=int, default=1, help="parallel tau-point workers")

    ana = sub.add_parser("analyze", help="emit analysis tables")
    asub = ana.add_subparsers(dest="subcommand", required=True)

    ec = asub.add_parser("error-curves", help="estimator accuracy error sweeps")
    ec.add_argument("--r-min", type=int, default=2)
    ec.add_argument("--r-max", type=int, default=6)
    ec.add_argument("--density", type=int, default=1000)
    ec.add_argument("--out", default=None)

    disp = asub.add_parser("dispersion", help="sample mean-direction dispersion vs O")
    disp.add_argument("--resolution", "-R", type=int, nargs="+", default=[3, 4, 5, 6])
    disp.add_argument(
        "--observations", type=int, nargs="+", default=[128, 256, 512, 1024, 2048, 4096]
    )
    disp.add_argument("--samples", type=int, default=10_000)
    disp.add_argument("--phi", type=float, default=None)
    disp.add_argument("--seed", type=int, default=0)
    disp.add_argument("--out", default=None)

    trot = asub.add_parser("trotter-error", help="product-formula error vs tau")
    trot.add_argument("--order", type=int, nargs="+", default=[1, 2])
    trot.add_argument("--hopping", type=float, default=0.35)
    trot.add_argument("--interaction", type=float, default=0.2)
    trot.add_argument("--trotter-n", type=int, default=1)
    trot.add_argument("--tau-min", type=float, default=1e-3)
    trot.add_argument("--tau-max", type=float, default=1e-1)
    trot.add_argument("--points", type=int, default=9)
    trot.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            record = run_experiment(load_config(args.config), jobs=args.jobs)
            write_outputs(record, args.out)
            for run in record["runs"]:
                print(
                    f"{run['initial_state']}: m={run['fit']['m']:.5f}"
                    f"+-{run['fit']['dm']:.5f}  energy={run['energy_estimate']:.5f}"
                    f"+-{run['energy_error']:.5f}  chi2/ndf={run['fit']['chi2_per_ndf']:.3f}"
                )
            return 0
        if args.subcommand == "error-curves":
            return analyze_error_curves(args)
        if args.subcommand == "dispersion":
            return analyze_dispersion(args)
        return analyze_trotter_error(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
