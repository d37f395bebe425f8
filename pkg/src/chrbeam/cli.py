"""Experiment harness: seeded Monte-Carlo sweeps and machine-readable outputs.

A run sweeps (N, U, K) over a number of trials.  Each (N, U, trial) draws
one channel set from its own seed, and every requested algorithm and every
K is evaluated on that same set, so rows are paired by their ``seed``.

Outputs written to the output directory:

* ``results.csv``   one row per (point, trial, algorithm)
* ``per_user.csv``  per-user SINRs behind each row
* ``aggregate.csv`` mean / std per (N, U, K, algorithm)
* ``manifest.json`` the fully resolved spec, package version and seeds;
  passing it back with ``--config`` reproduces the run.

Configuration files are JSON objects with flat dotted keys such as
``"scenario.M": 8``, ``"solver.T2": 1000``, ``"sweep.N": [32, 64]`` or
``"baselines.unit_circle.temperature_scale": 0.01``.  Powers are given in
dBm and converted to linear scale once, when the spec is built.
"""
import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .baselines import (ALGORITHMS as BASELINE_ALGORITHMS, EXHAUSTIVE_LIMIT, BaselineConfig,
                        run_gda, run_unit_circle, solve_exhaustive, solve_random)
from .channel import ScenarioConfig, draw_channels, make_rng, trial_seed
from .solver import SolverConfig, solve

logger = logging.getLogger(__name__)

ALGORITHMS = ("chr_apgda", "gda", "unit_circle", "random", "exhaustive")

RAW_HEADER = ["trial", "algorithm", "N", "U", "K", "M", "seed", "min_sinr_db", "runtime_ms",
              "inner_iterations", "converged_to_vertices"]
AGG_HEADER = ["N", "U", "K", "algorithm", "trials", "mean_min_sinr_db", "std_min_sinr_db",
              "mean_runtime_ms", "mean_inner_iterations", "vertex_rate"]

PRESETS = {
    "desk": {
        "scenario.M": 8,
        "sweep.N": [32, 64, 128],
        "sweep.U": [2, 4, 6],
        "sweep.K": [2, 4],
        "trials": 20,
        "algorithms": ["chr_apgda", "gda", "unit_circle", "random"],
    },
    "paper": {
        "scenario.M": 64,
        "sweep.N": [100, 200, 300, 400, 500],
        "sweep.U": [3, 6, 9, 12, 15],
        "sweep.K": [2, 4],
        "trials": 20,
        "algorithms": ["chr_apgda", "gda", "unit_circle", "random"],
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field path."""


def dbm_to_watt(dbm):
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    baselines: list = field(default_factory=lambda: [BaselineConfig(algorithm=a)
                                                     for a in BASELINE_ALGORITHMS])
    N_values: list = field(default_factory=lambda: [32])
    U_values: list = field(default_factory=lambda: [4])
    K_values: list = field(default_factory=lambda: [2])
    trials: int = 1
    algorithms: list = field(default_factory=lambda: ["chr_apgda"])
    out_dir: str = "results"
    seed: int = 0
    power_dbm: float = 30.0
    noise_dbm: float = -90.0
    # "wall": runtime_ms is measured; "off": written as 0 so that the CSVs
    # are a pure function of the spec
    timing: str = "wall"
    # linear-scale values, filled in from the dBm fields
    P: float = field(init=False)
    sigma2: float = field(init=False)

    def __post_init__(self):
        self.P = dbm_to_watt(self.power_dbm)
        self.sigma2 = dbm_to_watt(self.noise_dbm)
        for name in ("N_values", "U_values", "K_values"):
            vals = list(getattr(self, name))
            if not vals:
                raise ConfigError(f"sweep.{name[0]}: sweep axis must be nonempty")
            if any(int(v) != v or v < 1 for v in vals):
                raise ConfigError(f"sweep.{name[0]}: values must be positive integers")
            setattr(self, name, [int(v) for v in vals])
        if any(k < 2 for k in self.K_values):
            raise ConfigError("sweep.K: K must be >= 2")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if not self.algorithms:
            raise ConfigError("algorithms: at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"algorithms: unknown algorithm {a!r} (choose from {ALGORITHMS})")
        if self.timing not in ("wall", "off"):
            raise ConfigError("timing: must be 'wall' or 'off'")
        if self.scenario.irs_shape is not None and self.N_values != [self.scenario.N]:
            raise ConfigError("scenario.irs_shape: a fixed panel shape needs sweep.N = [scenario.N]")
        if "exhaustive" in self.algorithms:
            for K in self.K_values:
                for N in self.N_values:
                    if K ** N > EXHAUSTIVE_LIMIT:
                        raise ConfigError(f"algorithms: exhaustive needs K**N <= 2**20, "
                                          f"got K={K}, N={N}")

    def baseline(self, algorithm):
        for b in self.baselines:
            if b.algorithm == algorithm:
                return b
        return BaselineConfig(algorithm=algorithm)

    def to_flat(self):
        """Flat dotted-key dict; :func:`spec_from_flat` inverts it."""
        flat = {}
        for k, v in self.scenario.to_dict().items():
            flat[f"scenario.{k}"] = v
        for k, v in self.solver.to_dict().items():
            flat[f"solver.{k}"] = v
        for b in self.baselines:
            for k, v in b.to_dict().items():
                if k != "algorithm":
                    flat[f"baselines.{b.algorithm}.{k}"] = v
        flat.update({"sweep.N": self.N_values, "sweep.U": self.U_values,
                     "sweep.K": self.K_values, "trials": self.trials,
                     "algorithms": list(self.algorithms), "out_dir": self.out_dir,
                     "seed": self.seed, "power_dbm": self.power_dbm,
                     "noise_dbm": self.noise_dbm, "timing": self.timing})
        return _jsonable(flat)


@dataclass
class ResultRow:
    trial: int
    algorithm: str
    N: int
    U: int
    K: int
    M: int
    seed: int
    min_sinr_db: float
    per_user_sinr_db: tuple
    runtime_ms: float
    inner_iterations: int
    converged_to_vertices: bool

    def csv_fields(self):
        return [self.trial, self.algorithm, self.N, self.U, self.K, self.M, self.seed,
                _fmt(self.min_sinr_db), _fmt(self.runtime_ms), self.inner_iterations,
                str(bool(self.converged_to_vertices)).lower()]


def _fmt(v):
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_TOP_KEYS = {"trials": "trials", "algorithms": "algorithms", "out_dir": "out_dir",
             "seed": "seed", "power_dbm": "power_dbm", "noise_dbm": "noise_dbm",
             "timing": "timing"}
_SWEEP_KEYS = {"sweep.N": "N_values", "sweep.U": "U_values", "sweep.K": "K_values"}


def _coerce(path, value, default):
    """Cast a config value to the type of the field default."""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
        if isinstance(default, tuple):
            return tuple(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}") from None
    return value


def _build(cls, path, values, **fixed):
    names = {f.name: f for f in fields(cls) if f.init}
    defaults = cls(**fixed)
    kw = dict(fixed)
    for k, v in values.items():
        if k not in names or k in fixed:
            raise ConfigError(f"{path}.{k}: unknown field")
        kw[k] = _coerce(f"{path}.{k}", v, getattr(defaults, k))
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def spec_from_flat(flat):
    """Build an :class:`ExperimentSpec` from a flat dotted-key mapping."""
    groups = {"scenario": {}, "solver": {}}
    base = {}
    top = {}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if key in _TOP_KEYS:
            top[_TOP_KEYS[key]] = value
        elif key in _SWEEP_KEYS:
            if not isinstance(value, (list, tuple)):
                value = [value]
            top[_SWEEP_KEYS[key]] = list(value)
        elif head in groups and rest:
            groups[head][rest] = value
        elif head == "baselines" and "." in rest:
            alg, _, name = rest.partition(".")
            if alg not in BASELINE_ALGORITHMS:
                raise ConfigError(f"{key}: unknown baseline {alg!r}")
            base.setdefault(alg, {})[name] = value
        else:
            raise ConfigError(f"{key}: unknown field")
    scenario = _build(ScenarioConfig, "scenario", groups["scenario"])
    solver = _build(SolverConfig, "solver", groups["solver"])
    baselines = [_build(BaselineConfig, f"baselines.{a}", base.get(a, {}), algorithm=a)
                 for a in BASELINE_ALGORITHMS]
    defaults = ExperimentSpec()
    for name in ("trials", "seed"):
        if name in top:
            top[name] = _coerce(name, top[name], getattr(defaults, name))
    for name in ("power_dbm", "noise_dbm"):
        if name in top:
            top[name] = _coerce(name, top[name], 0.0)
    for name in ("N_values", "U_values", "K_values"):
        if name in top:
            try:
                top[name] = [_coerce(f"sweep.{name[0]}", v, 0) for v in top[name]]
            except ConfigError:
                raise ConfigError(f"sweep.{name[0]}: values must be integers") from None
    if "algorithms" in top and isinstance(top["algorithms"], str):
        top["algorithms"] = [a.strip() for a in top["algorithms"].split(",") if a.strip()]
    return ExperimentSpec(scenario=scenario, solver=solver, baselines=baselines, **top)


def load_config(path):
    """Read a flat JSON config; a run manifest is accepted as well."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    if "spec" in data and isinstance(data["spec"], dict):
        data = data["spec"]
    return data


def _run_one(algorithm, channels, spec, K, seed):
    # a per-(trial, K, algorithm) stream for random inits and random draws
    rng = make_rng(trial_seed(seed, K, ALGORITHMS.index(algorithm)))
    if algorithm == "chr_apgda":
        cfg = replace(spec.solver, record_trace=False)
        return solve(channels, None, cfg, spec.P, spec.sigma2, K, rng=rng)
    if algorithm == "gda":
        return run_gda(channels, spec.P, spec.sigma2, K, spec.baseline("gda"), rng=rng)
    if algorithm == "unit_circle":
        return run_unit_circle(channels, spec.P, spec.sigma2, K, spec.baseline("unit_circle"),
                               rng=rng)
    if algorithm == "random":
        cfg = spec.baseline("random")
        return solve_random(channels, spec.P, spec.sigma2, K, cfg.draws, rng, cfg)
    return solve_exhaustive(channels, spec.P, spec.sigma2, K, cfg=spec.baseline("exhaustive"))


def run_experiment(spec, progress=None):
    """Run every sweep point, trial and algorithm; rows in canonical order."""
    rows = []
    for N in spec.N_values:
        for U in spec.U_values:
            scenario = replace(spec.scenario, N=N, U=U)
            for trial in range(spec.trials):
                seed = trial_seed(spec.seed, N, U, trial)
                channels = draw_channels(scenario, make_rng(seed))
                for K in spec.K_values:
                    for alg in spec.algorithms:
                        t0 = time.perf_counter()
                        res = _run_one(alg, channels, spec, K, seed)
                        elapsed = 1e3 * (time.perf_counter() - t0)
                        per_user = tuple(float(v) for v in res.per_user_sinr_db)
                        rows.append(ResultRow(
                            trial=trial, algorithm=alg, N=N, U=U, K=K, M=scenario.M,
                            seed=seed, min_sinr_db=min(per_user),
                            per_user_sinr_db=per_user,
                            runtime_ms=elapsed if spec.timing == "wall" else 0.0,
                            inner_iterations=int(res.inner_iterations),
                            converged_to_vertices=bool(res.converged_to_vertices)))
                        if progress is not None:
                            progress(rows[-1])
    order = {a: i for i, a in enumerate(spec.algorithms)}
    rows.sort(key=lambda r: (r.N, r.U, r.K, r.trial, order[r.algorithm]))
    return rows


def aggregate(rows):
    """Mean / population std per (N, U, K, algorithm), in first-seen order."""
    groups = {}
    for r in rows:
        groups.setdefault((r.N, r.U, r.K, r.algorithm), []).append(r)
    out = []
    for (N, U, K, alg), rs in groups.items():
        v = np.array([r.min_sinr_db for r in rs])
        out.append({
            "N": N, "U": U, "K": K, "algorithm": alg, "trials": len(rs),
            "mean_min_sinr_db": float(v.mean()), "std_min_sinr_db": float(v.std()),
            "mean_runtime_ms": float(np.mean([r.runtime_ms for r in rs])),
            "mean_inner_iterations": float(np.mean([r.inner_iterations for r in rs])),
            "vertex_rate": float(np.mean([r.converged_to_vertices for r in rs])),
        })
    return out


def emit_outputs(rows, spec, out_dir=None):
    """Write the raw, per-user and aggregate CSVs and the manifest.

    Returns a dict of the written paths.
    """
    if not rows:
        raise ValueError("no rows to write")
    out_dir = spec.out_dir if out_dir is None else out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = {name: os.path.join(out_dir, name) for name in
                 ("results.csv", "per_user.csv", "aggregate.csv", "manifest.json")}
        with open(paths["results.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RAW_HEADER)
            for r in rows:
                w.writerow(r.csv_fields())
        with open(paths["per_user.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "algorithm", "N", "U", "K", "user", "sinr_db"])
            for r in rows:
                for u, v in enumerate(r.per_user_sinr_db):
                    w.writerow([r.trial, r.algorithm, r.N, r.U, r.K, u, _fmt(v)])
        with open(paths["aggregate.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGG_HEADER)
            for a in aggregate(rows):
                w.writerow([a[k] if k in ("N", "U", "K", "algorithm", "trials") else _fmt(a[k])
                            for k in AGG_HEADER])
        seeds = sorted({(r.N, r.U, r.trial, r.seed) for r in rows})
        manifest = {
            "package": "chrbeam",
            "version": __version__,
            "spec": spec.to_flat(),
            "linear": {"P_watt": spec.P, "sigma2_watt": spec.sigma2},
            "seeds": [{"N": N, "U": U, "trial": t, "seed": s} for N, U, t, s in seeds],
            "rows": len(rows),
        }
        with open(paths["manifest.json"], "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out_dir}: {exc.strerror}") from exc
    return paths


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}")


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_common(p):
    p.add_argument("--config", help="flat JSON config or a run manifest")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--n", type=_int_list, help="IRS sizes, e.g. 32,64")
    p.add_argument("--users", type=_int_list, help="user counts, e.g. 2,4")
    p.add_argument("--k", type=_int_list, help="phase levels, e.g. 2,4")
    p.add_argument("--m", type=int, help="BS antennas")
    p.add_argument("--power-dbm", type=float)
    p.add_argument("--noise-dbm", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--algorithms", type=_str_list)
    p.add_argument("--out")
    p.add_argument("--init", choices=["ones", "random", "center"])
    p.add_argument("--lambda-cap", choices=["none", "equiv"])
    p.add_argument("--timing", choices=["wall", "off"])
    p.add_argument("-v", "--verbose", action="store_true")


def spec_from_args(args):
    """Preset, then config file, then explicit flags (later wins)."""
    flat = {}
    if args.preset:
        flat.update(PRESETS[args.preset])
    if args.config:
        flat.update(load_config(args.config))
    flags = {
        "sweep.N": args.n, "sweep.U": args.users, "sweep.K": args.k, "scenario.M": args.m,
        "power_dbm": args.power_dbm, "noise_dbm": args.noise_dbm, "trials": args.trials,
        "seed": args.seed, "algorithms": args.algorithms, "out_dir": args.out,
        "solver.init": args.init, "timing": args.timing,
    }
    if args.init is not None:
        for alg in ("gda", "unit_circle"):
            flags[f"baselines.{alg}.init"] = args.init
    if args.lambda_cap is not None:
        flags["solver.lambda_cap_mode"] = {"none": "none",
                                           "equiv": "equivalence_threshold"}[args.lambda_cap]
    flat.update({k: v for k, v in flags.items() if v is not None})
    return spec_from_flat(flat)


def _cmd_run(args):
    spec = spec_from_args(args)

    def progress(row):
        logger.info("N=%d U=%d K=%d trial=%d %s: %.3f dB", row.N, row.U, row.K, row.trial,
                    row.algorithm, row.min_sinr_db)

    rows = run_experiment(spec, progress)
    paths = emit_outputs(rows, spec)
    for a in aggregate(rows):
        print(f"N={a['N']:<4d} U={a['U']:<3d} K={a['K']}  {a['algorithm']:<12s} "
              f"{a['mean_min_sinr_db']:8.3f} dB  +/- {a['std_min_sinr_db']:.3f}  "
              f"{a['mean_runtime_ms']:9.1f} ms")
    print(f"wrote {len(rows)} rows to {paths['results.csv']}")
    return 0


def _cmd_trace(args):
    """Per-iteration convergence traces for one channel draw."""
    spec = spec_from_args(args)
    N, U, K = spec.N_values[0], spec.U_values[0], spec.K_values[0]
    seed = trial_seed(spec.seed, N, U, args.trial)
    channels = draw_channels(replace(spec.scenario, N=N, U=U), make_rng(seed))
    os.makedirs(spec.out_dir, exist_ok=True)
    for alg in spec.algorithms:
        if alg == "chr_apgda":
            res = solve(channels, None, replace(spec.solver, record_trace=True), spec.P,
                        spec.sigma2, K)
        elif alg == "gda":
            res = run_gda(channels, spec.P, spec.sigma2, K, spec.baseline("gda"),
                          record_trace=True)
        elif alg == "unit_circle":
            res = run_unit_circle(channels, spec.P, spec.sigma2, K, spec.baseline("unit_circle"),
                                  record_trace=True)
        else:
            raise ConfigError(f"algorithms: {alg!r} has no iteration trace")
        path = os.path.join(spec.out_dir, f"trace_{alg}_N{N}_U{U}_K{K}_t{args.trial}.csv")
        res.trace.write_csv(path)
        print(f"{alg}: final {res.min_sinr_db:.3f} dB, trace in {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chrbeam", description="Discrete IRS max-min SINR experiments.")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="Monte-Carlo sweep to CSV (default command)")
    _add_common(run)
    run.set_defaults(func=_cmd_run)
    trace = sub.add_parser("trace", help="convergence traces for one channel draw")
    _add_common(trace)
    trace.add_argument("--trial", type=int, default=0)
    trace.set_defaults(func=_cmd_trace)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("run", "trace", "-h", "--help"):
        argv = ["run"] + argv
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
