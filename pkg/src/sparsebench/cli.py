"""Command-line entry point: parse experiment configs, run sweeps, and emit
CSV curve data, runtime tables, and run metadata.

Config files are YAML (UTF-8), strictly validated: unknown keys are fatal.
See README for the full grammar. Exit codes: 0 success, 1 usage/config error,
2 numerical failure.
"""

import argparse
import logging
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from time import perf_counter

import numpy as np
import yaml

from . import __version__, completion, datagen, experiment, linalg, solvers
from .errors import ConfigError, DivergenceError, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 20
CSV_HEADER = "method,parameter,mean_rmse,std_rmse,wall_time_seconds,trials"

# Problem sizes of the runtime comparison table.
RUNTIME_TABLE_SIZES = (
    (100, 100),
    (200, 100),
    (500, 100),
    (1000, 100),
    (2000, 100),
    (1000, 500),
)


@dataclass
class RunConfig:
    """Fully resolved experiment configuration."""

    name: str
    dataset_params: experiment.DatasetParams
    methods: tuple = ("imat", "iht", "lasso")
    pipeline: str = "raw"
    grids: dict = field(default_factory=dict)
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    output_path: str = ""

    def __post_init__(self):
        if not self.name:
            raise ConfigError("name must be a nonempty string")
        for m in self.methods:
            if m not in experiment.METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods: duplicate entries")
        if self.pipeline not in experiment.PIPELINES:
            raise ConfigError(f"pipeline: must be raw or precompleted, got {self.pipeline!r}")
        if self.trials < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if not self.output_path:
            self.output_path = f"{self.name}.csv"


_DATASET_KEYS = {"m", "n", "r", "s", "alpha", "noise_sigma"}
_GRID_KEYS = {"lasso", "imat_c", "iht_mu"}
_TOP_KEYS = {"name", "dataset", "methods", "pipeline", "grids", "trials",
             "base_seed", "output"}


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def config_from_dict(raw):
    """Build a validated RunConfig from a parsed mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "config")

    name = _require(raw, "name", "config")
    dataset = _require(raw, "dataset", "config")
    if not isinstance(dataset, dict):
        raise ConfigError("dataset: must be a mapping")
    _reject_unknown(dataset, _DATASET_KEYS, "dataset")
    for key in ("m", "n", "r", "s", "alpha"):
        _require(dataset, key, "dataset")
    try:
        params = experiment.DatasetParams(
            m=int(dataset["m"]),
            n=int(dataset["n"]),
            r=int(dataset["r"]),
            s=int(dataset["s"]),
            alpha=float(dataset["alpha"]),
            noise_sigma=float(dataset.get("noise_sigma", 0.1)),
        )
    except InvalidInputError as exc:
        raise ConfigError(f"dataset: {exc}") from exc

    grids = raw.get("grids") or {}
    if not isinstance(grids, dict):
        raise ConfigError("grids: must be a mapping")
    _reject_unknown(grids, _GRID_KEYS, "grids")
    clean_grids = {}
    for key, values in grids.items():
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"grids.{key}: must be a nonempty list")
        clean_grids[key] = [float(v) for v in values]

    methods = raw.get("methods", list(experiment.METHODS))
    if not isinstance(methods, (list, tuple)) or not methods:
        raise ConfigError("methods: must be a nonempty list")

    return RunConfig(
        name=str(name),
        dataset_params=params,
        methods=tuple(str(m) for m in methods),
        pipeline=str(raw.get("pipeline", "raw")),
        grids=clean_grids,
        trials=int(raw.get("trials", DEFAULT_TRIALS)),
        base_seed=int(raw.get("base_seed", 0)),
        output_path=str(raw.get("output", "")),
    )


def parse_config(path):
    """Load and validate a YAML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: parse error{where}: {exc}") from exc
    return config_from_dict(raw)


def resolve_grids(cfg):
    """Per-method grids with defaults filled in; keys lasso, imat_c, iht_mu."""
    lasso_grid, imat_c_grid, iht_mu_grid = experiment.default_grids()
    return {
        "lasso": [float(v) for v in cfg.grids.get("lasso", lasso_grid)],
        "imat_c": [float(v) for v in cfg.grids.get("imat_c", imat_c_grid)],
        "iht_mu": [float(v) for v in cfg.grids.get("iht_mu", iht_mu_grid)],
    }


_METHOD_GRID_KEY = {"imat": "imat_c", "iht": "iht_mu", "lasso": "lasso"}


@dataclass
class RunOutcome:
    config: RunConfig
    records: list
    total_wall_time_seconds: float


def run_config(cfg):
    """Execute every method sweep of a config; trial data is shared across methods."""
    grids = resolve_grids(cfg)
    start = perf_counter()
    trials_data = None
    records = []
    for method in cfg.methods:
        spec = experiment.SweepSpec(
            method=method,
            grid=tuple(grids[_METHOD_GRID_KEY[method]]),
            trials=cfg.trials,
            pipeline=cfg.pipeline,
            dataset_params=cfg.dataset_params,
        )
        if trials_data is None:
            trials_data = experiment.prepare_trials(spec, cfg.base_seed)
        method_records = experiment.run_sweep(spec, cfg.base_seed,
                                              trials_data=trials_data)
        best = experiment.best_record(method_records)
        logger.info("%s [%s]: min mean RMSE %.4f at parameter %g",
                    cfg.name, method, best.mean_rmse, best.parameter)
        records.extend(method_records)
    return RunOutcome(
        config=cfg,
        records=records,
        total_wall_time_seconds=perf_counter() - start,
    )


def _fmt(value):
    return f"{value:.6g}"


def emit_csv(records, path):
    """Write sweep records as CSV: one row per (method, parameter).

    Floats carry 6 significant digits; rows are ordered by method then
    parameter ascending; LF line endings.
    """
    if not records:
        raise InvalidInputError("records must be nonempty")
    rows = sorted(records, key=lambda r: (r.method, r.parameter))
    lines = [CSV_HEADER]
    for r in rows:
        std = float(np.std(r.trial_rmses)) if r.trial_rmses.size else float("nan")
        lines.append(",".join([
            r.method,
            _fmt(r.parameter),
            _fmt(r.mean_rmse),
            _fmt(std),
            _fmt(r.wall_time_seconds),
            str(r.trial_rmses.size),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path):
    """Parse a CSV written by emit_csv back into plain row dicts."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise InvalidInputError(f"{path}: unexpected CSV header")
    rows = []
    for line in lines[1:]:
        method, parameter, mean, std, wall, trials = line.split(",")
        rows.append({
            "method": method,
            "parameter": float(parameter),
            "mean_rmse": float(mean),
            "std_rmse": float(std),
            "wall_time_seconds": float(wall),
            "trials": int(trials),
        })
    return rows


def machine_descriptor():
    cpu = platform.processor() or platform.machine() or "unknown-cpu"
    return (f"{platform.platform()} / {cpu} / "
            f"Python {platform.python_version()} / numpy {np.__version__}")


def metadata_path_for(csv_path):
    return Path(csv_path).with_suffix(".meta.yaml")


def emit_metadata(outcome, csv_path, path=None):
    """Write the run metadata file next to the CSV.

    Records the toolkit version, RNG contract, every resolved setting and
    seed, the machine descriptor, total wall time, and the per-record fit
    timings (so a replay can reproduce the CSV byte-for-byte; timings are
    environmental, not seeded).
    """
    cfg = outcome.config
    meta = {
        "toolkit_version": __version__,
        "rng": datagen.RNG_NAME,
        "experiment": cfg.name,
        "dataset": {
            "m": cfg.dataset_params.m,
            "n": cfg.dataset_params.n,
            "r": cfg.dataset_params.r,
            "s": cfg.dataset_params.s,
            "alpha": cfg.dataset_params.alpha,
            "noise_sigma": cfg.dataset_params.noise_sigma,
        },
        "methods": list(cfg.methods),
        "pipeline": cfg.pipeline,
        "trials": cfg.trials,
        "base_seed": cfg.base_seed,
        "train_ratio": experiment.TRAIN_RATIO,
        "grids": resolve_grids(cfg),
        "defaults": {
            "imat_max_iters": solvers.DEFAULT_MAX_ITERS,
            "imat_rel_tol": solvers.DEFAULT_REL_TOL,
            "lasso_max_sweeps": solvers.DEFAULT_MAX_SWEEPS,
            "lasso_kkt_tol": solvers.DEFAULT_KKT_TOL,
            "completion_max_iters": completion.DEFAULT_MAX_ITERS,
            "completion_rel_tol": completion.DEFAULT_REL_TOL,
            "completion_holdout_fraction": experiment.COMPLETION_HOLDOUT_FRACTION,
        },
        "csv": str(csv_path),
        "fit_timings": [
            {"method": r.method, "parameter": r.parameter,
             "wall_time_seconds": r.wall_time_seconds}
            for r in outcome.records
        ],
        "total_wall_time_seconds": outcome.total_wall_time_seconds,
        "machine": machine_descriptor(),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(path) if path else metadata_path_for(csv_path)
    path.write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")
    return path


def replay_metadata(meta_path, csv_path):
    """Re-run the experiment recorded in a metadata file.

    All seeded results are recomputed; the recorded fit timings are carried
    over (timing is the one environmental column), so the emitted CSV is
    byte-identical to the original.
    """
    meta = yaml.safe_load(Path(meta_path).read_text(encoding="utf-8"))
    cfg = config_from_dict({
        "name": meta["experiment"],
        "dataset": meta["dataset"],
        "methods": meta["methods"],
        "pipeline": meta["pipeline"],
        "grids": meta["grids"],
        "trials": meta["trials"],
        "base_seed": meta["base_seed"],
        "output": str(csv_path),
    })
    outcome = run_config(cfg)
    timings = {(t["method"], t["parameter"]): t["wall_time_seconds"]
               for t in meta["fit_timings"]}
    replayed = [
        experiment.SweepRecord(
            method=r.method,
            parameter=r.parameter,
            mean_rmse=r.mean_rmse,
            trial_rmses=r.trial_rmses,
            wall_time_seconds=timings[(r.method, r.parameter)],
        )
        for r in outcome.records
    ]
    emit_csv(replayed, csv_path)
    return csv_path


def runtime_table_configs(trials=3, base_seed=0):
    """Timing configs for the six standard problem sizes.

    Both methods sweep grids of equal cardinality (7 points each) so total
    fit times are comparable.
    """
    configs = []
    for m, n in RUNTIME_TABLE_SIZES:
        configs.append(RunConfig(
            name=f"timing-m{m}-n{n}",
            dataset_params=experiment.DatasetParams(
                m=m, n=n, r=50, s=8, alpha=0.5, noise_sigma=0.1
            ),
            methods=("imat", "lasso"),
            grids={"imat_c": [float(c) for c in range(1, 8)]},
            trials=trials,
            base_seed=base_seed,
        ))
    return configs


def emit_runtime_table(configs):
    """Measure and render the IMAT-vs-LASSO fit-time table as text."""
    if not configs:
        raise InvalidInputError("configs must be nonempty")
    for cfg in configs:
        extra = set(cfg.methods) - {"imat", "lasso"}
        if extra:
            raise InvalidInputError(
                f"runtime table supports methods imat and lasso only, got {sorted(extra)}"
            )
    lines = ["Training-time comparison (seconds, fit phase only)",
             f"{'data size':<16}{'IMAT':>10}{'LASSO':>10}"]
    for cfg in configs:
        grids = resolve_grids(cfg)
        trials_data = None
        seconds = {}
        for method in ("imat", "lasso"):
            if method not in cfg.methods:
                continue
            spec = experiment.SweepSpec(
                method=method,
                grid=tuple(grids[_METHOD_GRID_KEY[method]]),
                trials=cfg.trials,
                pipeline=cfg.pipeline,
                dataset_params=cfg.dataset_params,
            )
            if trials_data is None:
                trials_data = experiment.prepare_trials(spec, cfg.base_seed)
            seconds[method] = experiment.time_training(
                spec, cfg.base_seed, trials_data=trials_data)
        label = f"m={cfg.dataset_params.m},n={cfg.dataset_params.n}"
        imat_s = f"{seconds['imat']:.4f}" if "imat" in seconds else "-"
        lasso_s = f"{seconds['lasso']:.4f}" if "lasso" in seconds else "-"
        lines.append(f"{label:<16}{imat_s:>10}{lasso_s:>10}")
        logger.info("timed %s: imat %s s, lasso %s s", label, imat_s, lasso_s)
    lines.append(f"machine: {machine_descriptor()}")
    return "\n".join(lines) + "\n"


def _verify_suites(seed=0):
    """Built-in property checks; yields (name, ok, detail)."""
    rng = np.random.default_rng(seed)

    def check_hard_threshold():
        for _ in range(200):
            v = rng.standard_normal(rng.integers(1, 50))
            t = float(abs(rng.standard_normal()))
            once = solvers.hard_threshold(v, t)
            if not np.array_equal(solvers.hard_threshold(once, t), once):
                return False, "idempotence violated"
        return True, "200 cases"

    def check_iht_sparsity():
        for _ in range(100):
            m, n = int(rng.integers(5, 30)), int(rng.integers(5, 30))
            s = int(rng.integers(1, n + 1))
            x = rng.standard_normal((m, n))
            y = rng.standard_normal(m)
            res = solvers.iht_recover(x, y, solvers.IhtConfig(sparsity=s, max_iters=30))
            if np.count_nonzero(res.beta_hat) > s:
                return False, f"support {np.count_nonzero(res.beta_hat)} > {s}"
        return True, "100 cases"

    def check_lasso_monotone():
        # lasso_solve raises NumericalError internally if a sweep increases
        # the objective; also spot-check KKT convergence.
        for _ in range(20):
            m, n = 40, 12
            x = rng.standard_normal((m, n))
            y = rng.standard_normal(m)
            res = solvers.lasso_solve(x, y, solvers.LassoConfig(penalty=0.5))
            if not res.converged:
                return False, "KKT not reached"
        return True, "20 instances"

    def check_svd_reconstruction():
        for _ in range(100):
            m, n = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            a = rng.standard_normal((m, n))
            f = linalg.svd(a)
            rel = np.linalg.norm(f.reconstruct() - a) / max(1.0, np.linalg.norm(a))
            if rel > linalg.RECONSTRUCTION_TOL:
                return False, f"residual {rel:.2e}"
        return True, "100 cases"

    def check_orthonormalize():
        for _ in range(100):
            n = int(rng.integers(1, 10))
            m = n + int(rng.integers(0, 10))
            q = linalg.orthonormalize(rng.standard_normal((m, n)))
            dev = np.max(np.abs(q.T @ q - np.eye(n)))
            if dev > linalg.ORTHONORMALITY_TOL:
                return False, f"deviation {dev:.2e}"
        return True, "100 cases"

    def check_mask_fraction():
        masked = datagen.apply_mask(np.ones((1000, 100)), 0.8, seed=int(rng.integers(2**31)))
        frac = masked.mask.mean()
        ok = abs(frac - 0.8) <= 0.01
        return ok, f"fraction {frac:.4f}"

    def check_soft_impute_monotone():
        for _ in range(10):
            a = datagen.gen_low_rank(30, 20, 3, seed=int(rng.integers(2**31)))
            masked = datagen.apply_mask(a, 0.7, seed=int(rng.integers(2**31)))
            res = completion.soft_impute(masked, completion.CompletionConfig(shrinkage=0.1))
            if np.any(np.diff(res.objective_trace) > 1e-9):
                return False, "trace increased"
        return True, "10 runs"

    suites = [
        ("hard_threshold idempotence", check_hard_threshold),
        ("iht sparsity bound", check_iht_sparsity),
        ("lasso objective monotonicity", check_lasso_monotone),
        ("svd reconstruction", check_svd_reconstruction),
        ("orthonormalize", check_orthonormalize),
        ("mask fraction concentration", check_mask_fraction),
        ("soft-impute objective monotonicity", check_soft_impute_monotone),
    ]
    for name, check in suites:
        try:
            ok, detail = check()
        except (InvalidInputError, NumericalError) as exc:
            ok, detail = False, str(exc)
        yield name, ok, detail


class _Parser(argparse.ArgumentParser):
    # Spec reserves exit code 2 for numerical failures; usage errors are 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials: must be >= 1")
        cfg.trials = args.trials
    if args.pipeline is not None:
        cfg.pipeline = args.pipeline
        RunConfig.__post_init__(cfg)  # revalidate
    if args.out is not None:
        cfg.output_path = args.out
    return cfg


def _cmd_run(args):
    cfg = _apply_overrides(parse_config(args.config), args)
    outcome = run_config(cfg)
    emit_csv(outcome.records, cfg.output_path)
    meta = emit_metadata(outcome, cfg.output_path)
    print(f"wrote {cfg.output_path} and {meta}")
    for method in cfg.methods:
        best = experiment.best_record(
            [r for r in outcome.records if r.method == method])
        print(f"{method}: min mean RMSE {best.mean_rmse:.4f} "
              f"at parameter {best.parameter:g}")
    return 0


def _cmd_timings(args):
    trials = args.trials if args.trials is not None else 3
    configs = runtime_table_configs(trials=trials, base_seed=args.seed or 0)
    table = emit_runtime_table(configs)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(table, end="")
    return 0


def _cmd_verify(args):
    failures = 0
    for name, ok, detail in _verify_suites(seed=args.seed or 0):
        print(f"{'PASS' if ok else 'FAIL'}  {name} ({detail})")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 2


def build_parser():
    parser = _Parser(prog="sparsebench",
                     description="Sparse-recovery benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--trials", type=int, default=None, help="trials override")
        p.add_argument("--out", default=None, help="output path override")

    p_run = sub.add_parser("run", help="run one experiment config")
    add_common(p_run)
    p_run.add_argument("--pipeline", choices=experiment.PIPELINES, default=None)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config and emit curve data")
    add_common(p_sweep)
    p_sweep.add_argument("--pipeline", choices=experiment.PIPELINES, default=None)
    p_sweep.set_defaults(func=_cmd_run)

    p_time = sub.add_parser("timings", help="reproduce the runtime table")
    add_common(p_time, config_required=False)
    p_time.set_defaults(func=_cmd_timings)

    p_verify = sub.add_parser("verify", help="run the property suites")
    add_common(p_verify, config_required=False)
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
