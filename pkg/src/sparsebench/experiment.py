"""Benchmark protocol: train/test split, parameter sweeps, RMSE evaluation,
raw and complete-then-recover pipelines, and fit-time measurement.

Seed derivation
---------------
Trial t of a sweep uses dataset seed ``base_seed + t * TRIAL_SEED_STRIDE``.
The dataset itself consumes sub-seeds +0..+5 (see datagen); the row split
uses +6 and the completion-shrinkage holdout uses +7. Trial seeds do not
depend on the grid value, so sweep results are invariant to the order grid
points are evaluated, and trials may safely run in parallel.
"""

import logging
import math
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from . import completion, datagen, linalg, solvers
from .errors import DivergenceError, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

TRAIN_RATIO = 0.8
TRIAL_SEED_STRIDE = 1_000_003
SPLIT_SEED_OFFSET = 6
HOLDOUT_SEED_OFFSET = 7

METHODS = ("imat", "iht", "lasso")
PIPELINES = ("raw", "precompleted")

# Fraction of observed entries held out when selecting the completion shrinkage.
COMPLETION_HOLDOUT_FRACTION = 0.1


@dataclass(frozen=True)
class DatasetParams:
    """Size and noise settings of one synthetic problem family."""

    m: int
    n: int
    r: int
    s: int
    alpha: float
    noise_sigma: float = 0.1

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidInputError(f"m={self.m}, n={self.n} must be >= 1")
        if not 1 <= self.r <= min(self.m, self.n):
            raise InvalidInputError(
                f"r={self.r} outside [1, {min(self.m, self.n)}]"
            )
        if not 1 <= self.s <= self.n:
            raise InvalidInputError(f"s={self.s} outside [1, {self.n}]")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha={self.alpha} outside [0, 1]")
        if self.noise_sigma < 0:
            raise InvalidInputError(f"noise_sigma={self.noise_sigma} must be >= 0")


@dataclass(frozen=True)
class SplitDataset:
    """Row partition of a dataset into training and test parts."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    split_seed: int


@dataclass(frozen=True)
class SweepSpec:
    """One method swept over one parameter grid on one problem family."""

    method: str
    grid: tuple
    trials: int
    pipeline: str
    dataset_params: DatasetParams

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.pipeline not in PIPELINES:
            raise InvalidInputError(f"unknown pipeline {self.pipeline!r}")
        grid = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) == 0:
            raise InvalidInputError("grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("grid must be strictly increasing")
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")


@dataclass(frozen=True)
class SweepRecord:
    """Result row: mean test RMSE at one grid value, plus fit wall time."""

    method: str
    parameter: float
    mean_rmse: float
    trial_rmses: np.ndarray
    wall_time_seconds: float


def split(ds, ratio, split_seed, design=None):
    """Partition dataset rows into train and test by a seeded permutation.

    The first ceil(ratio * m) rows of a uniform random row permutation form
    the training part. ``design`` optionally overrides the design matrix to
    split (used for the precompleted pipeline); by default the masked
    observed matrix is used. Labels are never masked.
    """
    x = ds.masked.observed if design is None else linalg.as_matrix(design, "design")
    y = ds.labels
    m = x.shape[0]
    if x.shape != ds.masked.observed.shape:
        raise InvalidInputError(
            f"design shape {x.shape} differs from dataset shape "
            f"{ds.masked.observed.shape}"
        )
    if not 0.0 < ratio < 1.0:
        raise InvalidInputError(f"ratio={ratio} outside (0, 1)")
    if m * ratio < 1 or m * (1 - ratio) < 1:
        raise InvalidInputError(
            f"degenerate split: m={m}, ratio={ratio} leaves an empty part"
        )
    n_train = math.ceil(ratio * m)
    perm = np.random.default_rng(split_seed).permutation(m)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return SplitDataset(
        train_x=x[train_idx],
        train_y=y[train_idx],
        test_x=x[test_idx],
        test_y=y[test_idx],
        split_seed=int(split_seed),
    )


def rmse(y_pred, y_true):
    """Root mean squared error between two equal-length vectors."""
    y_pred = linalg.as_vector(y_pred, "y_pred")
    y_true = linalg.as_vector(y_true, "y_true")
    if y_pred.size != y_true.size:
        raise InvalidInputError(
            f"length mismatch: {y_pred.size} vs {y_true.size}"
        )
    if y_pred.size < 1:
        raise InvalidInputError("vectors must be nonempty")
    diff = y_pred - y_true
    return float(np.sqrt(np.mean(diff * diff)))


def default_grids(mu_safe=1.0):
    """Default parameter grids (lasso penalty, IMAT c, IHT step).

    The lasso penalty runs logarithmically over [1e-4, 100] with factor-10
    steps (7 values); the IMAT threshold factor c runs 1..10 with step 1.
    The IHT grid is 10 log-spaced step sizes in [1e-3 * mu_safe, mu_safe];
    with the default mu_safe = 1 the values act as multipliers of the
    per-design safe step 1 / sigma_max(X)^2 resolved at fit time.
    """
    lasso_grid = 10.0 ** np.arange(-4, 3)
    imat_c_grid = np.arange(1.0, 11.0)
    iht_mu_grid = np.geomspace(1e-3 * mu_safe, mu_safe, 10)
    return lasso_grid, imat_c_grid, iht_mu_grid


def completion_shrinkage_grid():
    """Shrinkage candidates for completion: same logarithmic grid as lasso."""
    return 10.0 ** np.arange(-4, 3)


def complete_design(masked, shrinkage_grid=None, holdout_seed=0,
                    holdout_fraction=COMPLETION_HOLDOUT_FRACTION, cfg=None):
    """Complete a masked matrix, selecting the shrinkage on held-out entries.

    A seeded random ``holdout_fraction`` of the observed entries is hidden;
    each candidate shrinkage completes the remainder and is scored by RMSE on
    the hidden entries; the winner completes the full observed set.

    Returns the completed design matrix.
    """
    if shrinkage_grid is None:
        shrinkage_grid = completion_shrinkage_grid()
    shrinkage_grid = [float(g) for g in shrinkage_grid]
    if not shrinkage_grid:
        raise InvalidInputError("shrinkage_grid must be nonempty")
    base = cfg or completion.CompletionConfig(shrinkage=0.0)

    best_lam = shrinkage_grid[0]
    if len(shrinkage_grid) > 1:
        obs_rows, obs_cols = np.nonzero(masked.mask)
        n_obs = obs_rows.size
        n_holdout = int(round(holdout_fraction * n_obs))
        n_holdout = min(max(n_holdout, 1), n_obs - 1)
        pick = np.random.default_rng(holdout_seed).choice(
            n_obs, size=n_holdout, replace=False
        )
        hold_r, hold_c = obs_rows[pick], obs_cols[pick]

        reduced_mask = masked.mask.copy()
        reduced_mask[hold_r, hold_c] = 0.0
        reduced = datagen.MaskedMatrix(
            observed=masked.observed * reduced_mask,
            mask=reduced_mask,
            keep_probability=masked.keep_probability,
        )
        truth = masked.observed[hold_r, hold_c]

        best_err = np.inf
        for lam in shrinkage_grid:
            trial_cfg = completion.CompletionConfig(
                shrinkage=lam, max_iters=base.max_iters, rel_tol=base.rel_tol
            )
            result = completion.soft_impute(reduced, trial_cfg)
            err = rmse(result.completed[hold_r, hold_c], truth)
            if err < best_err:
                best_err = err
                best_lam = lam
        logger.debug("selected completion shrinkage %g (holdout rmse %.4g)",
                     best_lam, best_err)

    final_cfg = completion.CompletionConfig(
        shrinkage=best_lam,
        max_iters=base.max_iters,
        rel_tol=base.rel_tol,
        overwrite_observed=base.overwrite_observed,
    )
    return completion.soft_impute(masked, final_cfg).completed


@dataclass(frozen=True)
class _TrialData:
    """Per-trial fit inputs, shared across methods and grid values.

    gram and xty are cached products for the thresholding solvers.
    """

    split: SplitDataset
    sigma_max_sq: float
    gram: np.ndarray
    xty: np.ndarray


def _prepare_trial(params, pipeline, base_seed, trial, completion_grid=None):
    ds_seed = base_seed + trial * TRIAL_SEED_STRIDE
    ds = datagen.gen_dataset(
        params.m, params.n, params.r, params.s, params.alpha,
        noise_sigma=params.noise_sigma, seed=ds_seed,
    )
    design = None
    if pipeline == "precompleted":
        design = complete_design(
            ds.masked,
            shrinkage_grid=completion_grid,
            holdout_seed=ds_seed + HOLDOUT_SEED_OFFSET,
        )
    sd = split(ds, TRAIN_RATIO, ds_seed + SPLIT_SEED_OFFSET, design=design)
    sigma_max = linalg.spectral_norm(sd.train_x)
    return _TrialData(
        split=sd,
        sigma_max_sq=sigma_max**2,
        gram=sd.train_x.T @ sd.train_x,
        xty=sd.train_x.T @ sd.train_y,
    )


def _fit_one(method, trial, parameter, sparsity):
    """Fit one method at one grid value on one prepared trial."""
    sd = trial.split
    if method == "imat":
        cfg = solvers.ImatConfig(threshold=solvers.AdaptiveThreshold(c=parameter))
        return solvers.imat_recover(
            sd.train_x, sd.train_y, cfg, sigma_max_sq=trial.sigma_max_sq,
            gram=trial.gram, xty=trial.xty,
        )
    if method == "iht":
        # Grid values are multipliers of the safe step 1 / sigma_max^2.
        mu_safe = 1.0 / trial.sigma_max_sq if trial.sigma_max_sq > 0 else 1.0
        cfg = solvers.IhtConfig(sparsity=sparsity, step=parameter * mu_safe)
        return solvers.iht_recover(
            sd.train_x, sd.train_y, cfg, sigma_max_sq=trial.sigma_max_sq,
            gram=trial.gram, xty=trial.xty,
        )
    if method == "lasso":
        cfg = solvers.LassoConfig(penalty=parameter)
        return solvers.lasso_solve(sd.train_x, sd.train_y, cfg)
    raise InvalidInputError(f"unknown method {method!r}")


def prepare_trials(spec, base_seed, completion_grid=None):
    """Generate (and optionally complete and split) all trial datasets.

    Exposed separately so several method sweeps on the same problem family can
    share the per-trial work.
    """
    return [
        _prepare_trial(spec.dataset_params, spec.pipeline, base_seed, t,
                       completion_grid=completion_grid)
        for t in range(spec.trials)
    ]


def run_sweep(spec, base_seed, trials_data=None):
    """Sweep a method over its grid; one SweepRecord per grid value.

    Each record's RMSE values come from fitting on the training rows and
    predicting the held-out labels. ``wall_time_seconds`` covers the fitting
    phase only (dataset generation, completion, and prediction excluded).
    Trials whose solver diverges are logged and excluded from the mean.
    """
    if trials_data is None:
        trials_data = prepare_trials(spec, base_seed)
    records = []
    for parameter in spec.grid:
        trial_rmses = []
        fit_seconds = 0.0
        failures = 0
        for trial in trials_data:
            start = perf_counter()
            try:
                result = _fit_one(spec.method, trial, parameter,
                                  spec.dataset_params.s)
            except (DivergenceError, NumericalError) as exc:
                failures += 1
                logger.warning("%s trial diverged at parameter %g: %s",
                               spec.method, parameter, exc)
                continue
            fit_seconds += perf_counter() - start
            prediction = trial.split.test_x @ result.beta_hat
            trial_rmses.append(rmse(prediction, trial.split.test_y))
        if failures:
            logger.warning("%s at parameter %g: %d of %d trials diverged "
                           "and were excluded", spec.method, parameter,
                           failures, len(trials_data))
        trial_rmses = np.asarray(trial_rmses)
        mean = float(np.mean(trial_rmses)) if trial_rmses.size else float("nan")
        records.append(SweepRecord(
            method=spec.method,
            parameter=float(parameter),
            mean_rmse=mean,
            trial_rmses=trial_rmses,
            wall_time_seconds=fit_seconds,
        ))
    return records


def best_record(records):
    """The record with the lowest mean RMSE (ties: first in grid order)."""
    finite = [r for r in records if np.isfinite(r.mean_rmse)]
    if not finite:
        raise NumericalError("no successful trials in sweep")
    return min(finite, key=lambda r: r.mean_rmse)


def time_training(spec, base_seed, trials_data=None):
    """Total fit wall time across the whole grid, in seconds.

    Excludes dataset generation and completion, so timings of different
    methods on the same problem family are comparable.
    """
    records = run_sweep(spec, base_seed, trials_data=trials_data)
    return sum(r.wall_time_seconds for r in records)
