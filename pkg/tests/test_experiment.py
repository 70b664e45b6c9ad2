import numpy as np
import pytest

from sparsebench import datagen, experiment
from sparsebench.errors import InvalidInputError


def small_params(**overrides):
    base = dict(m=40, n=10, r=4, s=2, alpha=0.8, noise_sigma=0.05)
    base.update(overrides)
    return experiment.DatasetParams(**base)


class TestSplit:
    def test_eighty_twenty(self):
        ds = datagen.gen_dataset(10, 5, 2, 2, alpha=1.0, seed=0)
        sd = experiment.split(ds, 0.8, split_seed=1)
        assert sd.train_x.shape[0] == 8
        assert sd.test_x.shape[0] == 2
        assert sd.train_y.size == 8 and sd.test_y.size == 2

    def test_two_rows(self):
        ds = datagen.gen_dataset(2, 4, 1, 1, alpha=1.0, seed=0)
        sd = experiment.split(ds, 0.5, split_seed=3)
        assert sd.train_x.shape[0] == 1
        assert sd.test_x.shape[0] == 1

    def test_deterministic(self):
        ds = datagen.gen_dataset(20, 6, 2, 2, alpha=0.7, seed=4)
        a = experiment.split(ds, 0.8, split_seed=9)
        b = experiment.split(ds, 0.8, split_seed=9)
        assert np.array_equal(a.train_x, b.train_x)
        assert np.array_equal(a.test_y, b.test_y)

    def test_partition_complete(self):
        ds = datagen.gen_dataset(15, 6, 2, 2, alpha=0.6, seed=5)
        sd = experiment.split(ds, 0.8, split_seed=2)
        rows = np.vstack([sd.train_x, sd.test_x])
        # Every original row appears exactly once across the parts.
        original = ds.masked.observed
        matched = set()
        for row in rows:
            hits = np.where((original == row).all(axis=1))[0]
            assert hits.size >= 1
            matched.add(int(hits[0]))
        assert len(matched) == 15

    def test_design_override(self):
        ds = datagen.gen_dataset(10, 4, 2, 2, alpha=0.5, seed=6)
        design = np.arange(40, dtype=float).reshape(10, 4)
        sd = experiment.split(ds, 0.8, split_seed=7, design=design)
        perm = np.random.default_rng(7).permutation(10)
        assert np.array_equal(sd.train_x, design[perm[:8]])
        assert np.array_equal(sd.train_y, ds.labels[perm[:8]])

    def test_degenerate_raises(self):
        ds = datagen.gen_dataset(3, 4, 2, 2, alpha=1.0, seed=8)
        with pytest.raises(InvalidInputError):
            experiment.split(ds, 0.95, split_seed=0)


class TestRmse:
    def test_identical(self):
        assert experiment.rmse(np.ones(4), np.ones(4)) == 0.0

    def test_unit_offset(self):
        assert experiment.rmse(np.array([1.0, 1.0]), np.zeros(2)) == 1.0

    def test_hand_computed(self):
        assert experiment.rmse(np.array([3.0, 0, 0, 0]), np.zeros(4)) == 1.5

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            experiment.rmse(np.ones(3), np.ones(4))


class TestDefaultGrids:
    def test_lasso_grid(self):
        lasso, _, _ = experiment.default_grids()
        assert len(lasso) == 7
        assert lasso[0] == pytest.approx(1e-4)
        assert lasso[-1] == pytest.approx(100.0)
        assert np.allclose(np.diff(np.log10(lasso)), 1.0)

    def test_imat_c_grid(self):
        _, c_grid, _ = experiment.default_grids()
        assert np.array_equal(c_grid, np.arange(1.0, 11.0))
        assert np.all(np.diff(c_grid) == 1.0)

    def test_iht_grid_increasing_and_scaled(self):
        _, _, base = experiment.default_grids()
        assert len(base) == 10
        assert np.all(np.diff(base) > 0)
        assert base[0] == pytest.approx(1e-3)
        assert base[-1] == pytest.approx(1.0)
        _, _, scaled = experiment.default_grids(mu_safe=0.5)
        assert scaled[-1] == pytest.approx(0.5)
        assert scaled[0] == pytest.approx(5e-4)


class TestSweepSpecValidation:
    def test_rejects_bad_grid(self):
        with pytest.raises(InvalidInputError):
            experiment.SweepSpec(
                method="imat", grid=(), trials=1, pipeline="raw",
                dataset_params=small_params(),
            )
        with pytest.raises(InvalidInputError):
            experiment.SweepSpec(
                method="imat", grid=(2.0, 1.0), trials=1, pipeline="raw",
                dataset_params=small_params(),
            )

    def test_rejects_unknown_method(self):
        with pytest.raises(InvalidInputError):
            experiment.SweepSpec(
                method="ridge", grid=(1.0,), trials=1, pipeline="raw",
                dataset_params=small_params(),
            )

    def test_rejects_bad_dataset_params(self):
        with pytest.raises(InvalidInputError):
            small_params(alpha=1.5)
        with pytest.raises(InvalidInputError):
            small_params(r=11)


class TestRunSweep:
    def test_single_value_single_trial(self):
        spec = experiment.SweepSpec(
            method="lasso", grid=(0.1,), trials=1, pipeline="raw",
            dataset_params=small_params(),
        )
        records = experiment.run_sweep(spec, base_seed=3)
        assert len(records) == 1
        assert records[0].trial_rmses.size == 1
        assert records[0].mean_rmse == pytest.approx(records[0].trial_rmses[0])

    def test_mean_matches_trials(self):
        spec = experiment.SweepSpec(
            method="imat", grid=(1.0, 3.0), trials=4, pipeline="raw",
            dataset_params=small_params(),
        )
        for record in experiment.run_sweep(spec, base_seed=1):
            assert record.mean_rmse == pytest.approx(
                float(np.mean(record.trial_rmses)), abs=1e-12
            )
            assert record.trial_rmses.size == 4

    def test_order_invariance(self):
        params = small_params()
        up = experiment.SweepSpec(
            method="iht", grid=(0.1, 0.5, 1.0), trials=3, pipeline="raw",
            dataset_params=params,
        )
        records_up = experiment.run_sweep(up, base_seed=5)
        by_param_up = {r.parameter: r.mean_rmse for r in records_up}
        # Evaluate a sub-grid: shared parameters must give identical results.
        solo = experiment.SweepSpec(
            method="iht", grid=(0.5,), trials=3, pipeline="raw",
            dataset_params=params,
        )
        record_solo = experiment.run_sweep(solo, base_seed=5)[0]
        assert record_solo.mean_rmse == by_param_up[0.5]

    def test_deterministic_across_runs(self):
        spec = experiment.SweepSpec(
            method="lasso", grid=(0.01, 1.0), trials=3, pipeline="raw",
            dataset_params=small_params(),
        )
        a = experiment.run_sweep(spec, base_seed=11)
        b = experiment.run_sweep(spec, base_seed=11)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.trial_rmses, rb.trial_rmses)

    def test_precompleted_pipeline_runs(self):
        spec = experiment.SweepSpec(
            method="lasso", grid=(0.1,), trials=2, pipeline="precompleted",
            dataset_params=small_params(alpha=0.7),
        )
        records = experiment.run_sweep(spec, base_seed=2)
        assert records[0].trial_rmses.size == 2
        assert np.isfinite(records[0].mean_rmse)

    def test_precompleted_alpha_one_equals_raw(self):
        # Fully observed data: completion with zero shrinkage is the identity,
        # so both pipelines must agree to fine precision.
        params = small_params(alpha=1.0)
        raw = experiment.SweepSpec(
            method="lasso", grid=(0.1,), trials=2, pipeline="raw",
            dataset_params=params,
        )
        pre = experiment.SweepSpec(
            method="lasso", grid=(0.1,), trials=2, pipeline="precompleted",
            dataset_params=params,
        )
        raw_records = experiment.run_sweep(raw, base_seed=7)
        pre_trials = experiment.prepare_trials(pre, 7, completion_grid=[0.0])
        pre_records = experiment.run_sweep(pre, 7, trials_data=pre_trials)
        assert raw_records[0].mean_rmse == pytest.approx(
            pre_records[0].mean_rmse, abs=1e-8
        )

    def test_tiny_noiseless_all_methods_accurate(self):
        # Seed 263 yields a well-conditioned oracle (cond < 3); the gradient
        # methods need that for fast convergence on the full-rank design.
        params = experiment.DatasetParams(
            m=40, n=8, r=8, s=2, alpha=1.0, noise_sigma=0.0
        )
        assert np.linalg.cond(
            datagen.gen_dataset(40, 8, 8, 2, alpha=1.0, noise_sigma=0.0, seed=263).oracle
        ) < 3
        lasso_grid, c_grid, mu_grid = experiment.default_grids()
        mins = {}
        for method, grid in (("imat", c_grid), ("iht", mu_grid), ("lasso", lasso_grid)):
            spec = experiment.SweepSpec(
                method=method, grid=tuple(grid), trials=1, pipeline="raw",
                dataset_params=params,
            )
            records = experiment.run_sweep(spec, base_seed=263)
            mins[method] = experiment.best_record(records).mean_rmse
        for method, value in mins.items():
            assert value < 1e-3, f"{method} best RMSE {value}"


class TestTimeTraining:
    def test_returns_total_fit_seconds(self):
        spec = experiment.SweepSpec(
            method="imat", grid=(1.0, 2.0), trials=2, pipeline="raw",
            dataset_params=small_params(),
        )
        seconds = experiment.time_training(spec, base_seed=0)
        assert seconds > 0.0

    def test_doubling_trials_scales_time(self):
        params = experiment.DatasetParams(
            m=400, n=60, r=20, s=8, alpha=0.8, noise_sigma=0.05
        )
        base = experiment.SweepSpec(
            method="imat", grid=tuple(np.arange(1.0, 8.0)), trials=4,
            pipeline="raw", dataset_params=params,
        )
        double = experiment.SweepSpec(
            method="imat", grid=tuple(np.arange(1.0, 8.0)), trials=8,
            pipeline="raw", dataset_params=params,
        )
        t1 = experiment.time_training(base, base_seed=0)
        t2 = experiment.time_training(double, base_seed=0)
        assert 1.0 <= t2 / t1 <= 4.0  # ~2x with generous scheduling slack


class TestCompleteDesign:
    def test_selects_and_completes(self):
        full = datagen.gen_low_rank(30, 20, 2, seed=42)
        masked = datagen.apply_mask(full, 0.7, seed=43)
        completed = experiment.complete_design(
            masked, shrinkage_grid=[0.001, 0.01, 0.1], holdout_seed=44
        )
        assert completed.shape == full.shape
        hidden = masked.mask == 0.0
        rel = np.linalg.norm((completed - full)[hidden]) / np.linalg.norm(full[hidden])
        assert rel < 0.5

    def test_zero_grid_identity_when_fully_observed(self):
        full = datagen.gen_low_rank(12, 8, 2, seed=1)
        masked = datagen.apply_mask(full, 1.0, seed=2)
        completed = experiment.complete_design(masked, shrinkage_grid=[0.0])
        assert np.array_equal(completed, full)
