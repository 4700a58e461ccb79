import numpy as np
import pytest
from scipy import stats

from profiler import (SimulationScenario, discretize, extrapolation_grid,
                      run_study, simulate_factor_matrix)
from profiler.simulation import write_records_csv


class TestSimulateFactorMatrix:
    def test_rank_zero_is_pure_noise_with_identity_sigma(self):
        x, sigma = simulate_factor_matrix(50, 4, 0, seed=0)
        np.testing.assert_array_equal(sigma, np.eye(4))
        assert x.shape == (50, 4)

    def test_empirical_covariance_matches_true_sigma(self):
        x, sigma = simulate_factor_matrix(100_000, 5, 2, seed=1)
        emp = np.cov(x, rowvar=False)
        scale = np.abs(sigma).max()
        assert np.abs(emp - sigma).max() <= 0.05 * scale

    def test_fixed_seed_reproducible(self):
        a, _ = simulate_factor_matrix(20, 6, 3, seed=9)
        b, _ = simulate_factor_matrix(20, 6, 3, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_broadcast_noise_flag_changes_sigma(self):
        _, sigma = simulate_factor_matrix(30, 4, 2, seed=0, noise="broadcast")
        base = sigma - np.ones((4, 4))
        assert np.linalg.matrix_rank(base) == 2

    def test_invalid_rank_error(self):
        with pytest.raises(ValueError, match="rank"):
            simulate_factor_matrix(10, 5, 11, seed=0)


class TestExtrapolationGrid:
    def test_center_point_is_not_extrapolation(self):
        x, sigma = simulate_factor_matrix(200, 6, 3, seed=2)
        grid = extrapolation_grid(x, sigma)
        assert not grid.labels[0]
        assert grid.t2_true[0] < grid.chi2_threshold

    def test_labels_monotone_along_the_ray(self):
        for seed in range(6):
            x, sigma = simulate_factor_matrix(150, 8, 4, seed=seed)
            labels = extrapolation_grid(x, sigma).labels
            first = np.argmax(labels) if labels.any() else len(labels)
            assert (labels[first:]).all() or not labels.any()

    def test_chi2_quantile_boundary(self):
        # p = 2: threshold chi2(0.95) = 5.991; T2_true just above flips the label
        assert stats.chi2.ppf(0.95, 2) == pytest.approx(5.991, abs=1e-3)
        x, sigma = simulate_factor_matrix(100, 2, 1, seed=3)
        grid = extrapolation_grid(x, sigma)
        for t2v, label in zip(grid.t2_true, grid.labels):
            assert label == (t2v > stats.chi2.ppf(0.95, 2))

    def test_corner_violates_correlation_sign(self):
        x, sigma = simulate_factor_matrix(500, 5, 3, seed=4)
        grid = extrapolation_grid(x, sigma)
        k, l = grid.pair
        mean = x.mean(axis=0)
        z = x - mean
        corr = (z.T @ z / len(x))
        corr = corr / np.sqrt(np.outer(np.diag(corr), np.diag(corr)))
        corner = grid.points[-1]
        if corr[k, l] > 0:
            assert corner[k] == x[:, k].max() and corner[l] == x[:, l].min()
        else:
            assert corner[k] == x[:, k].max() and corner[l] == x[:, l].max()


class TestDiscretize:
    def test_two_categories_split_at_median(self, rng):
        x = rng.standard_normal((101, 1))
        # seed chosen so the single column gets 2 levels
        for seed in range(20):
            disc = discretize(x, 1, seed=seed)
            if len(disc.space.factors[0].kind.levels) == 2:
                cut = disc.cut_points[0][0]
                assert cut == pytest.approx(np.median(x), abs=1e-12)
                return
        pytest.fail("no 2-level draw in 20 seeds")

    def test_four_categories_cut_at_quartiles(self, rng):
        x = rng.standard_normal((200, 1))
        for seed in range(20):
            disc = discretize(x, 1, seed=seed)
            if len(disc.space.factors[0].kind.levels) == 4:
                np.testing.assert_allclose(
                    disc.cut_points[0], np.quantile(x, [0.25, 0.5, 0.75]), atol=1e-12)
                return
        pytest.fail("no 4-level draw in 20 seeds")

    def test_level_frequencies_roughly_balanced(self, rng):
        x = rng.standard_normal((1000, 3))
        disc = discretize(x, 3, seed=5)
        for j, f in enumerate(disc.space.factors):
            values = disc.dataset.column(f.name).values
            levels, counts = np.unique(values.astype(str), return_counts=True)
            expected = len(values) / len(f.kind.levels)
            assert np.abs(counts - expected).max() <= 0.1 * len(values)

    def test_apply_maps_new_points_through_same_cuts(self, rng):
        x = rng.standard_normal((100, 2))
        disc = discretize(x, 1, seed=0)
        j = next(iter(disc.cut_points))
        probe = x[:3].copy()
        mapped = disc.apply(probe)
        bins = np.digitize(probe[:, j], disc.cut_points[j])
        levels = disc.space.factors[j].kind.levels
        assert mapped.column(f"x{j + 1}").values.tolist() == [levels[b] for b in bins]


class TestRunStudy:
    def test_reproducible_for_fixed_seed(self):
        sc = SimulationScenario(n=40, p=5, r=2, replicates=3, seed=7)
        a, b = run_study(sc), run_study(sc)
        assert a.to_json() == b.to_json()

    def test_oracle_labels_do_not_depend_on_variant(self):
        base = dict(n=30, p=5, r=2, replicates=2, seed=3)
        reg = run_study(SimulationScenario(variant="regularized", **base))
        pinv = run_study(SimulationScenario(variant="pseudo_inverse", **base))
        assert [r.label for r in reg.records] == [r.label for r in pinv.records]
        assert [r.t2_true for r in reg.records] == [r.t2_true for r in pinv.records]

    def test_large_sample_consistency(self):
        # huge n: FPR stays below alpha and the corner is always caught
        sc = SimulationScenario(n=10_000, p=5, r=2, replicates=3, seed=1)
        result = run_study(sc)
        assert result.fpr is not None and result.fpr <= 0.05
        assert result.fresh_fpr <= 0.05
        top = result.tpr_by_rank[-1]
        assert top.tpr is not None and top.tpr >= 0.99

    def test_records_csv_shape(self, tmp_path):
        sc = SimulationScenario(n=30, p=4, r=2, n_grid=10, replicates=2, seed=0)
        result = run_study(sc)
        path = tmp_path / "records.csv"
        write_records_csv(result, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "replicate,rank,t2_true,label,metric,flagged"
        assert len(lines) == 1 + 2 * 10

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            SimulationScenario(n=10, p=5, r=6)
        with pytest.raises(ValueError):
            SimulationScenario(n=10, p=5, r=2, p_cat=9)
        with pytest.raises(ValueError, match="unknown scenario"):
            SimulationScenario.from_json({"n": 10, "p": 5, "r": 2, "bogus": 1})

    def test_mixed_study_runs_and_aggregates(self):
        sc = SimulationScenario(n=120, p=6, r=3, p_cat=3, replicates=3, seed=2)
        result = run_study(sc)
        assert len(result.tpr_by_rank) == 20
        assert all(s.lam is not None for s in result.replicate_summaries)
