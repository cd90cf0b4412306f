import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from models.belief import (
    BeliefDistribution,
    BeliefError,
    BinGrid,
    SocialHistogram,
    dist_mean,
    dist_mode,
    histogram_to_distribution,
    kl_divergence,
    kl_matrix,
    make_grid,
    point_to_distribution,
    smooth_distribution,
)


def _dist(mass, lower=0.0, upper=None):
    grid = BinGrid(lower, upper if upper is not None else float(len(mass)), len(mass))
    return BeliefDistribution(grid, np.asarray(mass, dtype=float))


class TestBinGrid:
    def test_edges_and_centers(self):
        grid = BinGrid(0.0, 3.0, 3)
        np.testing.assert_allclose(grid.edges, [0.0, 1.0, 2.0, 3.0])
        np.testing.assert_allclose(grid.centers, [0.5, 1.5, 2.5])
        assert grid.width == 1.0

    def test_last_edge_is_exactly_upper(self):
        grid = BinGrid(0.1, 0.7, 7)
        assert grid.edges[-1] == 0.7

    def test_bin_index_clamps_out_of_range_values(self):
        grid = BinGrid(0.0, 10.0, 10)
        assert grid.bin_index(3.7) == 3
        assert grid.bin_index(-5.0) == 0
        assert grid.bin_index(10.0) == 9
        np.testing.assert_array_equal(grid.bin_index([0.0, 9.99, 42.0]), [0, 9, 9])

    @pytest.mark.parametrize("lower,upper,bins", [(1.0, 1.0, 10), (2.0, 1.0, 10), (0.0, 1.0, 1)])
    def test_degenerate_grid_rejected(self, lower, upper, bins):
        with pytest.raises(BeliefError, match="degenerate grid"):
            BinGrid(lower, upper, bins)


class TestMakeGrid:
    def test_padding_around_range(self):
        grid = make_grid([1.0, 2.0, 3.0], 4)
        assert grid.lower == pytest.approx(0.9)
        assert grid.upper == pytest.approx(3.1)
        assert grid.bin_count == 4

    def test_single_value_gets_unit_span(self):
        grid = make_grid([5.0, 5.0], 10)
        assert (grid.lower, grid.upper) == (4.5, 5.5)

    def test_no_observations(self):
        with pytest.raises(BeliefError, match="no observations"):
            make_grid([], 10)

    def test_one_bin_is_degenerate(self):
        with pytest.raises(BeliefError, match="degenerate grid"):
            make_grid([1.0, 2.0], 1)


class TestPointToDistribution:
    def test_gaussian_kernel_weights(self):
        dist = point_to_distribution(1.5, BinGrid(0.0, 3.0, 3), 'gaussian', 1.0)
        weights = np.array([math.exp(-0.5), 1.0, math.exp(-0.5)])
        np.testing.assert_allclose(dist.mass, weights / weights.sum(), rtol=1e-12)
        np.testing.assert_allclose(dist.mass, [0.274069, 0.451863, 0.274069], atol=1e-6)

    def test_delta_kernel_then_mode_recovers_bin_center(self):
        grid = BinGrid(0.0, 10.0, 10)
        dist = point_to_distribution(3.7, grid, 'delta')
        assert dist.mass[3] == 1.0
        assert dist_mode(dist) == pytest.approx(3.5)

    def test_point_off_grid(self):
        with pytest.raises(BeliefError, match="point off grid"):
            point_to_distribution(20.0, BinGrid(0.0, 10.0, 10))

    def test_narrow_kernel_does_not_underflow(self):
        dist = point_to_distribution(0.05, BinGrid(0.0, 100.0, 10), 'gaussian', 1e-3)
        assert dist.mass[0] == pytest.approx(1.0)

    def test_unknown_kernel(self):
        with pytest.raises(BeliefError, match="unknown kernel"):
            point_to_distribution(1.0, BinGrid(0.0, 3.0, 3), 'box')


class TestHistograms:
    def test_laplace_smoothing(self):
        hist = SocialHistogram(BinGrid(0.0, 3.0, 3), [2, 0, 1])
        np.testing.assert_allclose(histogram_to_distribution(hist, 1.0).mass, [3 / 6, 1 / 6, 2 / 6])
        np.testing.assert_allclose(histogram_to_distribution(hist, 0.0).mass, [2 / 3, 0.0, 1 / 3])

    def test_smoothing_gives_positive_mass(self):
        hist = SocialHistogram(BinGrid(0.0, 5.0, 5), [0, 0, 7, 0, 0])
        assert histogram_to_distribution(hist, 0.5).is_strictly_positive()

    def test_empty_histogram_rejected(self):
        with pytest.raises(BeliefError, match="empty histogram"):
            SocialHistogram(BinGrid(0.0, 3.0, 3), [0, 0, 0])

    @pytest.mark.parametrize("counts", [[1, -1, 2], [1.5, 0, 0], [1, 2]])
    def test_invalid_counts_rejected(self, counts):
        with pytest.raises(BeliefError):
            SocialHistogram(BinGrid(0.0, 3.0, 3), counts)

    def test_mean_and_std(self):
        hist = SocialHistogram(BinGrid(0.0, 3.0, 3), [1, 0, 1])
        assert hist.mean() == pytest.approx(1.5)
        assert hist.std() == pytest.approx(1.0)

    def test_from_values(self):
        hist = SocialHistogram.from_values([0.2, 0.4, 2.9], BinGrid(0.0, 3.0, 3))
        np.testing.assert_array_equal(hist.counts, [2, 0, 1])

    def test_rebin_preserves_total(self):
        hist = SocialHistogram(BinGrid(0.0, 10.0, 10), np.arange(10))
        rebinned = hist.rebin(BinGrid(-1.0, 11.0, 4))
        assert rebinned.total == hist.total
        assert rebinned.grid.bin_count == 4

    def test_equality_compares_counts(self):
        grid = BinGrid(0.0, 3.0, 3)
        assert SocialHistogram(grid, [1, 2, 3]) == SocialHistogram(grid, [1, 2, 3])
        assert SocialHistogram(grid, [1, 2, 3]) != SocialHistogram(grid, [3, 2, 1])


class TestSummaries:
    def test_mean(self):
        assert dist_mean(_dist([0.2, 0.5, 0.3])) == pytest.approx(1.6)

    def test_mode(self):
        assert dist_mode(_dist([0.2, 0.5, 0.3])) == 1.5

    def test_mode_tie_goes_to_lowest_index(self):
        assert dist_mode(_dist([0.5, 0.5, 0.0])) == 0.5

    def test_smooth_distribution(self):
        smoothed = smooth_distribution(_dist([1.0, 0.0]), 1e-6)
        assert smoothed.is_strictly_positive()
        assert smoothed.mass.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(smooth_distribution(_dist([0.25, 0.75]), 0.0).mass, [0.25, 0.75])


class TestKLDivergence:
    def test_identity(self):
        p = _dist([0.1, 0.2, 0.7])
        assert kl_divergence(p, p) == 0.0

    def test_direct_summation(self):
        expected = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
        assert kl_divergence(_dist([0.5, 0.5]), _dist([0.75, 0.25])) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.1438, abs=1e-4)

    def test_zero_mass_convention(self):
        assert kl_divergence(_dist([1.0, 0.0]), _dist([0.5, 0.5])) == pytest.approx(math.log(2))

    def test_support_mismatch(self):
        with pytest.raises(BeliefError, match="unsmoothed support mismatch"):
            kl_divergence(_dist([0.5, 0.5]), _dist([1.0, 0.0]))

    def test_mismatched_grids(self):
        with pytest.raises(BeliefError, match="mismatched grids"):
            kl_divergence(_dist([0.5, 0.5]), _dist([0.5, 0.5], upper=4.0))

    def test_matrix_matches_pairwise_calls(self):
        dists = [_dist([0.2, 0.3, 0.5]), _dist([0.6, 0.3, 0.1]), _dist([1 / 3, 1 / 3, 1 / 3])]
        matrix = kl_matrix(dists)
        for i, p in enumerate(dists):
            for j, q in enumerate(dists):
                assert matrix[i, j] == (0.0 if i == j else kl_divergence(p, q))
        assert matrix[0, 1] != matrix[1, 0]

    def test_matrix_of_identical_distributions_is_zero(self):
        dist = _dist([0.2, 0.8])
        np.testing.assert_array_equal(kl_matrix([dist] * 4), np.zeros((4, 4)))
        np.testing.assert_array_equal(kl_matrix([dist]), [[0.0]])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=4),
           st.lists(st.floats(0.0, 10.0), min_size=4, max_size=4))
    def test_non_negative_on_smoothed_pairs(self, a, b):
        grid = BinGrid(0.0, 4.0, 4)
        p = smooth_distribution(BeliefDistribution(grid, np.full(4, 0.25)) if sum(a) == 0
                                else BeliefDistribution.from_weights(grid, a))
        q = smooth_distribution(BeliefDistribution(grid, np.full(4, 0.25)) if sum(b) == 0
                                else BeliefDistribution.from_weights(grid, b))
        assert kl_divergence(p, q) >= 0.0


class TestDistributionInvariants:
    def test_randomized_constructions(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            bins = int(rng.integers(2, 60))
            lower = float(rng.uniform(1.0, 500.0))
            grid = BinGrid(lower, lower + float(rng.uniform(0.5, 200.0)), bins)
            choice = rng.integers(3)
            if choice == 0:
                point = float(rng.uniform(grid.lower, grid.upper))
                kernel = 'delta' if rng.random() < 0.3 else 'gaussian'
                dist = point_to_distribution(point, grid, kernel, float(rng.uniform(0.1, 3.0)) * grid.width)
            elif choice == 1:
                counts = rng.integers(0, 20, bins)
                counts[rng.integers(bins)] += 1
                smoothing = float(rng.uniform(0.0, 2.0))
                dist = histogram_to_distribution(SocialHistogram(grid, counts), smoothing)
                if smoothing > 0:
                    assert dist.is_strictly_positive()
            else:
                dist = BeliefDistribution.from_weights(grid, rng.random(bins))

            assert np.all(dist.mass >= 0)
            assert abs(dist.mass.sum() - 1.0) <= 1e-9
            assert grid.lower <= dist_mean(dist) <= grid.upper

            smoothed = smooth_distribution(dist, float(rng.uniform(1e-9, 1e-2)))
            assert smoothed.is_strictly_positive()
            assert abs(smoothed.mass.sum() - 1.0) <= 1e-9
            assert kl_divergence(smoothed, smoothed) == 0.0
            assert kl_divergence(dist, smoothed) >= 0.0

    def test_kl_is_zero_only_for_equal_inputs(self):
        rng = np.random.default_rng(8)
        grid = BinGrid(0.0, 10.0, 10)
        for _ in range(2_000):
            p = smooth_distribution(BeliefDistribution.from_weights(grid, rng.uniform(0.1, 1.0, 10)))
            # Move mass between two bins: below, then well above the equality tolerance
            i, j = rng.choice(10, size=2, replace=False)
            for shift in (0.0, 1e-14, 5e-13, 1e-6, float(rng.uniform(1e-4, 0.5)) * min(p.mass[i], p.mass[j])):
                mass = p.mass.copy()
                mass[i] += shift
                mass[j] -= shift
                q = BeliefDistribution(grid, mass)
                close = np.max(np.abs(p.mass - q.mass)) < 1e-12
                assert (kl_divergence(p, q) == 0.0) == close
                assert (kl_divergence(q, p) == 0.0) == close

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(0.01, 1e3), st.integers(2, 200), st.floats(0.0, 1.0))
    def test_gaussian_kernel_is_a_distribution(self, lower, span, bins, position):
        grid = BinGrid(lower, lower + span, bins)
        dist = point_to_distribution(lower + position * span, grid)
        assert np.all(dist.mass >= 0)
        assert abs(dist.mass.sum() - 1.0) <= 1e-9

    @pytest.mark.parametrize("bins", [10, 100, 1000])
    def test_mean_converges_under_grid_refinement(self, bins):
        grid = BinGrid(0.0, 100.0, bins)
        point = 37.3
        assert abs(dist_mean(point_to_distribution(point, grid, 'delta')) - point) <= grid.width / 2 + 1e-9
        assert abs(dist_mean(point_to_distribution(point, grid, 'gaussian')) - point) <= grid.width
