"""Intensity construction and point-pattern simulation."""

import numpy as np
import pytest
from scipy import stats

from ppfusion.grid import GriddedField, build_grid, integrate_field
from ppfusion.intensity import (
    IntensityModel,
    PointPattern,
    build_intensity,
    count_in_region,
    simulate_pattern,
)


def constant_field(grid, value):
    return GriddedField(grid, np.full(grid.n_cells, value))


class TestBuildIntensity:
    def test_study_coefficients_with_null_covariates(self, small_grid):
        covs = [constant_field(small_grid, 0.0) for _ in range(3)]
        lam = build_intensity(
            IntensityModel(beta=[-3.8, 0.3, 0.6, 0.9], covariates=covs), small_grid
        )
        np.testing.assert_allclose(lam.values, np.exp(-3.8))
        assert lam.values[0] == pytest.approx(0.022371, abs=1e-6)

    def test_zero_intercept_gives_unit_intensity(self, small_grid):
        lam = build_intensity(IntensityModel(beta=[0.0]), small_grid)
        np.testing.assert_array_equal(lam.values, 1.0)

    def test_log_two_covariate(self, small_grid):
        lam = build_intensity(
            IntensityModel(beta=[0.0, 1.0], covariates=[constant_field(small_grid, np.log(2.0))]),
            small_grid,
        )
        np.testing.assert_allclose(lam.values, 2.0)

    def test_latent_field_enters_log_scale(self, small_grid):
        w = constant_field(small_grid, 0.5)
        lam = build_intensity(IntensityModel(beta=[1.0], latent=w), small_grid)
        np.testing.assert_allclose(lam.values, np.exp(1.5))

    def test_dimension_mismatch_errors(self, small_grid):
        other = build_grid((0, 2, 0, 2), 1.0)
        with pytest.raises(ValueError, match="different grid"):
            build_intensity(
                IntensityModel(beta=[0.0, 1.0], covariates=[constant_field(other, 1.0)]),
                small_grid,
            )
        with pytest.raises(ValueError, match="covariates"):
            IntensityModel(beta=[0.0, 1.0, 2.0], covariates=[constant_field(small_grid, 0.0)])


class TestSimulatePattern:
    def test_zero_intensity_empty_pattern(self, small_grid):
        pat = simulate_pattern(constant_field(small_grid, 0.0), 5)
        assert pat.n == 0

    def test_negative_intensity_rejected(self, small_grid):
        field = constant_field(small_grid, 1.0)
        field.values[3] = -0.1
        with pytest.raises(ValueError, match="nonnegative"):
            simulate_pattern(field, 5)

    def test_deterministic_given_seed(self, small_grid):
        field = constant_field(small_grid, 2.0)
        a = simulate_pattern(field, 99)
        b = simulate_pattern(field, 99)
        assert np.array_equal(a.points, b.points)

    def test_expected_count_matches_study_total(self, desk_grid):
        # constant intensity tuned to 86.10 expected whales over the domain
        field = constant_field(desk_grid, 86.10 / 1600.0)
        n = 10_000
        counts = np.array([simulate_pattern(field, [1, i]).n for i in range(n)])
        se = np.sqrt(86.10 / n)
        assert abs(counts.mean() - 86.10) < 3 * se

    def test_single_hot_cell_chi_square(self, small_grid):
        values = np.zeros(small_grid.n_cells)
        values[9] = 7.0  # Poisson mean 7 in one cell
        field = GriddedField(small_grid, values)
        counts = []
        for i in range(4000):
            pat = simulate_pattern(field, [2, i])
            if pat.n:
                assert (small_grid.cell_index(pat.points) == 9).all()
            counts.append(pat.n)
        counts = np.asarray(counts)
        edges = np.arange(0, 16)
        observed = np.array([(counts == k).sum() for k in edges])
        observed = np.append(observed, (counts > edges[-1]).sum())
        pmf = stats.poisson.pmf(edges, 7.0)
        expected = np.append(pmf, 1.0 - pmf.sum()) * counts.size
        keep = expected > 5
        chi2 = ((observed[keep] - expected[keep]) ** 2 / expected[keep]).sum()
        p = stats.chi2.sf(chi2, keep.sum() - 1)
        assert p > 0.01

    def test_mean_count_equals_quadrature(self, small_grid):
        rng_field = np.random.default_rng(4)
        field = GriddedField(small_grid, rng_field.uniform(0.5, 3.0, small_grid.n_cells))
        target = integrate_field(field)
        n = 10_000
        counts = np.array([simulate_pattern(field, [3, i]).n for i in range(n)])
        assert abs(counts.mean() - target) < 3 * np.sqrt(target / n)

    def test_disjoint_region_counts_uncorrelated(self, small_grid):
        field = constant_field(small_grid, 1.5)
        left = np.zeros(small_grid.n_cells, dtype=bool)
        left[small_grid.centroids()[:, 0] < 2.0] = True
        n = 10_000
        pairs = np.empty((n, 2))
        for i in range(n):
            pat = simulate_pattern(field, [5, i])
            pairs[i] = (
                count_in_region(pat, left, small_grid),
                count_in_region(pat, ~left, small_grid),
            )
        r = np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]
        assert abs(r) < 0.05

    def test_superposition(self, small_grid):
        # simulating from lam1 + lam2 matches the union of independent draws
        rng_field = np.random.default_rng(8)
        v1 = rng_field.uniform(0.2, 1.0, small_grid.n_cells)
        v2 = rng_field.uniform(0.2, 1.0, small_grid.n_cells)
        f1, f2 = GriddedField(small_grid, v1), GriddedField(small_grid, v2)
        fsum = GriddedField(small_grid, v1 + v2)
        n = 4000
        totals_sum = np.array([simulate_pattern(fsum, [6, i]).n for i in range(n)])
        totals_union = np.array(
            [simulate_pattern(f1, [7, i]).n + simulate_pattern(f2, [8, i]).n for i in range(n)]
        )
        p = stats.ks_2samp(totals_sum, totals_union).pvalue
        assert p > 0.01

    def test_mask_suppresses_cells(self, small_grid):
        field = constant_field(small_grid, 5.0)
        mask = np.zeros(small_grid.n_cells, dtype=bool)
        mask[0] = True
        pat = simulate_pattern(field, 11, mask=mask)
        assert (small_grid.cell_index(pat.points) == 0).all()


class TestCountInRegion:
    def test_empty_pattern(self, small_grid):
        empty = PointPattern(points=np.empty((0, 2)))
        assert count_in_region(empty, np.ones(small_grid.n_cells, dtype=bool), small_grid) == 0

    def test_all_cells_mask_counts_everything(self, small_grid):
        pat = simulate_pattern(constant_field(small_grid, 3.0), 13)
        assert count_in_region(pat, np.ones(small_grid.n_cells, dtype=bool), small_grid) == pat.n

    def test_subregion_tally_matches_manual_count(self, desk_grid):
        pat = simulate_pattern(constant_field(desk_grid, 0.1), 17)
        cents = desk_grid.centroids()
        box = (cents[:, 0] >= 10) & (cents[:, 0] <= 20) & (cents[:, 1] >= 5) & (cents[:, 1] <= 15)
        manual = sum(
            1
            for x, y in pat.points
            if 10 <= np.floor(x) + 0.5 <= 20 and 5 <= np.floor(y) + 0.5 <= 15
        )
        assert count_in_region(pat, box, desk_grid) == manual

    def test_mark_length_validation(self):
        with pytest.raises(ValueError, match="mark"):
            PointPattern(points=np.zeros((3, 2)), marks={"calls": np.array([1, 2])})
