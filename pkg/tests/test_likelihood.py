"""Channel log-likelihoods, their fusion, and the auxiliary-data models."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from ppfusion.detection import (
    AerialDetectionParams,
    Hydrophone,
    PamDetectionParams,
    hydrophone_p_surfaces,
    transect_f_surfaces,
)
from ppfusion.grid import GriddedField, build_grid
from ppfusion.likelihood import (
    build_fit_data,
    callrate_gamma_params,
    log_aux_callrate,
    log_aux_surface,
    loglik_aerial,
    loglik_fused,
    loglik_pam,
    surface_beta_params,
)
from ppfusion.observe import AerialObservation, PamObservation

from conftest import ew_transect


def constant_field(grid, value):
    return GriddedField(grid, np.full(grid.n_cells, value))


def two_cell_grid():
    return build_grid((0, 2, 0, 1), 1.0)


class TestAerialLoglik:
    def test_empty_data_zero_intensity(self):
        g = two_cell_grid()
        ll = loglik_aerial(
            constant_field(g, 0.0),
            [AerialObservation("t", np.empty((0, 2)))],
            [ew_transect("t", 0.5, 0.0, 2.0)],
            AerialDetectionParams(pi=0.4),
        )
        assert ll == 0.0

    def test_single_detection_hand_expansion(self):
        # one transect through the centroids, pi = 1, constant lambda = v:
        # log L = log v - integral(p v)
        g = two_cell_grid()
        v = 1.7
        t = ew_transect("t", 0.5, 0.0, 2.0)
        params = AerialDetectionParams(pi=1.0)
        ll = loglik_aerial(
            constant_field(g, v),
            [AerialObservation("t", np.array([[0.5, 0.5]]))],
            [t],
            params,
        )
        integral = v * 2.0  # f = 1 at both centroids, area 1 each
        assert ll == pytest.approx(math.log(v) - integral, rel=1e-12)

    def test_normalization_by_brute_force_enumeration(self):
        # the discretized likelihood must be a proper density over per-cell,
        # per-transect counts: sum over count configurations of
        # exp(loglik + n log(area) - log n!) == 1 (placement/order constants
        # restored), truncated at 10 counts per cell
        g = two_cell_grid()
        lam = GriddedField(g, np.array([0.9, 1.6]))
        transects = [ew_transect("a", 0.5, 0.0, 2.0), ew_transect("b", 0.9, 0.0, 2.0)]
        params = AerialDetectionParams(pi=0.55)
        centroids = g.centroids()
        total = 0.0
        rng_counts = range(0, 11)
        for counts in itertools.product(rng_counts, repeat=4):  # 2 cells x 2 transects
            obs = []
            log_const = 0.0
            for t_idx, t in enumerate(transects):
                pts = []
                for cell in range(2):
                    n = counts[2 * t_idx + cell]
                    pts.extend([centroids[cell]] * n)
                    log_const += n * math.log(g.cell_area) - math.lgamma(n + 1)
                obs.append(AerialObservation(t.id, np.array(pts).reshape(-1, 2)))
            ll = loglik_aerial(lam, obs, transects, params)
            total += math.exp(ll + log_const)
        # the count-10 truncation leaves ~5e-9 of Poisson tail mass out
        assert total == pytest.approx(1.0, abs=1e-7)

    def test_sentinel_when_detection_impossible(self):
        g = two_cell_grid()
        lam = GriddedField(g, np.array([0.0, 1.0]))  # zero intensity in cell 0
        ll = loglik_aerial(
            lam,
            [AerialObservation("t", np.array([[0.5, 0.5]]))],
            [ew_transect("t", 0.5, 0.0, 2.0)],
            AerialDetectionParams(pi=0.5),
        )
        assert ll == -np.inf

    def test_masked_cell_detection_rejected(self):
        g = two_cell_grid()
        mask = np.array([False, True])
        with pytest.raises(ValueError, match="masked"):
            loglik_aerial(
                constant_field(g, 1.0),
                [AerialObservation("t", np.array([[0.5, 0.5]]))],
                [ew_transect("t", 0.5, 0.0, 2.0)],
                AerialDetectionParams(pi=0.5),
                mask=mask,
            )

    def test_unknown_transect_rejected(self):
        g = two_cell_grid()
        with pytest.raises(ValueError, match="unknown transect"):
            loglik_aerial(
                constant_field(g, 1.0),
                [AerialObservation("zzz", np.array([[0.5, 0.5]]))],
                [ew_transect("t", 0.5, 0.0, 2.0)],
                AerialDetectionParams(pi=0.5),
            )


class TestPamLoglik:
    def test_empty_counts_zero_intensity(self):
        g = two_cell_grid()
        ll = loglik_pam(
            constant_field(g, 0.0),
            [PamObservation("h", 0)],
            [Hydrophone("h", np.array([1.0, 0.5]))],
            3.0,
            PamDetectionParams(),
        )
        assert ll == 0.0

    def test_single_cell_hand_value(self):
        # p = 1 (hydrophone at the centroid), lambda * area = 2, c = 3, Y = 6:
        # log L = -6 + 6 log 6
        g = build_grid((0, 1, 0, 1), 1.0)
        ll = loglik_pam(
            constant_field(g, 2.0),
            [PamObservation("h", 6)],
            [Hydrophone("h", np.array([0.5, 0.5]))],
            3.0,
            PamDetectionParams(),
        )
        assert ll == pytest.approx(-6.0 + 6.0 * math.log(6.0), rel=1e-12)

    def test_matches_poisson_pmf_with_constant(self):
        # restoring the dropped log Y! yields the textbook Poisson log-pmf
        rng = np.random.default_rng(31)
        g = build_grid((0, 4, 0, 4), 1.0)
        hydros = [
            Hydrophone("a", np.array([1.0, 1.0])),
            Hydrophone("b", np.array([3.2, 2.1]), noise_db=106.0),
        ]
        params = PamDetectionParams()
        for _ in range(20):
            lam = GriddedField(g, rng.uniform(0.1, 3.0, g.n_cells))
            c = rng.uniform(0.5, 8.0)
            counts = rng.integers(0, 15, size=2)
            obs = [PamObservation(h.id, int(k)) for h, k in zip(hydros, counts)]
            ll = loglik_pam(lam, obs, hydros, c, params)
            p = hydrophone_p_surfaces(g, hydros, params)
            means = c * g.cell_area * (p @ lam.values)
            oracle = sum(
                stats.poisson.logpmf(k, mu) + math.lgamma(k + 1)
                for k, mu in zip(counts, means)
            )
            assert ll == pytest.approx(oracle, rel=1e-9)

    def test_sentinel_positive_count_zero_mean(self):
        g = two_cell_grid()
        ll = loglik_pam(
            constant_field(g, 0.0),
            [PamObservation("h", 2)],
            [Hydrophone("h", np.array([1.0, 0.5]))],
            3.0,
            PamDetectionParams(),
        )
        assert ll == -np.inf

    def test_window_scale_multiplies_the_rate(self):
        g = two_cell_grid()
        lam = constant_field(g, 1.3)
        hydros = [Hydrophone("h", np.array([1.0, 0.5]))]
        obs = [PamObservation("h", 4)]
        base = loglik_pam(lam, obs, hydros, 2.0, PamDetectionParams(), window_scale=3.5)
        same = loglik_pam(lam, obs, hydros, 7.0, PamDetectionParams(), window_scale=1.0)
        assert base == pytest.approx(same, rel=1e-12)


class TestFusedLoglik:
    def _setup(self, seed):
        rng = np.random.default_rng(seed)
        g = build_grid((0, 4, 0, 4), 1.0)
        lam = GriddedField(g, rng.uniform(0.1, 2.0, g.n_cells))
        transects = [ew_transect("t1", 1.5, 0.0, 4.0), ew_transect("t2", 3.0, 0.0, 4.0)]
        cells = rng.integers(0, g.n_cells, size=4)
        pts = g.centroids()[cells]
        aerial = [
            AerialObservation("t1", pts[:2]),
            AerialObservation("t2", pts[2:]),
        ]
        hydros = [Hydrophone("h", np.array([2.0, 2.0]))]
        pam = [PamObservation("h", int(rng.integers(0, 20)))]
        params_a = AerialDetectionParams(pi=0.45)
        params_p = PamDetectionParams()
        return g, lam, transects, aerial, hydros, pam, params_a, params_p

    def test_additivity_is_exact(self):
        for seed in (1, 2, 3):
            g, lam, ts, aer, hs, pam, pa, pp = self._setup(seed)
            fused = loglik_fused(lam, aer, ts, pa, pam, hs, 2.5, pp)
            parts = loglik_aerial(lam, aer, ts, pa) + loglik_pam(lam, pam, hs, 2.5, pp)
            assert fused == parts  # exact: same code path, summed

    def test_empty_channel_reduces_to_single_source(self):
        g, lam, ts, aer, hs, pam, pa, pp = self._setup(4)
        empty_pam = [PamObservation("h", 0)]
        zero_lam = constant_field(g, 0.0)
        assert loglik_fused(zero_lam, [AerialObservation("t1", np.empty((0, 2))),
                                       AerialObservation("t2", np.empty((0, 2)))],
                            ts, pa, empty_pam, hs, 2.5, pp) == 0.0

    def test_pam_scale_confounding(self):
        # (c, lambda) -> (c/gamma, gamma lambda) leaves the PAM likelihood
        # unchanged
        g, lam, ts, aer, hs, pam, pa, pp = self._setup(5)
        c = 3.0
        base = loglik_pam(lam, pam, hs, c, pp)
        for gamma in (0.5, 2.0, 10.0):
            scaled = loglik_pam(
                GriddedField(g, gamma * lam.values), pam, hs, c / gamma, pp
            )
            assert scaled == pytest.approx(base, rel=1e-9)

    def test_aerial_scale_confounding(self):
        g, lam, ts, aer, hs, pam, pa, pp = self._setup(6)
        base = loglik_aerial(lam, aer, ts, pa)
        for gamma in (0.5, 2.0, 10.0):
            scaled_params = AerialDetectionParams(pi=pa.pi / gamma, plateau_km=pa.plateau_km)
            scaled = loglik_aerial(GriddedField(g, gamma * lam.values), aer, ts, scaled_params)
            assert scaled == pytest.approx(base, rel=1e-9)


class TestAuxiliaryModels:
    def test_callrate_moment_matching(self):
        shape, rate = callrate_gamma_params(6.0, 10.0)
        assert shape == pytest.approx(3.6)
        assert rate == pytest.approx(0.6)
        # mean shape/rate = c, variance shape/rate^2 = 10
        assert shape / rate == pytest.approx(6.0)
        assert shape / rate**2 == pytest.approx(10.0)

    def test_callrate_matches_scipy(self):
        obs = np.array([4.2, 7.9, 5.5])
        for c, var in ((6.0, 10.0), (2.5, 4.0)):
            shape, rate = callrate_gamma_params(c, var)
            oracle = stats.gamma.logpdf(obs, shape, scale=1.0 / rate).sum()
            assert log_aux_callrate(c, obs, var) == pytest.approx(oracle, rel=1e-12)

    def test_callrate_mode_maximizes_density(self):
        c, var = 6.0, 10.0
        shape, rate = callrate_gamma_params(c, var)
        mode = (shape - 1.0) / rate
        at_mode = log_aux_callrate(c, [mode], var)
        for y in (mode * 0.7, mode * 1.3, mode + 1.0):
            assert log_aux_callrate(c, [y], var) < at_mode

    def test_surface_reparameterization(self):
        a, b = surface_beta_params(0.65, 15.0)
        assert a == pytest.approx(9.75)
        assert b == pytest.approx(5.25)

    def test_surface_symmetry_at_half(self):
        for x in (0.1, 0.35, 0.49):
            assert log_aux_surface(0.5, [x]) == pytest.approx(log_aux_surface(0.5, [1 - x]), rel=1e-12)

    def test_surface_matches_scipy(self):
        obs = np.array([0.55, 0.71, 0.62, 0.8])
        for pi in (0.3, 0.66):
            a, b = surface_beta_params(pi, 15.0)
            oracle = stats.beta.logpdf(obs, a, b).sum()
            assert log_aux_surface(pi, obs) == pytest.approx(oracle, rel=1e-12)

    def test_surface_likelihood_peaks_near_sample_mean(self):
        # observations drawn from the mu = 0.66 model: the aux likelihood,
        # profiled over pi, peaks near the sample mean
        rng = np.random.default_rng(66)
        a, b = surface_beta_params(0.66, 15.0)
        obs = rng.beta(a, b, size=200)
        grid_pi = np.linspace(0.02, 0.98, 481)
        lls = [log_aux_surface(p, obs) for p in grid_pi]
        peak = grid_pi[int(np.argmax(lls))]
        assert abs(peak - obs.mean()) < 0.02
        assert abs(peak - 0.66) < 0.05

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            log_aux_callrate(-1.0, [2.0])
        with pytest.raises(ValueError):
            log_aux_callrate(2.0, [0.0])
        with pytest.raises(ValueError):
            log_aux_surface(1.0, [0.5])
        with pytest.raises(ValueError):
            log_aux_surface(0.5, [1.0])


def test_fit_data_precompute_matches_public_ops():
    # the sampler's cached path and the public operations agree
    from ppfusion.likelihood import aerial_loglik_from_stats, lam_stats, pam_loglik_from_stats

    rng = np.random.default_rng(9)
    g = build_grid((0, 4, 0, 4), 1.0)
    lam = GriddedField(g, rng.uniform(0.2, 2.5, g.n_cells))
    transects = [ew_transect("t1", 0.5, 0.0, 4.0)]
    pts = g.centroids()[rng.integers(0, g.n_cells, size=3)]
    aerial = [AerialObservation("t1", pts)]
    hydros = [Hydrophone("h", np.array([2.0, 2.0]))]
    pam = [PamObservation("h", 7)]
    pa, pp = AerialDetectionParams(pi=0.3), PamDetectionParams()
    data = build_fit_data(
        g, transects=transects, aerial_obs=aerial, aerial_params=pa,
        hydrophones=hydros, pam_obs=pam, pam_params=pp,
    )
    stats_cache = lam_stats(lam.values, data)
    assert aerial_loglik_from_stats(stats_cache, pa.pi, data) == pytest.approx(
        loglik_aerial(lam, aerial, transects, pa), rel=1e-12
    )
    assert pam_loglik_from_stats(stats_cache, 2.0, data) == pytest.approx(
        loglik_pam(lam, pam, hydros, 2.0, pp), rel=1e-12
    )
