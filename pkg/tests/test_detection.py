"""Closed-form detection functions and composed surfaces."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppfusion.detection import (
    AerialDetectionParams,
    Hydrophone,
    PamDetectionParams,
    aerial_f,
    aerial_surface,
    fused_surface,
    hydrophone_p_surfaces,
    pam_p,
    pam_surface,
)
from ppfusion.grid import GriddedField, Transect, build_grid, points_to_transect

from conftest import ew_transect


class TestAerialF:
    def test_plateau_values(self):
        assert aerial_f(0.0) == 1.0
        assert aerial_f(0.75) == 1.0  # boundary included

    def test_tail_value(self):
        assert aerial_f(1.75) == pytest.approx(np.exp(-1.0))

    def test_continuity_at_plateau_edge(self):
        eps = 1e-9
        assert aerial_f(0.75 + eps) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_nonincreasing(self):
        d = np.linspace(0, 10, 2001)
        f = aerial_f(d)
        assert (np.diff(f) <= 0).all()

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            aerial_f(-0.1)


class TestPamP:
    def test_full_detection_radius(self):
        # Q < 141 iff d < 10^(11/14.5) ~ 5.74 m at 104 dB ambient
        bound = 10 ** (11.0 / 14.5)
        assert bound == pytest.approx(5.7368, abs=1e-3)
        assert pam_p(bound - 1e-6) == 1.0
        assert pam_p(0.0) == 1.0  # defined by the d -> 0 limit

    def test_ramp_value_at_1km(self):
        assert pam_p(1000.0) == pytest.approx(1.0 - 32.5 / 56.0)
        assert pam_p(1000.0) == pytest.approx(0.41964, abs=1e-5)

    def test_zero_detection_radius(self):
        bound = 10 ** (67.0 / 14.5)
        assert bound == pytest.approx(41_751.0, rel=1e-3)  # ~41.75 km
        assert pam_p(bound + 1.0) == 0.0

    def test_monotone_in_distance_and_noise(self):
        d = np.logspace(0, 5, 500)
        p = pam_p(d)
        assert (np.diff(p) <= 0).all()
        quiet = pam_p(d, noise_db=102.9)
        loud = pam_p(d, noise_db=108.1)
        assert (loud <= quiet).all()

    def test_continuity_at_breakpoints(self):
        params = PamDetectionParams()
        lo = 10 ** ((params.sl_low_db - params.noise_db - params.snr_threshold_db) / params.tl_coeff)
        hi = 10 ** ((params.sl_high_db - params.noise_db - params.snr_threshold_db) / params.tl_coeff)
        for d in (lo, hi):
            assert pam_p(d * (1 - 1e-9)) == pytest.approx(pam_p(d * (1 + 1e-9)), abs=1e-6)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            PamDetectionParams(sl_low_db=197.0, sl_high_db=141.0)
        with pytest.raises(ValueError):
            PamDetectionParams(tl_coeff=0.0)


class TestAerialSurface:
    def test_single_transect_on_line_full_pi(self, desk_grid):
        t = ew_transect("t", 20.5)  # passes through centroid row y=20.5
        surf = aerial_surface(desk_grid, [t], AerialDetectionParams(pi=1.0))
        row = surf.values[desk_grid.cell_index(np.array([[0.5, 20.5]]))[0]]
        assert row == 1.0

    def test_two_coincident_transects_complement_product(self, desk_grid):
        t1, t2 = ew_transect("a", 20.5), ew_transect("b", 20.5)
        params = AerialDetectionParams(pi=0.4)
        surf = aerial_surface(desk_grid, [t1, t2], params)
        idx = desk_grid.cell_index(np.array([[10.5, 20.5]]))[0]
        assert surf.values[idx] == pytest.approx(1.0 - 0.36)

    def test_study_layout_ridges_and_independent_recompute(self, desk_grid):
        transects = [ew_transect(f"t{i}", 2.5 + 5.0 * i) for i in range(8)]
        params = AerialDetectionParams(pi=0.4)
        surf = aerial_surface(desk_grid, transects, params)
        # ridge cells along each transect sit at ~pi, decaying between
        on_line = desk_grid.cell_index(np.array([[15.5, 2.5]]))[0]
        between = desk_grid.cell_index(np.array([[15.5, 5.0 - 0.5]]))[0]
        assert surf.values[on_line] == pytest.approx(0.4, abs=1e-6)
        assert surf.values[between] < surf.values[on_line]
        # cell-by-cell recomputation from first principles
        cents = desk_grid.centroids()
        expect = np.ones(desk_grid.n_cells)
        for t in transects:
            expect *= 1.0 - params.pi * aerial_f(points_to_transect(cents, t), params)
        np.testing.assert_allclose(surf.values, 1.0 - expect, atol=1e-12)
        assert ((surf.values >= 0) & (surf.values <= 1)).all()

    def test_needs_a_transect(self, small_grid):
        with pytest.raises(ValueError):
            aerial_surface(small_grid, [], AerialDetectionParams())


class TestPamSurface:
    def test_hydrophone_at_centroid_gives_one(self, small_grid):
        h = Hydrophone("h", np.array([0.5, 0.5]))  # exactly a centroid
        surf = pam_surface(small_grid, [h], PamDetectionParams())
        assert surf.values[0] == 1.0

    def test_zero_hydrophones_zero_surface(self, small_grid):
        surf = pam_surface(small_grid, [], PamDetectionParams())
        assert (surf.values == 0.0).all()

    def test_noise_override_reduces_detection(self, desk_grid):
        quiet = Hydrophone("q", np.array([20.0, 20.0]), noise_db=102.9)
        loud = Hydrophone("l", np.array([20.0, 20.0]), noise_db=108.1)
        params = PamDetectionParams()
        pq = hydrophone_p_surfaces(desk_grid, [quiet], params)
        pl = hydrophone_p_surfaces(desk_grid, [loud], params)
        assert (pl <= pq).all() and (pl < pq).any()

    def test_fused_minus_single_nonnegative(self, desk_grid):
        # adding a channel can only increase detection probability
        hydros = [
            Hydrophone(f"h{i}", loc)
            for i, loc in enumerate(
                (np.array([x, y]) for x in (6.7, 20.0, 33.3) for y in (6.7, 20.0, 33.3))
            )
        ]
        p_pam = pam_surface(desk_grid, hydros, PamDetectionParams())
        transects = [ew_transect(f"t{i}", 2.5 + 5.0 * i) for i in range(8)]
        p_air = aerial_surface(desk_grid, transects, AerialDetectionParams(pi=0.4))
        fused = fused_surface(p_air, p_pam)
        assert (fused.values - p_pam.values >= 0).all()
        assert (fused.values - p_air.values >= 0).all()


class TestFusedSurface:
    def test_hand_value(self, unit_grid):
        a = GriddedField(unit_grid, np.array([0.4]))
        b = GriddedField(unit_grid, np.array([0.5]))
        assert fused_surface(a, b).values[0] == pytest.approx(0.7)

    def test_identity_and_absorbing_elements(self, small_grid):
        rng = np.random.default_rng(0)
        a = GriddedField(small_grid, rng.uniform(0, 1, small_grid.n_cells))
        zero = GriddedField(small_grid, np.zeros(small_grid.n_cells))
        one = GriddedField(small_grid, np.ones(small_grid.n_cells))
        assert np.array_equal(fused_surface(a, zero).values, a.values)  # exact
        assert np.array_equal(fused_surface(one, one).values, np.ones(small_grid.n_cells))

    def test_grid_mismatch(self, small_grid, unit_grid):
        a = GriddedField(small_grid, np.zeros(small_grid.n_cells))
        b = GriddedField(unit_grid, np.zeros(1))
        with pytest.raises(ValueError, match="grid"):
            fused_surface(a, b)

    def test_dominates_both_inputs_exactly(self, desk_grid):
        rng = np.random.default_rng(42)
        av = rng.random(desk_grid.n_cells)
        bv = rng.random(desk_grid.n_cells)
        fused = fused_surface(GriddedField(desk_grid, av), GriddedField(desk_grid, bv)).values
        assert (fused >= np.maximum(av, bv)).all()
        # equality exactly where one channel contributes nothing
        eq = fused == np.maximum(av, bv)
        assert np.array_equal(eq, np.minimum(av, bv) == 0.0) or not eq.any()

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_bounds_property(self, a, b):
        fused = a + b * (1.0 - a)
        assert 0.0 <= fused <= 1.0
        assert fused >= max(a, b) or np.isclose(fused, max(a, b))
