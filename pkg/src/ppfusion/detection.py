"""Closed-form detection functions and detection-probability surfaces.

Two observation channels thin the true point pattern:

* Aerial: a whale at distance d (km) from a transect is seen with
  probability pi * f(d), where f is 1 out to a plateau half-width
  (0.75 km) and decays as exp(-(d - plateau)^2) beyond it.

* Acoustic: a call emitted at distance d (m!) from a hydrophone is detected
  when its source level exceeds ambient noise plus an SNR threshold after a
  transmission loss of tl_coeff * log10(d) dB. With source levels uniform
  on [sl_low, sl_high] this gives a clamped linear ramp in log distance.

Unit convention: transect geometry and grids are in km, the acoustic ramp is
in metres. The km -> m conversion happens inside the acoustic surface
builders so callers never handle metres directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppfusion.grid import GriddedField, GridSpec, Transect, points_to_transect

M_PER_KM = 1000.0


@dataclass(frozen=True)
class AerialDetectionParams:
    """Surfacing probability and plateau half-width of the aerial channel."""

    pi: float = 0.4
    plateau_km: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must lie in [0, 1], got {self.pi}")
        if self.plateau_km <= 0:
            raise ValueError(f"plateau must be positive, got {self.plateau_km}")


@dataclass(frozen=True)
class PamDetectionParams:
    """Acoustic detection ramp parameters (all in dB re 1 uPa)."""

    noise_db: float = 104.0
    snr_threshold_db: float = 26.0
    tl_coeff: float = 14.5
    sl_low_db: float = 141.0
    sl_high_db: float = 197.0

    def __post_init__(self):
        if self.sl_low_db >= self.sl_high_db:
            raise ValueError("source-level bounds must satisfy sl_low < sl_high")
        if self.tl_coeff <= 0:
            raise ValueError("transmission loss coefficient must be positive")


@dataclass
class Hydrophone:
    """A bottom-mounted point sensor; noise_db overrides the global level."""

    id: str
    location: np.ndarray
    noise_db: float | None = None

    def __post_init__(self):
        self.location = np.asarray(self.location, dtype=float).reshape(2)


def aerial_f(distance_km, params: AerialDetectionParams = AerialDetectionParams()) -> np.ndarray:
    """Distance-based aerial detection: 1 on the plateau, Gaussian tail beyond.

    Continuous at the plateau edge (both branches equal 1); the tail uses
    squared distance in km with unit rate.
    """
    d = np.asarray(distance_km, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    excess = np.maximum(d - params.plateau_km, 0.0)
    return np.exp(-(excess**2))


def pam_p(distance_m, params: PamDetectionParams = PamDetectionParams(), noise_db: float | None = None) -> np.ndarray:
    """Probability a call at range d (metres) is detected by one hydrophone.

    With Q = snr_threshold + noise + tl_coeff * log10(d): 0 when Q exceeds
    the upper source-level bound, 1 when below the lower bound, otherwise
    1 - (Q - sl_low) / (sl_high - sl_low). At d = 0 the limit Q -> -inf
    gives 1.
    """
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    noise = params.noise_db if noise_db is None else noise_db
    with np.errstate(divide="ignore"):
        q = params.snr_threshold_db + noise + params.tl_coeff * np.log10(d)
    ramp = 1.0 - (q - params.sl_low_db) / (params.sl_high_db - params.sl_low_db)
    return np.clip(ramp, 0.0, 1.0)


def _combine_at_least_one(per_source: np.ndarray) -> np.ndarray:
    """1 - prod(1 - p_k) down axis 0, accumulated as p + q*(1-p).

    The incremental form keeps the identities exact in floating point:
    combining with an all-zero source returns the other operand unchanged,
    and the result never drops below any operand.
    """
    out = np.zeros(per_source.shape[1])
    for row in per_source:
        out = out + row * (1.0 - out)
    return out


def transect_f_surfaces(
    grid: GridSpec, transects: list[Transect], params: AerialDetectionParams
) -> np.ndarray:
    """(L, n_cells) matrix of f(d(centroid, transect_l)); no pi factor."""
    centroids = grid.centroids()
    return np.vstack([aerial_f(points_to_transect(centroids, t), params) for t in transects])


def aerial_surface(
    grid: GridSpec, transects: list[Transect], params: AerialDetectionParams
) -> GriddedField:
    """Probability of detection by at least one transect: 1 - prod(1 - pi f_l)."""
    if not transects:
        raise ValueError("need at least one transect")
    f = transect_f_surfaces(grid, transects, params)
    return GriddedField(grid=grid, values=_combine_at_least_one(params.pi * f))


def hydrophone_p_surfaces(
    grid: GridSpec, hydrophones: list[Hydrophone], params: PamDetectionParams
) -> np.ndarray:
    """(K, n_cells) matrix of per-hydrophone call-detection probabilities."""
    centroids = grid.centroids()
    rows = []
    for h in hydrophones:
        d_km = np.sqrt(((centroids - h.location) ** 2).sum(axis=1))
        rows.append(pam_p(d_km * M_PER_KM, params, noise_db=h.noise_db))
    return np.vstack(rows) if rows else np.empty((0, grid.n_cells))


def pam_surface(
    grid: GridSpec, hydrophones: list[Hydrophone], params: PamDetectionParams
) -> GriddedField:
    """Probability one emitted call is heard by at least one hydrophone."""
    p = hydrophone_p_surfaces(grid, hydrophones, params)
    if p.shape[0] == 0:
        return GriddedField(grid=grid, values=np.zeros(grid.n_cells))
    return GriddedField(grid=grid, values=_combine_at_least_one(p))


def fused_surface(p_a: GriddedField, p_b: GriddedField) -> GriddedField:
    """Joint detection probability 1 - (1 - a)(1 - b), cellwise."""
    if p_a.grid != p_b.grid:
        raise ValueError("detection surfaces live on different grids")
    a, b = p_a.values, p_b.values
    return GriddedField(grid=p_a.grid, values=a + b * (1.0 - a))
