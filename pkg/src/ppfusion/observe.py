"""Synthetic observation channels: thin a true pattern into observed data.

This is the generative sampling model. Aerial detection trials use the exact
whale-to-transect distance (not the cell-centroid distance the fitting model
later discretizes to), and surfacing is folded into each per-transect
Bernoulli probability pi * f(d), so trials are independent across transects.
Calls are emitted from the whale's static location; neither channel produces
false positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ppfusion.detection import (
    M_PER_KM,
    AerialDetectionParams,
    Hydrophone,
    PamDetectionParams,
    aerial_f,
    pam_p,
)
from ppfusion.grid import GriddedField, Transect, points_to_transect
from ppfusion.intensity import PointPattern, simulate_pattern


@dataclass
class AerialObservation:
    """Detections attributed to one transect; coordinates are exact."""

    transect_id: str
    detections: np.ndarray

    def __post_init__(self):
        self.detections = np.asarray(self.detections, dtype=float).reshape(-1, 2)


@dataclass
class PamObservation:
    """Call count recorded at one hydrophone over the observation window."""

    hydrophone_id: str
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("call count must be nonnegative")


def simulate_aerial(
    pattern: PointPattern,
    transects: list[Transect],
    aerial_params: AerialDetectionParams,
    rng_seed,
) -> list[AerialObservation]:
    """Per whale and transect, an independent Bernoulli(pi * f(d)) trial."""
    rng = np.random.default_rng(rng_seed)
    observations = []
    for t in transects:
        if pattern.n == 0:
            observations.append(AerialObservation(t.id, np.empty((0, 2))))
            continue
        d = points_to_transect(pattern.points, t)
        p = aerial_params.pi * aerial_f(d, aerial_params)
        seen = rng.random(pattern.n) < p
        observations.append(AerialObservation(t.id, pattern.points[seen]))
    return observations


def simulate_pam(
    pattern: PointPattern,
    hydrophones: list[Hydrophone],
    call_rate_c: float,
    pam_params: PamDetectionParams,
    rng_seed,
) -> list[PamObservation]:
    """Poisson(c) calls per whale, each independently heard by each hydrophone.

    Counts at a hydrophone given a whale's number of calls are binomial, and
    are independent across hydrophones, so the per-call trials are drawn as
    one binomial per (whale, hydrophone) pair.
    """
    if call_rate_c < 0:
        raise ValueError("call rate must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    calls = rng.poisson(call_rate_c, size=pattern.n) if pattern.n else np.empty(0, dtype=int)
    observations = []
    for h in hydrophones:
        if pattern.n == 0:
            observations.append(PamObservation(h.id, 0))
            continue
        d_km = np.sqrt(((pattern.points - h.location) ** 2).sum(axis=1))
        p = pam_p(d_km * M_PER_KM, pam_params, noise_db=h.noise_db)
        detected = rng.binomial(calls, p)
        observations.append(PamObservation(h.id, int(detected.sum())))
    return observations


@dataclass
class ThinningEstimatorSummary:
    """Monte Carlo behaviour of the inverse-probability abundance estimator."""

    estimates: np.ndarray
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=float)
        self.mean = float(self.estimates.mean())
        self.variance = float(self.estimates.var(ddof=1))


def thinning_estimator_check(
    p_surface: GriddedField,
    replicates: int,
    rng_seed,
    pattern: PointPattern | None = None,
    intensity: GriddedField | None = None,
) -> ThinningEstimatorSummary:
    """Monte Carlo mean/variance of sum_k N_k / p_k under Bernoulli thinning.

    Exactly one of `pattern` and `intensity` must be given. With a fixed
    pattern only the thinning is replicated (the estimator is conditionally
    unbiased for that pattern's N). With an intensity the pattern itself is
    redrawn each replicate, so for a Poisson pattern with constant retention
    p the estimator variance is lambda(D) / p.
    """
    if (pattern is None) == (intensity is None):
        raise ValueError("pass exactly one of pattern or intensity")
    grid = p_surface.grid
    p = p_surface.values
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("retention probabilities must lie in (0, 1]")

    rng = np.random.default_rng(rng_seed)
    estimates = np.empty(replicates)
    for r in range(replicates):
        pat = pattern if pattern is not None else simulate_pattern(intensity, rng.integers(2**63))
        if pat.n == 0:
            estimates[r] = 0.0
            continue
        p_at = p[grid.cell_index(pat.points)]
        kept = rng.random(pat.n) < p_at
        estimates[r] = float((1.0 / p_at[kept]).sum())
    return ThinningEstimatorSummary(estimates=estimates)
