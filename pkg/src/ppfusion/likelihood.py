"""Discretized log-likelihoods for the two channels and their fusion.

Aerial channel (per-transect thinned point patterns):

    log L = -sum_l int p_l lambda + sum_l sum_{s in S_l} log(p_l(s) lambda(s))

with p_l(s) = pi * f(d(s, l)). Acoustic channel (per-hydrophone counts):

    log L = sum_k [ -lam_k + Y_k log lam_k ],   lam_k = c * int p_k lambda

where the Y_k! constant is dropped. All integrals are midpoint sums over the
grid, and both p and lambda are evaluated at the centroid of the cell
containing a detection, so the aerial likelihood is exactly the density of
independent per-cell Poisson counts with uniform placement inside cells.

A detection in a cell where p * lambda = 0 (and a positive count at a
hydrophone with lam_k = 0) yields -inf, which a sampler simply rejects.

The auxiliary-data models tie the scale parameters to tag observations: call
rates via a Gamma with mean c and fixed variance, surfacing fractions via a
Beta with mean pi and fixed sample size nu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ppfusion.detection import (
    AerialDetectionParams,
    Hydrophone,
    PamDetectionParams,
    hydrophone_p_surfaces,
    transect_f_surfaces,
)
from ppfusion.grid import GriddedField, GridSpec, Transect
from ppfusion.observe import AerialObservation, PamObservation

NEG_INF = float("-inf")


@dataclass
class FitData:
    """Everything the likelihood needs, precomputed on the active cells.

    Surfaces are stored restricted to active (unmasked) cells; `active` maps
    back to full-grid indices. The aerial f-surfaces carry no pi factor and
    the acoustic surfaces no call-rate factor, so both scale parameters can
    vary during sampling without recomputation.
    """

    grid: GridSpec
    active: np.ndarray  # bool, full grid
    cell_area: float
    # aerial channel (None when the source is absent)
    f_sum: np.ndarray | None = None  # (n_act,) sum over transects of f
    det_cells: np.ndarray | None = None  # active-cell index per detection
    sum_log_f_det: float = 0.0
    n_det: int = 0
    # acoustic channel
    p_pam: np.ndarray | None = None  # (K, n_act)
    y: np.ndarray | None = None  # (K,)
    window_scale: float = 1.0

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def has_aerial(self) -> bool:
        return self.f_sum is not None

    @property
    def has_pam(self) -> bool:
        return self.p_pam is not None


def _resolve_mask(grid: GridSpec, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return np.ones(grid.n_cells, dtype=bool)
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != grid.n_cells:
        raise ValueError("mask length does not match grid cell count")
    return mask


def build_fit_data(
    grid: GridSpec,
    mask: np.ndarray | None = None,
    transects: list[Transect] | None = None,
    aerial_obs: list[AerialObservation] | None = None,
    aerial_params: AerialDetectionParams | None = None,
    hydrophones: list[Hydrophone] | None = None,
    pam_obs: list[PamObservation] | None = None,
    pam_params: PamDetectionParams | None = None,
    window_scale: float = 1.0,
) -> FitData:
    """Precompute likelihood inputs; pass only the channels being fitted."""
    active = _resolve_mask(grid, mask)
    act_idx = np.flatnonzero(active)
    full_to_active = np.full(grid.n_cells, -1)
    full_to_active[act_idx] = np.arange(act_idx.size)
    data = FitData(grid=grid, active=active, cell_area=grid.cell_area, window_scale=window_scale)

    if transects is not None:
        if aerial_obs is None or aerial_params is None:
            raise ValueError("aerial channel needs transects, observations, and parameters")
        by_id = {t.id: i for i, t in enumerate(transects)}
        f_full = transect_f_surfaces(grid, transects, aerial_params)  # (L, n)
        data.f_sum = f_full[:, act_idx].sum(axis=0)
        cells, log_f = [], []
        for obs in aerial_obs:
            if obs.transect_id not in by_id:
                raise ValueError(f"observation references unknown transect {obs.transect_id!r}")
            if obs.detections.shape[0] == 0:
                continue
            cell = grid.cell_index(obs.detections)
            if not active[cell].all():
                raise ValueError("aerial detection falls in a masked cell")
            f_at = f_full[by_id[obs.transect_id], cell]
            cells.append(full_to_active[cell])
            with np.errstate(divide="ignore"):
                log_f.append(np.log(f_at))
        if cells:
            data.det_cells = np.concatenate(cells)
            data.sum_log_f_det = float(np.concatenate(log_f).sum())  # -inf if any f == 0
            data.n_det = int(data.det_cells.size)
        else:
            data.det_cells = np.empty(0, dtype=int)
            data.sum_log_f_det = 0.0
            data.n_det = 0

    if hydrophones is not None:
        if pam_obs is None or pam_params is None:
            raise ValueError("acoustic channel needs hydrophones, counts, and parameters")
        by_id = {h.id: i for i, h in enumerate(hydrophones)}
        counts = np.zeros(len(hydrophones))
        for obs in pam_obs:
            if obs.hydrophone_id not in by_id:
                raise ValueError(f"count references unknown hydrophone {obs.hydrophone_id!r}")
            counts[by_id[obs.hydrophone_id]] = obs.count
        data.p_pam = hydrophone_p_surfaces(grid, hydrophones, pam_params)[:, act_idx]
        data.y = counts
    return data


@dataclass
class LamStats:
    """Per-intensity sufficient statistics, reusable across pi/c proposals."""

    aerial_integral_unit: float = 0.0  # area * sum_l f_l . lambda (no pi)
    aerial_sum_log_lam: float = 0.0  # sum over detections of log lambda(cell)
    pam_unit: np.ndarray | None = None  # (K,) area * p_k . lambda (no c)


def lam_stats(lam_active: np.ndarray, data: FitData) -> LamStats:
    stats = LamStats()
    if data.has_aerial:
        stats.aerial_integral_unit = data.cell_area * float(data.f_sum @ lam_active)
        if data.n_det:
            lam_at = lam_active[data.det_cells]
            with np.errstate(divide="ignore"):
                stats.aerial_sum_log_lam = float(np.log(lam_at).sum())
    if data.has_pam:
        stats.pam_unit = data.cell_area * (data.p_pam @ lam_active)
    return stats


def aerial_loglik_from_stats(stats: LamStats, pi: float, data: FitData) -> float:
    if data.n_det == 0:
        log_term = 0.0
    elif pi <= 0.0 or stats.aerial_sum_log_lam == NEG_INF or data.sum_log_f_det == NEG_INF:
        return NEG_INF
    else:
        log_term = data.n_det * np.log(pi) + data.sum_log_f_det + stats.aerial_sum_log_lam
    return -pi * stats.aerial_integral_unit + log_term


def pam_loglik_from_stats(stats: LamStats, c: float, data: FitData) -> float:
    lam_k = c * data.window_scale * stats.pam_unit
    positive = data.y > 0
    if np.any(lam_k[positive] <= 0.0):
        return NEG_INF
    out = -float(lam_k.sum())
    if positive.any():
        out += float(data.y[positive] @ np.log(lam_k[positive]))
    return out


def _lam_active(intensity_field: GriddedField, data: FitData) -> np.ndarray:
    lam = intensity_field.values
    if np.any(lam < 0):
        raise ValueError("intensity must be nonnegative")
    return lam[data.active]


def loglik_aerial(
    intensity_field: GriddedField,
    observations: list[AerialObservation],
    transects: list[Transect],
    aerial_params: AerialDetectionParams,
    mask: np.ndarray | None = None,
) -> float:
    """Aerial channel log-likelihood at a given intensity surface."""
    data = build_fit_data(
        intensity_field.grid,
        mask=mask,
        transects=transects,
        aerial_obs=observations,
        aerial_params=aerial_params,
    )
    stats = lam_stats(_lam_active(intensity_field, data), data)
    return aerial_loglik_from_stats(stats, aerial_params.pi, data)


def loglik_pam(
    intensity_field: GriddedField,
    pam_observations: list[PamObservation],
    hydrophones: list[Hydrophone],
    c: float,
    pam_params: PamDetectionParams,
    window_scale: float = 1.0,
    mask: np.ndarray | None = None,
) -> float:
    """Acoustic channel log-likelihood (Y_k! constant dropped)."""
    if c < 0:
        raise ValueError("call rate must be nonnegative")
    data = build_fit_data(
        intensity_field.grid,
        mask=mask,
        hydrophones=hydrophones,
        pam_obs=pam_observations,
        pam_params=pam_params,
        window_scale=window_scale,
    )
    stats = lam_stats(_lam_active(intensity_field, data), data)
    return pam_loglik_from_stats(stats, c, data)


def loglik_fused(
    intensity_field: GriddedField,
    aerial_observations: list[AerialObservation],
    transects: list[Transect],
    aerial_params: AerialDetectionParams,
    pam_observations: list[PamObservation],
    hydrophones: list[Hydrophone],
    c: float,
    pam_params: PamDetectionParams,
    window_scale: float = 1.0,
    mask: np.ndarray | None = None,
) -> float:
    """Fused log-likelihood: the channels are conditionally independent, so
    it is exactly the sum of the two single-source terms."""
    return loglik_aerial(intensity_field, aerial_observations, transects, aerial_params, mask) + loglik_pam(
        intensity_field, pam_observations, hydrophones, c, pam_params, window_scale, mask
    )


def callrate_gamma_params(c: float, variance: float = 10.0) -> tuple[float, float]:
    """Moment-matched (shape, rate) for a Gamma with mean c and the given variance."""
    return c * c / variance, c / variance


def log_aux_callrate(c: float, observations, variance: float = 10.0) -> float:
    """Log-likelihood of calls-per-window tag observations given the rate c."""
    obs = np.asarray(observations, dtype=float)
    if c <= 0:
        raise ValueError("call rate must be positive")
    if np.any(obs <= 0):
        raise ValueError("call-rate observations must be positive")
    shape, rate = callrate_gamma_params(c, variance)
    return float(
        obs.size * (shape * np.log(rate) - gammaln(shape))
        + (shape - 1.0) * np.log(obs).sum()
        - rate * obs.sum()
    )


def surface_beta_params(pi: float, nu: float = 15.0) -> tuple[float, float]:
    """Mean/sample-size reparameterization: alpha = pi*nu, beta = (1-pi)*nu."""
    return pi * nu, (1.0 - pi) * nu


def log_aux_surface(pi: float, observations, nu: float = 15.0) -> float:
    """Log-likelihood of surface-fraction tag observations given pi."""
    obs = np.asarray(observations, dtype=float)
    if not 0.0 < pi < 1.0:
        raise ValueError("pi must lie strictly inside (0, 1)")
    if np.any((obs <= 0) | (obs >= 1)):
        raise ValueError("surface-fraction observations must lie in (0, 1)")
    a, b = surface_beta_params(pi, nu)
    return float(
        obs.size * (gammaln(nu) - gammaln(a) - gammaln(b))
        + (a - 1.0) * np.log(obs).sum()
        + (b - 1.0) * np.log1p(-obs).sum()
    )
