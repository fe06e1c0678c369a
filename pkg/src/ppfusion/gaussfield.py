"""Mean-zero Gaussian random fields on the grid with exponential covariance.

Kernel convention: cov(d) = sigma2 * exp(-d / phi). Under this
parameterization the effective range (correlation ~= 0.05) is 3 * phi, so a
stated effective range of 9 km corresponds to phi = 3 km. This convention is
fixed here once; everything else in the package inherits it.

Fields are drawn densely: factor the covariance once, then w = L z with z
i.i.d. standard normal. The factorization adds an escalating diagonal jitter
(starting at 1e-10 * sigma2, growing tenfold up to 1e-4 * sigma2) because
exponential-covariance matrices on fine grids are numerically
near-singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppfusion.errors import NumericalError
from ppfusion.grid import GriddedField, GridSpec

JITTER_START_FRACTION = 1e-10
JITTER_MAX_FRACTION = 1e-4


@dataclass(frozen=True)
class ExpCovariance:
    """Exponential covariance sigma2 * exp(-d / phi)."""

    sigma2: float
    phi: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.phi <= 0:
            raise ValueError(f"phi must be positive, got {self.phi}")

    @property
    def effective_range(self) -> float:
        """Distance where correlation drops to ~0.05 (= 3 * phi)."""
        return 3.0 * self.phi

    @classmethod
    def from_effective_range(cls, sigma2: float, effective_range: float) -> "ExpCovariance":
        return cls(sigma2=sigma2, phi=effective_range / 3.0)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Exactly-symmetric Euclidean distance matrix."""
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def cov_matrix(centroids: np.ndarray, cov: ExpCovariance) -> np.ndarray:
    """Dense covariance matrix: entry (i, j) = sigma2 * exp(-d_ij / phi)."""
    pts = np.atleast_2d(np.asarray(centroids, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("need at least one centroid")
    d = pairwise_distances(pts)
    if not np.all(np.isfinite(d)):
        raise ValueError("pairwise distances must be finite")
    return cov.sigma2 * np.exp(-d / cov.phi)


def cholesky_with_jitter(matrix: np.ndarray, scale: float | None = None) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, retrying with escalating diagonal jitter.

    Returns (L, jitter_used). `scale` sets the jitter unit (defaults to the
    mean diagonal). Raises NumericalError when even the maximum jitter fails.
    """
    n = matrix.shape[0]
    if scale is None:
        scale = float(np.mean(np.diag(matrix)))
    jitter = 0.0
    frac = JITTER_START_FRACTION
    while True:
        try:
            L = np.linalg.cholesky(matrix + jitter * np.eye(n) if jitter else matrix)
            return L, jitter
        except np.linalg.LinAlgError:
            if frac > JITTER_MAX_FRACTION:
                raise NumericalError(
                    f"covariance factorization failed for n={n} even with jitter "
                    f"{JITTER_MAX_FRACTION * scale:g}"
                )
            jitter = frac * scale
            frac *= 10.0


def correlation_cholesky(grid: GridSpec, phi: float) -> np.ndarray:
    """Cholesky factor of the unit-variance correlation matrix on the grid.

    Shared by field simulation and MCMC: with R = L L', a field with marginal
    variance sigma2 is w = sqrt(sigma2) * L z.
    """
    R = cov_matrix(grid.centroids(), ExpCovariance(sigma2=1.0, phi=phi))
    try:
        L, _ = cholesky_with_jitter(R, scale=1.0)
    except NumericalError as exc:
        raise NumericalError(f"{exc} (grid of {grid.n_cells} cells, phi={phi})") from exc
    return L


def sample_gp(grid: GridSpec, cov: ExpCovariance, rng_seed) -> GriddedField:
    """One mean-zero draw at the grid centroids, deterministic given the seed."""
    C = cov_matrix(grid.centroids(), cov)
    try:
        L, _ = cholesky_with_jitter(C, scale=cov.sigma2)
    except NumericalError as exc:
        raise NumericalError(f"{exc} (grid of {grid.n_cells} cells, phi={cov.phi})") from exc
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal(grid.n_cells)
    return GriddedField(grid=grid, values=L @ z)
