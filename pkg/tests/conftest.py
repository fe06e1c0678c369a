"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from ppfusion.detection import (
    AerialDetectionParams,
    Hydrophone,
    PamDetectionParams,
    hydrophone_p_surfaces,
    transect_f_surfaces,
)
from ppfusion.grid import GridSpec, Transect, build_grid
from ppfusion.observe import AerialObservation, PamObservation


@pytest.fixture
def unit_grid() -> GridSpec:
    return build_grid((0.0, 1.0, 0.0, 1.0), 1.0)


@pytest.fixture
def small_grid() -> GridSpec:
    """4 x 4 cells of 1 km."""
    return build_grid((0.0, 4.0, 0.0, 4.0), 1.0)


@pytest.fixture
def desk_grid() -> GridSpec:
    """The 40 km domain at 1 km resolution."""
    return build_grid((0.0, 40.0, 0.0, 40.0), 1.0)


def ew_transect(tid: str, y: float, x0: float = 0.0, x1: float = 40.0) -> Transect:
    return Transect(id=tid, vertices=np.array([[x0, y], [x1, y]]))


class ModelDataGenerator:
    """Draw observations from the fitting model's own sampling distribution.

    The fitted likelihood treats each transect's detections as an independent
    thinned inhomogeneous Poisson pattern with cellwise-constant probability
    (pi * f at the cell centroid) and each hydrophone count as Poisson with
    mean c * integral(p * lambda). Data drawn this way exercise the sampler
    against exactly the model it targets, which is what the sampler
    correctness oracles need (the production simulator intentionally uses
    exact locations instead; that sampling-vs-fitting gap is part of the
    study design, not of the sampler contract).
    """

    def __init__(
        self,
        grid: GridSpec,
        transects: list[Transect],
        hydrophones: list[Hydrophone],
        aerial_params: AerialDetectionParams,
        pam_params: PamDetectionParams,
        pi: float,
        c: float,
    ):
        self.grid = grid
        self.transects = transects
        self.hydrophones = hydrophones
        self.f = transect_f_surfaces(grid, transects, aerial_params)
        self.p = hydrophone_p_surfaces(grid, hydrophones, pam_params)
        self.centroids = grid.centroids()
        self.pi = pi
        self.c = c

    def draw(self, lam_cells: np.ndarray, rng: np.random.Generator):
        area = self.grid.cell_area
        aerial = []
        for row, t in zip(self.f, self.transects):
            counts = rng.poisson(self.pi * row * lam_cells * area)
            aerial.append(AerialObservation(t.id, np.repeat(self.centroids, counts, axis=0)))
        pam = [
            PamObservation(h.id, int(rng.poisson(lk)))
            for h, lk in zip(self.hydrophones, self.c * area * (self.p @ lam_cells))
        ]
        return aerial, pam
