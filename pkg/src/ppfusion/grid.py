"""Rectangular study domain, regular-grid discretization, and quadrature.

All spatial quantities live on a regular grid of square cells. Surfaces
(covariates, detection probabilities, intensities) are evaluated at cell
centroids and treated as constant within a cell, so every integral over the
domain reduces to a midpoint-quadrature sum: value * cell_area over cells.

Coordinates are planar kilometres. Cells are enumerated row-major with x
varying fastest and rows ordered south to north, i.e. index = iy * nx + ix;
the first centroid of a grid anchored at (0, 0) with resolution r is
(r/2, r/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ppfusion.errors import ConfigError

# Relative slack when checking that the resolution divides the extents.
_DIVISIBILITY_RTOL = 1e-9


def _cells_along(extent: float, resolution: float) -> int | None:
    """Number of cells along one axis, or None if it is not an integer."""
    ratio = extent / resolution
    n = round(ratio)
    if n < 1 or abs(ratio - n) > _DIVISIBILITY_RTOL * max(1.0, abs(ratio)):
        return None
    return int(n)


@dataclass(frozen=True)
class GridSpec:
    """A regular grid of square cells covering a rectangular domain."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    resolution: float

    def __post_init__(self):
        if self.resolution <= 0:
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigError(
                f"bounds must be well-ordered, got x [{self.x_min}, {self.x_max}] "
                f"y [{self.y_min}, {self.y_max}]"
            )
        for name, extent in (("x", self.x_max - self.x_min), ("y", self.y_max - self.y_min)):
            if _cells_along(extent, self.resolution) is None:
                raise ConfigError(
                    f"resolution {self.resolution} does not divide the {name} extent {extent}"
                )

    @property
    def nx(self) -> int:
        return _cells_along(self.x_max - self.x_min, self.resolution)

    @property
    def ny(self) -> int:
        return _cells_along(self.y_max - self.y_min, self.resolution)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.resolution * self.resolution

    @property
    def area(self) -> float:
        return self.n_cells * self.cell_area

    def centroids(self) -> np.ndarray:
        """(n_cells, 2) centroid coordinates in canonical row-major order."""
        half = self.resolution / 2.0
        xs = self.x_min + half + self.resolution * np.arange(self.nx)
        ys = self.y_min + half + self.resolution * np.arange(self.ny)
        xx, yy = np.meshgrid(xs, ys)  # rows indexed by y
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index containing each point.

        Points on the x_max/y_max boundary belong to the last cell along that
        axis. Points outside the domain raise ValueError.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        inside = (
            (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)
        )
        if not inside.all():
            bad = pts[~inside][0]
            raise ValueError(f"point ({bad[0]}, {bad[1]}) lies outside the domain")
        ix = np.minimum(((x - self.x_min) / self.resolution).astype(int), self.nx - 1)
        iy = np.minimum(((y - self.y_min) / self.resolution).astype(int), self.ny - 1)
        return iy * self.nx + ix

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return (
            (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)
        )


@dataclass
class GriddedField:
    """A scalar surface on a grid: one value per cell, row-major."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.grid.n_cells:
            raise ValueError(
                f"field has {self.values.size} values but grid has {self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must all be finite")

    def as_array2d(self) -> np.ndarray:
        """(ny, nx) view, row 0 = southernmost row."""
        return self.values.reshape(self.grid.ny, self.grid.nx)


@dataclass
class Transect:
    """An aerial flight path: an ordered polyline of >= 2 vertices (km)."""

    id: str
    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.vertices.shape[0] < 2 or self.vertices.shape[1] != 2:
            raise ValueError(f"transect {self.id!r} needs >= 2 planar vertices")
        if np.any(np.all(np.diff(self.vertices, axis=0) == 0.0, axis=1)):
            raise ValueError(f"transect {self.id!r} has consecutive duplicate vertices")


def build_grid(bounds: tuple[float, float, float, float], resolution: float) -> GridSpec:
    """Construct a GridSpec from (x_min, x_max, y_min, y_max) and a cell size."""
    x_min, x_max, y_min, y_max = bounds
    return GridSpec(x_min=x_min, x_max=x_max, y_min=y_min, y_max=y_max, resolution=resolution)


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to the segment a-b (endpoints included)."""
    ab = b - a
    denom = float(ab @ ab)
    t = ((points - a) @ ab) / denom
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.sqrt(((points - proj) ** 2).sum(axis=1))


def points_to_transect(points: np.ndarray, transect: Transect) -> np.ndarray:
    """Euclidean distance from each point to the nearest point on the polyline.

    Zero-length segments are skipped; a transect with no usable segment is an
    error.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = transect.vertices
    best = np.full(pts.shape[0], np.inf)
    usable = 0
    for a, b in zip(verts[:-1], verts[1:]):
        if np.all(a == b):
            continue
        usable += 1
        best = np.minimum(best, _segment_distances(pts, a, b))
    if usable == 0:
        raise ValueError(f"transect {transect.id!r} has no non-degenerate segment")
    return best


def dist_to_transect(point, transect: Transect) -> float:
    """Distance (km) from a single point to a transect polyline."""
    return float(points_to_transect(np.asarray(point, dtype=float).reshape(1, 2), transect)[0])


def integrate_field(field: GriddedField, mask: np.ndarray | None = None) -> float:
    """Midpoint quadrature of a gridded surface: sum of value * cell_area.

    With a boolean cell mask, only included cells contribute.
    """
    if mask is None:
        total = float(field.values.sum())
    else:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.size != field.grid.n_cells:
            raise ValueError("mask length does not match grid cell count")
        total = float(field.values[mask].sum())
    return total * field.grid.cell_area
