"""ESRI-style ASCII grid rasters for gridded surfaces.

Header lines: ncols, nrows, xllcorner, yllcorner, cellsize, NODATA_value.
Data rows follow north-first (the first row is the top of the map), values
west to east. Internally rows are stored south-first, so reading and writing
flip the row order. NODATA cells come back as masked-out cells with value
0.0 (field values must stay finite).

Floats are serialized with repr, which round-trips bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ppfusion.errors import ConfigError
from ppfusion.grid import GriddedField, GridSpec

_GEOM_RTOL = 1e-9


def write_raster(
    path, field: GriddedField, mask: np.ndarray | None = None, nodata: float = -9999.0
) -> None:
    grid = field.grid
    values = field.values.copy()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        values = np.where(mask, values, nodata)
    rows = values.reshape(grid.ny, grid.nx)[::-1]  # north first on disk
    lines = [
        f"ncols {grid.nx}",
        f"nrows {grid.ny}",
        f"xllcorner {grid.x_min!r}",
        f"yllcorner {grid.y_min!r}",
        f"cellsize {grid.resolution!r}",
        f"NODATA_value {nodata!r}",
    ]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def _geometry_matches(a: GridSpec, b: GridSpec) -> bool:
    for u, v in (
        (a.x_min, b.x_min),
        (a.y_min, b.y_min),
        (a.x_max, b.x_max),
        (a.y_max, b.y_max),
        (a.resolution, b.resolution),
    ):
        if abs(u - v) > _GEOM_RTOL * max(1.0, abs(u), abs(v)):
            return False
    return True


def load_raster(path, grid: GridSpec | None = None) -> tuple[GriddedField, np.ndarray]:
    """Read a raster; returns the field and a boolean validity mask.

    If `grid` is given, the file's geometry must match it, otherwise a
    ConfigError lists both geometries.
    """
    tokens = Path(path).read_text().split()
    header = {}
    pos = 0
    for _ in range(6):
        header[tokens[pos].lower()] = tokens[pos + 1]
        pos += 2
    try:
        nx = int(header["ncols"])
        ny = int(header["nrows"])
        x0 = float(header["xllcorner"])
        y0 = float(header["yllcorner"])
        res = float(header["cellsize"])
        nodata = float(header["nodata_value"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed raster header in {path}: {exc}") from exc

    file_grid = GridSpec(
        x_min=x0, x_max=x0 + nx * res, y_min=y0, y_max=y0 + ny * res, resolution=res
    )
    if grid is not None and not _geometry_matches(file_grid, grid):
        raise ConfigError(
            f"raster {path} geometry {file_grid} does not match the run grid {grid}"
        )

    data = np.array(tokens[pos:], dtype=float)
    if data.size != nx * ny:
        raise ConfigError(f"raster {path} has {data.size} values, expected {nx * ny}")
    rows = data.reshape(ny, nx)[::-1]  # back to south-first
    flat = rows.ravel()
    mask = flat != nodata
    return GriddedField(grid=file_grid, values=np.where(mask, flat, 0.0)), mask
