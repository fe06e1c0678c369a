"""Monitoring-design generators and the standard scenario sweep.

Layouts follow the space-filling convention: n east-west transects sit at
y = (i + 1/2) * Ly / n (so 8 transects over a 40 km domain are 5 km apart),
and an nx-by-ny hydrophone array sits at the centers of an nx-by-ny
partition of the domain.

The standard sweep crosses sampling intensity, surfacing probability, call
rate, and total abundance in 15 scenarios: 1-9 vary the two sampling
intensities over (low, moderate, high) with everything else moderate; 10-13
vary (pi, c) over low/high combinations; 14-15 vary abundance. Abundance
levels scale the moderate intensity surface by 0.5x and 2x via an intercept
offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppfusion.config import SweepSpec
from ppfusion.detection import Hydrophone
from ppfusion.grid import GridSpec, Transect

LEVEL_NAMES = ("low", "moderate", "high")


def east_west_transects(n: int, grid: GridSpec) -> list[Transect]:
    """n equally spaced full-width east-west flight lines."""
    if n < 1:
        raise ValueError("need at least one transect")
    spacing = (grid.y_max - grid.y_min) / n
    out = []
    for i in range(n):
        y = grid.y_min + (i + 0.5) * spacing
        out.append(
            Transect(id=f"t{i + 1}", vertices=np.array([[grid.x_min, y], [grid.x_max, y]]))
        )
    return out


def hydrophone_grid_array(
    nx: int, ny: int, grid: GridSpec, noise_db: float | None = None
) -> list[Hydrophone]:
    """nx-by-ny space-filling array of hydrophones."""
    if nx < 1 or ny < 1:
        raise ValueError("array dimensions must be positive")
    dx = (grid.x_max - grid.x_min) / nx
    dy = (grid.y_max - grid.y_min) / ny
    out = []
    k = 0
    for j in range(ny):
        for i in range(nx):
            k += 1
            out.append(
                Hydrophone(
                    id=f"h{k}",
                    location=np.array(
                        [grid.x_min + (i + 0.5) * dx, grid.y_min + (j + 0.5) * dy]
                    ),
                    noise_db=noise_db,
                )
            )
    return out


@dataclass(frozen=True)
class Scenario:
    """One sweep cell: factor levels by name plus resolved values."""

    scenario_id: int
    aerial_level: str
    pam_level: str
    pi_level: str
    c_level: str
    abundance_level: str
    n_transects: int
    hydro_array: tuple[int, int]
    pi: float
    c: float
    abundance_scale: float


# (aerial, pam, pi, c, abundance) level indices, 0=low 1=moderate 2=high
_STANDARD_DESIGN = [
    (0, 0, 1, 1, 1),
    (1, 0, 1, 1, 1),
    (2, 0, 1, 1, 1),
    (0, 1, 1, 1, 1),
    (1, 1, 1, 1, 1),
    (2, 1, 1, 1, 1),
    (0, 2, 1, 1, 1),
    (1, 2, 1, 1, 1),
    (2, 2, 1, 1, 1),
    (1, 1, 0, 0, 1),
    (1, 1, 0, 2, 1),
    (1, 1, 2, 0, 1),
    (1, 1, 2, 2, 1),
    (1, 1, 1, 1, 0),
    (1, 1, 1, 1, 2),
]


def standard_scenarios(spec: SweepSpec) -> list[Scenario]:
    """The 15-scenario design (optionally restricted to spec.scenario_ids)."""
    out = []
    for sid, (ia, ip, ipi, ic, iab) in enumerate(_STANDARD_DESIGN, start=1):
        if spec.scenario_ids is not None and sid not in spec.scenario_ids:
            continue
        out.append(
            Scenario(
                scenario_id=sid,
                aerial_level=LEVEL_NAMES[ia],
                pam_level=LEVEL_NAMES[ip],
                pi_level=LEVEL_NAMES[ipi],
                c_level=LEVEL_NAMES[ic],
                abundance_level=LEVEL_NAMES[iab],
                n_transects=spec.transect_counts[ia],
                hydro_array=spec.hydrophone_grids[ip],
                pi=spec.pi_levels[ipi],
                c=spec.c_levels[ic],
                abundance_scale=spec.abundance_scales[iab],
            )
        )
    return out
