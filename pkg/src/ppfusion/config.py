"""Declarative run configuration: one TOML file = one reproducible run.

A run config describes the grid, the truth used for simulation, both
observation channels, the fitting model, the MCMC protocol, and the seed
(mandatory; nothing is ever seeded from the clock). Sections and keys are
validated on load; all referenced paths must exist. The canonical SHA-256
hash of the merged config is recorded in every output manifest so that
mismatched truth/fit pairs are refused at evaluation time.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ppfusion.detection import AerialDetectionParams, PamDetectionParams
from ppfusion.errors import ConfigError
from ppfusion.grid import GridSpec, build_grid
from ppfusion.mcmc import AuxData, McmcConfig, ModelSpec, PriorSpec

_KNOWN_SECTIONS = {"grid", "truth", "aerial", "pam", "model", "mcmc", "run", "regions", "sweep"}


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return section[key]


def config_hash(raw: dict) -> str:
    """Canonical SHA-256 of a config dict (sorted keys, JSON encoding)."""
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


@dataclass
class RunConfig:
    """Validated run configuration plus helpers that build domain objects."""

    raw: dict
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        unknown = set(self.raw) - _KNOWN_SECTIONS
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for section in ("grid", "run"):
            if section not in self.raw:
                raise ConfigError(f"config is missing the [{section}] section")
        if "seed" not in self.raw["run"]:
            raise ConfigError("run.seed is mandatory; wall-clock seeding is not supported")
        self.grid()  # validates bounds/resolution early
        for path in self._referenced_paths():
            if not path.exists():
                raise ConfigError(f"referenced path does not exist: {path}")

    # ----- plumbing ---------------------------------------------------------

    def _referenced_paths(self) -> list[Path]:
        paths = []
        grid = self.raw["grid"]
        if grid.get("mask_raster"):
            paths.append(self.resolve(grid["mask_raster"]))
        truth = self.raw.get("truth", {})
        for p in truth.get("covariate_rasters", []):
            paths.append(self.resolve(p))
        if self.raw.get("aerial", {}).get("transects_csv"):
            paths.append(self.resolve(self.raw["aerial"]["transects_csv"]))
        if self.raw.get("pam", {}).get("hydrophones_csv"):
            paths.append(self.resolve(self.raw["pam"]["hydrophones_csv"]))
        for p in self.raw.get("model", {}).get("covariate_rasters", []):
            paths.append(self.resolve(p))
        return paths

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.raw["run"]["seed"])

    @property
    def out_dir(self) -> Path:
        return self.resolve(self.raw["run"].get("out_dir", "out"))

    def hash(self) -> str:
        return config_hash(self.raw)

    # ----- builders ----------------------------------------------------------

    def grid(self) -> GridSpec:
        g = self.raw["grid"]
        bounds = (
            float(_require(g, "x_min", "grid")),
            float(_require(g, "x_max", "grid")),
            float(_require(g, "y_min", "grid")),
            float(_require(g, "y_max", "grid")),
        )
        return build_grid(bounds, float(_require(g, "resolution", "grid")))

    def aerial_params(self) -> AerialDetectionParams:
        a = self.raw.get("aerial", {})
        return AerialDetectionParams(
            pi=float(a.get("pi", 0.4)), plateau_km=float(a.get("plateau_km", 0.75))
        )

    def pam_params(self) -> PamDetectionParams:
        p = self.raw.get("pam", {})
        return PamDetectionParams(
            noise_db=float(p.get("noise_db", 104.0)),
            snr_threshold_db=float(p.get("snr_threshold_db", 26.0)),
            tl_coeff=float(p.get("tl_coeff", 14.5)),
            sl_low_db=float(p.get("sl_low_db", 141.0)),
            sl_high_db=float(p.get("sl_high_db", 197.0)),
        )

    def model_spec(self, covariates, sources: str | None = None) -> ModelSpec:
        m = self.raw.get("model", {})
        n_cov = len(covariates)
        beta_mean = np.asarray(m.get("beta_mean", [0.0] * (1 + n_cov)), dtype=float)
        beta_var = np.asarray(m.get("beta_var", [1e6] * (1 + n_cov)), dtype=float)
        priors = PriorSpec(
            beta_mean=beta_mean,
            beta_var=beta_var,
            sigma2_family=m.get("sigma2_family", "inverse_gamma"),
            sigma2_shape=float(m.get("sigma2_shape", 2.0)),
            sigma2_rate=float(m.get("sigma2_rate", 2.0)),
            c_upper=float(m.get("c_upper", 100.0)),
        )
        aux = AuxData(
            callrate_obs=np.asarray(m["aux_callrate_obs"], dtype=float)
            if m.get("aux_callrate_obs")
            else None,
            callrate_variance=float(m.get("aux_callrate_variance", 10.0)),
            surface_obs=np.asarray(m["aux_surface_obs"], dtype=float)
            if m.get("aux_surface_obs")
            else None,
            surface_nu=float(m.get("aux_surface_nu", 15.0)),
        )
        spec = ModelSpec(
            sources=sources or m.get("sources", "both"),
            priors=priors,
            phi=float(_require(m, "phi", "model")),
            covariates=list(covariates),
            fixed_pi=float(m["fixed_pi"]) if "fixed_pi" in m else None,
            fixed_c=float(m["fixed_c"]) if "fixed_c" in m else None,
            aux=aux,
            window_scale=float(m.get("window_scale", 1.0)),
            allow_nonidentifiable=bool(m.get("allow_nonidentifiable", False)),
        )
        spec.validate()
        return spec

    def mcmc_config(self) -> McmcConfig:
        m = self.raw.get("mcmc", {})
        cfg = McmcConfig(
            iterations=int(m.get("iterations", 20000)),
            burn_in=int(m.get("burn_in", 5000)),
            thin=int(m.get("thin", 1)),
            w_stride=int(m.get("w_stride", 1)),
            adapt_interval=int(m.get("adapt_interval", 50)),
            target_accept=float(m.get("target_accept", 0.35)),
        )
        cfg.validate()
        return cfg

    def regions(self, grid: GridSpec) -> dict[str, np.ndarray]:
        """Named rectangular subregions as boolean cell masks."""
        out = {}
        centroids = grid.centroids()
        for name, box in self.raw.get("regions", {}).items():
            x0, x1, y0, y1 = (float(v) for v in box)
            out[name] = (
                (centroids[:, 0] >= x0)
                & (centroids[:, 0] <= x1)
                & (centroids[:, 1] >= y0)
                & (centroids[:, 1] <= y1)
            )
        return out


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Load a TOML run config, applying {section: {key: value}} overrides."""
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid TOML: {exc}")
    for section, entries in (overrides or {}).items():
        raw.setdefault(section, {}).update(entries)
    return RunConfig(raw=raw, base_dir=p.parent.resolve())


@dataclass
class SweepSpec:
    """Factor levels and replicate count for the scenario sweep.

    Each factor supplies its (low, moderate, high) values; the standard
    15-scenario design crosses them as in the study protocol. `scenario_ids`
    selects a subset (1-based) for reduced runs.
    """

    transect_counts: list[int] = field(default_factory=lambda: [4, 8, 16])
    hydrophone_grids: list[tuple[int, int]] = field(
        default_factory=lambda: [(2, 2), (3, 3), (4, 4)]
    )
    pi_levels: list[float] = field(default_factory=lambda: [0.15, 0.40, 0.65])
    c_levels: list[float] = field(default_factory=lambda: [3.0, 6.0, 12.0])
    abundance_scales: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    replicates: int = 1
    scenario_ids: list[int] | None = None

    def __post_init__(self):
        for name in ("transect_counts", "hydrophone_grids", "pi_levels", "c_levels", "abundance_scales"):
            levels = getattr(self, name)
            if len(levels) != 3:
                raise ConfigError(f"sweep factor {name} needs exactly (low, moderate, high)")
        if self.replicates < 1:
            raise ConfigError("sweep needs replicates >= 1")
        self.hydrophone_grids = [tuple(g) for g in self.hydrophone_grids]


def load_sweep_spec(config: RunConfig) -> SweepSpec:
    s = dict(config.raw.get("sweep", {}))
    kwargs = {}
    for key in (
        "transect_counts",
        "hydrophone_grids",
        "pi_levels",
        "c_levels",
        "abundance_scales",
        "replicates",
        "scenario_ids",
    ):
        if key in s:
            kwargs[key] = s[key]
    return SweepSpec(**kwargs)
