"""Report rendering: figures plus summary tables for a finished run.

Given a run directory produced by the pipeline (simulate + fit + evaluate,
or a sweep), renders the standard diagnostic figures as PNG files next to a
delimited summary table:

* pattern_map.png         true locations with the monitoring design
* detection_surfaces.png  aerial / acoustic / fused detection probability
* intensity_surfaces.png  true and posterior-mean intensity per model
* abundance_posteriors.png posterior abundance densities vs the true count
* sweep_trends.png        RMSE trends across sampling intensities (sweeps)
* report_summary.csv      one row per fitted model
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from ppfusion import tables
from ppfusion.config import RunConfig
from ppfusion.detection import aerial_surface, fused_surface, pam_surface
from ppfusion.errors import ConfigError
from ppfusion.grid import GriddedField
from ppfusion.mcmc import posterior_abundance, posterior_mean_intensity
from ppfusion.pipeline import _fit_covariates, load_fit, substream
from ppfusion.rasters import load_raster

_MODEL_LABEL = {"aerial": "Aerial only", "pam": "Acoustic only", "both": "Fusion"}
_MODEL_COLOR = {"aerial": "tab:orange", "pam": "tab:green", "both": "tab:blue"}


def _imshow_field(ax, field: GriddedField, title: str, vmax=None):
    grid = field.grid
    im = ax.imshow(
        field.as_array2d(),
        origin="lower",
        extent=(grid.x_min, grid.x_max, grid.y_min, grid.y_max),
        cmap="viridis",
        vmax=vmax,
    )
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("x (km)")
    ax.set_ylabel("y (km)")
    return im


def _render_pattern_map(ds, out: Path):
    fig, ax = plt.subplots(figsize=(6, 6))
    for t in ds["transects"]:
        ax.plot(t.vertices[:, 0], t.vertices[:, 1], "k--", lw=0.8, alpha=0.7)
    hx = [h.location[0] for h in ds["hydrophones"]]
    hy = [h.location[1] for h in ds["hydrophones"]]
    ax.plot(hx, hy, "r^", ms=8, label="hydrophones")
    pts = ds["pattern"].points
    if pts.size:
        ax.plot(pts[:, 0], pts[:, 1], "b.", ms=4, label=f"true locations (n={len(pts)})")
    ax.set_xlabel("x (km)")
    ax.set_ylabel("y (km)")
    ax.set_title("True pattern and monitoring design")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "pattern_map.png", dpi=150)
    plt.close(fig)


def _render_detection_surfaces(config: RunConfig, ds, out: Path):
    grid = ds["grid"]
    p_air = aerial_surface(grid, ds["transects"], config.aerial_params())
    p_pam = pam_surface(grid, ds["hydrophones"], config.pam_params())
    p_all = fused_surface(p_air, p_pam)
    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))
    for ax, field, title in zip(
        axes, (p_air, p_pam, p_all), ("Aerial", "Acoustic", "Fusion")
    ):
        im = _imshow_field(ax, field, title, vmax=1.0)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle("Detection probability surfaces")
    fig.tight_layout()
    fig.savefig(out / "detection_surfaces.png", dpi=150)
    plt.close(fig)


def _render_intensity_surfaces(truth: GriddedField, posterior_means: dict, out: Path):
    panels = [("Truth", truth)] + [
        (_MODEL_LABEL[m], f) for m, f in sorted(posterior_means.items())
    ]
    n = len(panels)
    ncols = 2
    nrows = (n + 1) // 2
    vmax = max(float(f.values.max()) for _, f in panels)
    fig, axes = plt.subplots(nrows, ncols, figsize=(10, 4.5 * nrows))
    axes = np.atleast_1d(axes).ravel()
    for ax in axes[n:]:
        ax.axis("off")
    for ax, (title, field) in zip(axes, panels):
        im = _imshow_field(ax, field, title, vmax=vmax)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle("Intensity surfaces (points / km$^2$)")
    fig.tight_layout()
    fig.savefig(out / "intensity_surfaces.png", dpi=150)
    plt.close(fig)


def _render_abundance_posteriors(draws_by_model: dict, n_true: int, expected: float, out: Path):
    from scipy.stats import gaussian_kde

    fig, ax = plt.subplots(figsize=(7, 5))
    for model, draws in sorted(draws_by_model.items()):
        kde = gaussian_kde(draws)
        lo, hi = draws.min(), draws.max()
        pad = 0.15 * (hi - lo + 1.0)
        xs = np.linspace(lo - pad, hi + pad, 400)
        ax.plot(xs, kde(xs), color=_MODEL_COLOR[model], label=_MODEL_LABEL[model])
    ax.axvline(n_true, color="red", lw=1.2, label=f"true N = {n_true}")
    ax.axvline(expected, color="blue", lw=1.2, ls=":", label=f"expected = {expected:.2f}")
    ax.set_xlabel("Total abundance")
    ax.set_ylabel("Posterior density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "abundance_posteriors.png", dpi=150)
    plt.close(fig)


def _render_sweep(sweep_dir: Path, out: Path):
    df = pd.read_csv(sweep_dir / "sweep_results.csv")
    ok = df[df["error"].isna() | (df["error"] == "")]
    fused = ok[ok["model"] == "both"]
    order = ["low", "moderate", "high"]
    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))

    for ax, axis_level, fixed_level, xlabel in (
        (axes[0], "aerial_level", "pam_level", "aerial sampling intensity"),
        (axes[1], "pam_level", "aerial_level", "acoustic sampling intensity"),
    ):
        sub = fused[
            (fused[fixed_level] == "moderate")
            & (fused["pi_level"] == "moderate")
            & (fused["c_level"] == "moderate")
            & (fused["abundance_level"] == "moderate")
        ]
        means = sub.groupby(axis_level)["rmse_log_intensity"].mean().reindex(order).dropna()
        ax.plot(means.index, means.values, "o-")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("mean RMSE of log intensity")

    sub = fused[
        (fused["aerial_level"] == "moderate")
        & (fused["pam_level"] == "moderate")
        & (fused["pi_level"] == "moderate")
        & (fused["c_level"] == "moderate")
    ]
    means = sub.groupby("abundance_level")["rmse_log_intensity"].mean().reindex(order).dropna()
    axes[2].bar(means.index, means.values, color="tab:blue")
    axes[2].set_xlabel("abundance level")
    axes[2].set_ylabel("mean RMSE of log intensity")
    fig.suptitle("Sweep trends (fusion model)")
    fig.tight_layout()
    fig.savefig(out / "sweep_trends.png", dpi=150)
    plt.close(fig)


def cmd_report(config: RunConfig, run_dir: Path | None = None, out_dir: Path | None = None) -> Path:
    """Render figures and the summary table for a finished run directory."""
    run_dir = Path(run_dir) if run_dir else config.out_dir
    out = tables.ensure_dir(out_dir or run_dir / "report")

    if (run_dir / "sweep" / "sweep_results.csv").exists():
        _render_sweep(run_dir / "sweep", out)
    elif (run_dir / "sweep_results.csv").exists():
        _render_sweep(run_dir, out)

    data_dir = run_dir / "data"
    if not (data_dir / "manifest.json").exists():
        if not any(out.iterdir()):
            raise ConfigError(f"nothing to report under {run_dir}")
        return out

    grid = config.grid()
    ds = {
        "grid": grid,
        "pattern": tables.read_pattern(data_dir / "pattern.csv"),
        "transects": tables.read_transects(data_dir / "transects.csv"),
        "hydrophones": tables.read_hydrophones(data_dir / "hydrophones.csv"),
    }
    truth_intensity, _ = load_raster(data_dir / "truth_intensity.asc", grid)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    expected = manifest["counts"]["expected"]

    _render_pattern_map(ds, out)
    _render_detection_surfaces(config, ds, out)

    covariates = _fit_covariates(config, grid)
    posterior_means, draws_by_model = {}, {}
    rows = []
    for fit_dir in sorted(run_dir.glob("fit_*")):
        samples, fit_manifest = load_fit(fit_dir)
        sources = fit_manifest["sources"]
        posterior_means[sources] = posterior_mean_intensity(samples, covariates, grid)
        draws = posterior_abundance(
            samples, covariates, grid, rng_seed=substream(config.seed, 99, 1)
        )
        draws_by_model[sources] = draws.abundance
        rows.append(
            [
                _MODEL_LABEL[sources],
                float(draws.mean),
                float(draws.sd),
                float(draws.credible_interval()[0]),
                float(draws.credible_interval()[1]),
            ]
        )

    if posterior_means:
        _render_intensity_surfaces(truth_intensity, posterior_means, out)
        _render_abundance_posteriors(draws_by_model, ds["pattern"].n, expected, out)
        tables.write_csv_table(
            out / "report_summary.csv",
            ["model", "abundance_mean", "abundance_sd", "ci_low", "ci_high"],
            rows,
        )

    eval_csv = run_dir / "evaluation" / "evaluation.csv"
    if eval_csv.exists():
        pd.read_csv(eval_csv).to_csv(out / "evaluation_metrics.csv", index=False)
    return out
