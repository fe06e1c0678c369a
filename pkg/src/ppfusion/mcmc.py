"""Metropolis-within-Gibbs sampling for single-source and fused models.

The fitting model is a log-linear intensity with a latent Gaussian field:

    lambda(cell) = exp(X beta + w),  w ~ N(0, sigma2 R),  R_ij = exp(-d_ij/phi)

with phi fixed. Update scheme per iteration:

* beta: joint random-walk Metropolis, scale adapted during burn-in.
* w: elliptical slice sampling with prior N(0, sigma2 R); the correlation
  factor L (R = L L') is computed once, and ellipse draws are
  sqrt(sigma2) * L z, so no refactorization is ever needed.
* sigma2: exact inverse-gamma conditional draw when the inverse-gamma prior
  is selected (the conditional depends on w only), otherwise random walk on
  log sigma2.
* pi (surfacing probability): random walk on the logit scale against the
  aerial likelihood plus any auxiliary surface-fraction data; uniform prior.
* c (call rate): random walk on the log scale against the acoustic
  likelihood plus any auxiliary call-rate data; uniform prior on (0, c_max).

Proposal scales adapt in batches during burn-in only and are frozen
afterwards, preserving detailed balance for the retained draws. Acceptance
rates are tallied over the post-burn-in phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ppfusion.detection import AerialDetectionParams, Hydrophone, PamDetectionParams
from ppfusion.errors import ConfigError, NumericalError
from ppfusion.gaussfield import ExpCovariance, cholesky_with_jitter, cov_matrix
from ppfusion.grid import GriddedField, GridSpec, Transect
from ppfusion.likelihood import (
    NEG_INF,
    FitData,
    LamStats,
    aerial_loglik_from_stats,
    build_fit_data,
    lam_stats,
    log_aux_callrate,
    log_aux_surface,
    pam_loglik_from_stats,
)
from ppfusion.observe import AerialObservation, PamObservation

VALID_SOURCES = ("aerial", "pam", "both")
VALID_SIGMA2_FAMILIES = ("inverse_gamma", "gamma")


@dataclass
class PriorSpec:
    """Prior hyperparameters for the fitting model.

    `sigma2_rate` is the scale b of an inverse-gamma (density ~ x^{-a-1}
    e^{-b/x}) or the rate of a gamma, depending on `sigma2_family`.
    """

    beta_mean: np.ndarray
    beta_var: np.ndarray
    sigma2_family: str = "inverse_gamma"
    sigma2_shape: float = 2.0
    sigma2_rate: float = 2.0
    c_upper: float = 100.0

    def __post_init__(self):
        self.beta_mean = np.asarray(self.beta_mean, dtype=float).ravel()
        self.beta_var = np.asarray(self.beta_var, dtype=float).ravel()
        if self.beta_mean.size != self.beta_var.size:
            raise ConfigError("beta prior mean and variance lengths differ")
        if np.any(self.beta_var <= 0):
            raise ConfigError("beta prior variances must be positive")
        if self.sigma2_family not in VALID_SIGMA2_FAMILIES:
            raise ConfigError(f"unknown sigma2 prior family {self.sigma2_family!r}")
        if self.sigma2_shape <= 0 or self.sigma2_rate <= 0:
            raise ConfigError("sigma2 prior shape/rate must be positive")

    def sigma2_mean(self) -> float:
        if self.sigma2_family == "inverse_gamma":
            a, b = self.sigma2_shape, self.sigma2_rate
            return b / (a - 1.0) if a > 1.0 else b
        return self.sigma2_shape / self.sigma2_rate


@dataclass
class AuxData:
    """Auxiliary tag observations informing the scale parameters."""

    callrate_obs: np.ndarray | None = None
    callrate_variance: float = 10.0
    surface_obs: np.ndarray | None = None
    surface_nu: float = 15.0

    def __post_init__(self):
        if self.callrate_obs is not None:
            self.callrate_obs = np.asarray(self.callrate_obs, dtype=float).ravel()
        if self.surface_obs is not None:
            self.surface_obs = np.asarray(self.surface_obs, dtype=float).ravel()


@dataclass
class ModelSpec:
    """Which sources to fit, with what covariates, priors, and fixed values."""

    sources: str
    priors: PriorSpec
    phi: float
    covariates: list[GriddedField] = field(default_factory=list)
    fixed_pi: float | None = None
    fixed_c: float | None = None
    aux: AuxData = field(default_factory=AuxData)
    window_scale: float = 1.0
    allow_nonidentifiable: bool = False

    @property
    def uses_aerial(self) -> bool:
        return self.sources in ("aerial", "both")

    @property
    def uses_pam(self) -> bool:
        return self.sources in ("pam", "both")

    def validate(self):
        if self.sources not in VALID_SOURCES:
            raise ConfigError(f"sources must be one of {VALID_SOURCES}, got {self.sources!r}")
        if self.phi <= 0:
            raise ConfigError("phi must be positive")
        if self.priors.beta_mean.size != 1 + len(self.covariates):
            raise ConfigError(
                f"beta prior has {self.priors.beta_mean.size} entries for intercept + "
                f"{len(self.covariates)} covariates"
            )
        if self.window_scale <= 0:
            raise ConfigError("window_scale must be positive")
        problems = []
        if (
            self.uses_aerial
            and self.fixed_pi is None
            and self.aux.surface_obs is None
            and not self.uses_pam
        ):
            problems.append("pi (aerial-only, not fixed, no auxiliary surface data)")
        if (
            self.uses_pam
            and self.fixed_c is None
            and self.aux.callrate_obs is None
            and not self.uses_aerial
        ):
            problems.append("c (PAM-only, not fixed, no auxiliary call-rate data)")
        if problems and not self.allow_nonidentifiable:
            raise ConfigError(
                "non-identifiable model: the intensity scale is confounded with "
                + " and ".join(problems)
                + "; fix the parameter, supply auxiliary data, or set allow_nonidentifiable"
            )


@dataclass
class McmcConfig:
    iterations: int = 20000
    burn_in: int = 5000
    thin: int = 1
    w_stride: int = 1
    adapt_interval: int = 50
    target_accept: float = 0.35
    max_slice_contractions: int = 1000

    def validate(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("need 0 <= burn_in < iterations")
        if self.thin < 1 or self.w_stride < 1:
            raise ConfigError("thin and w_stride must be >= 1")
        if (self.iterations - self.burn_in) % self.thin:
            raise ConfigError("(iterations - burn_in) must be a multiple of thin")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


def simulation_mcmc_preset() -> McmcConfig:
    """20,000 iterations with 5,000 burn-in (synthetic-study protocol)."""
    return McmcConfig(iterations=20000, burn_in=5000)


def application_mcmc_preset() -> McmcConfig:
    """100,000 iterations with 20,000 burn-in (field-data protocol)."""
    return McmcConfig(iterations=100000, burn_in=20000, w_stride=10)


@dataclass
class ObservedData:
    """A dataset bundle: geometry, detections, counts, and channel parameters."""

    grid: GridSpec
    mask: np.ndarray | None = None
    transects: list[Transect] | None = None
    aerial_obs: list[AerialObservation] | None = None
    aerial_params: AerialDetectionParams | None = None
    hydrophones: list[Hydrophone] | None = None
    pam_obs: list[PamObservation] | None = None
    pam_params: PamDetectionParams | None = None


@dataclass
class PosteriorSamples:
    """Retained MCMC draws plus derived metadata.

    `w` holds every `w_stride`-th retained latent field (rows align with
    `w_indices` into the scalar draws) on the active cells only.
    """

    beta: np.ndarray
    sigma2: np.ndarray
    pi: np.ndarray | None
    c: np.ndarray | None
    w: np.ndarray
    w_indices: np.ndarray
    active: np.ndarray
    acceptance: dict[str, float]
    meta: dict

    def __post_init__(self):
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.w))):
            raise NumericalError("posterior draws contain non-finite values")
        if np.any(self.sigma2 <= 0):
            raise NumericalError("sigma2 draws must be positive")
        if self.pi is not None and np.any((self.pi <= 0) | (self.pi >= 1)):
            raise NumericalError("pi draws must lie in (0, 1)")
        if self.c is not None and np.any(self.c <= 0):
            raise NumericalError("c draws must be positive")

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]


class _AdaptiveScale:
    """Batch-adaptive random-walk proposal scale, frozen outside burn-in."""

    def __init__(self, scale: float):
        self.scale = scale
        self.accepted = 0
        self.tried = 0
        self.post_accepted = 0
        self.post_tried = 0

    def record(self, accepted: bool, adapting: bool):
        if adapting:
            self.accepted += accepted
            self.tried += 1
        else:
            self.post_accepted += accepted
            self.post_tried += 1

    def adapt(self, target: float):
        if self.tried == 0:
            return
        rate = self.accepted / self.tried
        self.scale = float(np.clip(self.scale * math.exp(0.7 * (rate - target)), 1e-6, 1e3))
        self.accepted = 0
        self.tried = 0

    @property
    def post_rate(self) -> float:
        return self.post_accepted / self.post_tried if self.post_tried else float("nan")


class FusionSampler:
    """One MCMC chain over (beta, w, sigma2[, pi][, c])."""

    def __init__(
        self,
        data: FitData,
        spec: ModelSpec,
        rng: np.random.Generator,
        chol_corr: np.ndarray | None = None,
        initial_state: dict | None = None,
        adapt_interval: int = 50,
        target_accept: float = 0.35,
        initial_scales: dict | None = None,
    ):
        spec.validate()
        self.adapt_interval = adapt_interval
        self.target_accept = target_accept
        if spec.uses_aerial and not data.has_aerial:
            raise ConfigError("model uses the aerial source but the data has no aerial channel")
        if spec.uses_pam and not data.has_pam:
            raise ConfigError("model uses the PAM source but the data has no acoustic channel")
        self.data = data
        self.spec = spec
        self.rng = rng
        self.n_act = data.n_active
        act = np.flatnonzero(data.active)
        cols = [np.ones(self.n_act)]
        for cov in spec.covariates:
            if cov.grid != data.grid:
                raise ConfigError("fitting covariate lives on a different grid")
            cols.append(cov.values[act])
        self.X = np.column_stack(cols)
        self.p = self.X.shape[1]

        if chol_corr is None:
            R = cov_matrix(data.grid.centroids()[act], ExpCovariance(sigma2=1.0, phi=spec.phi))
            chol_corr, _ = cholesky_with_jitter(R, scale=1.0)
        self.L = chol_corr

        self.pi_free = spec.uses_aerial and spec.fixed_pi is None
        self.c_free = spec.uses_pam and spec.fixed_c is None

        state = initial_state or {}
        self.beta = np.asarray(state.get("beta", spec.priors.beta_mean), dtype=float).copy()
        self.w = np.asarray(state.get("w", np.zeros(self.n_act)), dtype=float).copy()
        self.sigma2 = float(state.get("sigma2", spec.priors.sigma2_mean()))
        self.pi = self._init_scale_param(state, "pi")
        self.c = self._init_scale_param(state, "c")

        initial_scales = initial_scales or {}
        self.scales = {"beta": _AdaptiveScale(initial_scales.get("beta", 0.1))}
        if spec.priors.sigma2_family == "gamma":
            self.scales["sigma2"] = _AdaptiveScale(initial_scales.get("sigma2", 0.5))
        if self.pi_free:
            self.scales["pi"] = _AdaptiveScale(initial_scales.get("pi", 0.5))
        if self.c_free:
            self.scales["c"] = _AdaptiveScale(initial_scales.get("c", 0.3))
        self.slice_contractions = 0
        self.iteration = 0

        self._refresh()

    def _init_scale_param(self, state: dict, name: str) -> float | None:
        spec = self.spec
        if name == "pi":
            if not spec.uses_aerial:
                return None
            if spec.fixed_pi is not None:
                return float(spec.fixed_pi)
            if name in state:
                return float(state[name])
            if spec.aux.surface_obs is not None:
                return float(np.mean(spec.aux.surface_obs))
            return 0.5
        if not spec.uses_pam:
            return None
        if spec.fixed_c is not None:
            return float(spec.fixed_c)
        if name in state:
            return float(state[name])
        if spec.aux.callrate_obs is not None:
            return float(np.mean(spec.aux.callrate_obs))
        return 1.0

    # ----- cached likelihood state -------------------------------------

    def _stats_ll(self, lam: np.ndarray) -> tuple[LamStats | None, float]:
        if not np.all(np.isfinite(lam)):
            return None, NEG_INF
        stats = lam_stats(lam, self.data)
        return stats, self._ll_from_stats(stats)

    def _ll_from_stats(self, stats: LamStats) -> float:
        ll = 0.0
        if self.spec.uses_aerial:
            ll += aerial_loglik_from_stats(stats, self.pi, self.data)
        if self.spec.uses_pam:
            ll += pam_loglik_from_stats(stats, self.c, self.data)
        return ll

    def _refresh(self):
        self.eta_fixed = self.X @ self.beta
        with np.errstate(over="ignore"):
            lam = np.exp(self.eta_fixed + self.w)
        self.stats, self.ll = self._stats_ll(lam)

    # ----- priors --------------------------------------------------------

    def _beta_logprior(self, beta: np.ndarray) -> float:
        pr = self.spec.priors
        return float(-0.5 * (((beta - pr.beta_mean) ** 2) / pr.beta_var).sum())

    def _sigma2_logprior(self, s2: float) -> float:
        pr = self.spec.priors
        if pr.sigma2_family == "inverse_gamma":
            return -(pr.sigma2_shape + 1.0) * math.log(s2) - pr.sigma2_rate / s2
        return (pr.sigma2_shape - 1.0) * math.log(s2) - pr.sigma2_rate * s2

    # ----- update blocks -------------------------------------------------

    def _update_beta(self, adapting: bool):
        block = self.scales["beta"]
        prop = self.beta + block.scale * self.rng.standard_normal(self.p)
        eta_prop = self.X @ prop
        with np.errstate(over="ignore"):
            lam_prop = np.exp(eta_prop + self.w)
        stats_prop, ll_prop = self._stats_ll(lam_prop)
        log_ratio = (ll_prop + self._beta_logprior(prop)) - (self.ll + self._beta_logprior(self.beta))
        accepted = math.log(self.rng.random()) < log_ratio
        if accepted:
            self.beta = prop
            self.eta_fixed = eta_prop
            self.stats, self.ll = stats_prop, ll_prop
        block.record(accepted, adapting)

    def _update_w(self):
        nu = math.sqrt(self.sigma2) * (self.L @ self.rng.standard_normal(self.n_act))
        log_y = self.ll + math.log(self.rng.random())
        theta = self.rng.uniform(0.0, 2.0 * math.pi)
        lo, hi = theta - 2.0 * math.pi, theta
        for _ in range(1000):
            w_prop = self.w * math.cos(theta) + nu * math.sin(theta)
            with np.errstate(over="ignore"):
                lam_prop = np.exp(self.eta_fixed + w_prop)
            stats_prop, ll_prop = self._stats_ll(lam_prop)
            if ll_prop > log_y:
                self.w = w_prop
                self.stats, self.ll = stats_prop, ll_prop
                return
            self.slice_contractions += 1
            if theta < 0.0:
                lo = theta
            else:
                hi = theta
            theta = self.rng.uniform(lo, hi)
        raise NumericalError("elliptical slice bracket collapsed without acceptance")

    def _whitened_quadform(self) -> float:
        z = solve_triangular(self.L, self.w, lower=True)
        return float(z @ z)

    def _update_sigma2(self, adapting: bool):
        q = self._whitened_quadform()
        pr = self.spec.priors
        if pr.sigma2_family == "inverse_gamma":
            shape = pr.sigma2_shape + 0.5 * self.n_act
            scale = pr.sigma2_rate + 0.5 * q
            self.sigma2 = scale / self.rng.gamma(shape)
            return
        block = self.scales["sigma2"]
        log_prop = math.log(self.sigma2) + block.scale * self.rng.standard_normal()
        s2_prop = math.exp(log_prop)

        def log_target(s2: float) -> float:
            return (
                self._sigma2_logprior(s2)
                - 0.5 * self.n_act * math.log(s2)
                - 0.5 * q / s2
                + math.log(s2)  # Jacobian of the log transform
            )

        accepted = math.log(self.rng.random()) < log_target(s2_prop) - log_target(self.sigma2)
        if accepted:
            self.sigma2 = s2_prop
        block.record(accepted, adapting)

    def _pi_log_target(self, pi: float) -> float:
        out = math.log(pi) + math.log1p(-pi)  # logit Jacobian; Uniform(0,1) prior
        if self.spec.uses_aerial:
            out += aerial_loglik_from_stats(self.stats, pi, self.data)
        if self.spec.aux.surface_obs is not None:
            out += log_aux_surface(pi, self.spec.aux.surface_obs, self.spec.aux.surface_nu)
        return out

    def _update_pi(self, adapting: bool):
        block = self.scales["pi"]
        z = math.log(self.pi) - math.log1p(-self.pi)
        z_prop = z + block.scale * self.rng.standard_normal()
        pi_prop = 1.0 / (1.0 + math.exp(-z_prop))
        accepted = pi_prop not in (0.0, 1.0) and math.log(self.rng.random()) < self._pi_log_target(
            pi_prop
        ) - self._pi_log_target(self.pi)
        if accepted:
            self.pi = pi_prop
            self.ll = self._ll_from_stats(self.stats)
        block.record(accepted, adapting)

    def _c_log_target(self, c: float) -> float:
        if not 0.0 < c < self.spec.priors.c_upper:
            return NEG_INF
        out = math.log(c)  # log-scale Jacobian; Uniform(0, c_upper) prior
        if self.spec.uses_pam:
            out += pam_loglik_from_stats(self.stats, c, self.data)
        if self.spec.aux.callrate_obs is not None:
            out += log_aux_callrate(c, self.spec.aux.callrate_obs, self.spec.aux.callrate_variance)
        return out

    def _update_c(self, adapting: bool):
        block = self.scales["c"]
        c_prop = math.exp(math.log(self.c) + block.scale * self.rng.standard_normal())
        accepted = math.log(self.rng.random()) < self._c_log_target(c_prop) - self._c_log_target(
            self.c
        )
        if accepted:
            self.c = c_prop
            self.ll = self._ll_from_stats(self.stats)
        block.record(accepted, adapting)

    # ----- driver ----------------------------------------------------------

    def step(self, adapting: bool = False):
        """One full Metropolis-within-Gibbs sweep."""
        if not self.ll > NEG_INF or not np.isfinite(self.sigma2):
            raise NumericalError(f"divergent chain at iteration {self.iteration}: {self.state_dump()}")
        self._update_beta(adapting)
        self._update_w()
        self._update_sigma2(adapting)
        if self.pi_free:
            self._update_pi(adapting)
        if self.c_free:
            self._update_c(adapting)
        self.iteration += 1
        if adapting and self.iteration % self.adapt_interval == 0:
            for block in self.scales.values():
                block.adapt(self.target_accept)

    def state_dump(self) -> dict:
        return {
            "iteration": self.iteration,
            "beta": self.beta.tolist(),
            "sigma2": self.sigma2,
            "pi": self.pi,
            "c": self.c,
            "w_min": float(self.w.min()) if self.n_act else 0.0,
            "w_max": float(self.w.max()) if self.n_act else 0.0,
            "loglik": self.ll,
        }

    def acceptance_rates(self) -> dict[str, float]:
        rates = {name: block.post_rate for name, block in self.scales.items()}
        rates["w_slice"] = 1.0  # slice updates always move; tracked via contractions
        if self.spec.priors.sigma2_family == "inverse_gamma":
            rates["sigma2"] = 1.0  # exact conditional draw
        return rates


def mcmc_fit(
    model_spec: ModelSpec,
    observed: ObservedData,
    mcmc_config: McmcConfig,
    rng_seed,
    chol_corr: np.ndarray | None = None,
) -> PosteriorSamples:
    """Run one chain and return the retained draws. Deterministic given seed."""
    model_spec.validate()
    mcmc_config.validate()
    data = build_fit_data(
        observed.grid,
        mask=observed.mask,
        transects=observed.transects if model_spec.uses_aerial else None,
        aerial_obs=observed.aerial_obs if model_spec.uses_aerial else None,
        aerial_params=observed.aerial_params if model_spec.uses_aerial else None,
        hydrophones=observed.hydrophones if model_spec.uses_pam else None,
        pam_obs=observed.pam_obs if model_spec.uses_pam else None,
        pam_params=observed.pam_params if model_spec.uses_pam else None,
        window_scale=model_spec.window_scale,
    )
    rng = np.random.default_rng(rng_seed)
    sampler = FusionSampler(
        data,
        model_spec,
        rng,
        chol_corr=chol_corr,
        adapt_interval=mcmc_config.adapt_interval,
        target_accept=mcmc_config.target_accept,
    )

    m = mcmc_config.n_retained
    beta = np.empty((m, sampler.p))
    sigma2 = np.empty(m)
    pi = np.empty(m) if sampler.pi is not None else None
    c = np.empty(m) if sampler.c is not None else None
    w_indices = np.arange(0, m, mcmc_config.w_stride)
    w = np.empty((w_indices.size, sampler.n_act))

    kept = 0
    for it in range(mcmc_config.iterations):
        sampler.step(adapting=it < mcmc_config.burn_in)
        offset = it - mcmc_config.burn_in
        if offset < 0 or offset % mcmc_config.thin:
            continue
        beta[kept] = sampler.beta
        sigma2[kept] = sampler.sigma2
        if pi is not None:
            pi[kept] = sampler.pi
        if c is not None:
            c[kept] = sampler.c
        if kept % mcmc_config.w_stride == 0:
            w[kept // mcmc_config.w_stride] = sampler.w
        kept += 1

    meta = {
        "iterations": mcmc_config.iterations,
        "burn_in": mcmc_config.burn_in,
        "thin": mcmc_config.thin,
        "w_stride": mcmc_config.w_stride,
        "seed": repr(rng_seed),
        "sources": model_spec.sources,
        "phi": model_spec.phi,
        "n_covariates": len(model_spec.covariates),
        "slice_contractions_per_iter": sampler.slice_contractions / mcmc_config.iterations,
    }
    return PosteriorSamples(
        beta=beta,
        sigma2=sigma2,
        pi=pi,
        c=c,
        w=w,
        w_indices=w_indices,
        active=data.active,
        acceptance=sampler.acceptance_rates(),
        meta=meta,
    )


# ----- posterior functionals ---------------------------------------------


@dataclass
class AbundanceDraws:
    """Abundance functional draws plus posterior-predictive counts."""

    abundance: np.ndarray
    predictive: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.abundance.mean())

    @property
    def sd(self) -> float:
        return float(self.abundance.std(ddof=1))

    def credible_interval(self, level: float = 0.95) -> tuple[float, float]:
        alpha = (1.0 - level) / 2.0
        lo, hi = np.quantile(self.abundance, [alpha, 1.0 - alpha])
        return float(lo), float(hi)


def _active_design(
    samples: PosteriorSamples, covariates: list[GriddedField], grid: GridSpec
) -> np.ndarray:
    act = np.flatnonzero(samples.active)
    cols = [np.ones(act.size)]
    for cov in covariates:
        if cov.grid != grid:
            raise ValueError("covariate lives on a different grid")
        cols.append(cov.values[act])
    X = np.column_stack(cols)
    if X.shape[1] != samples.beta.shape[1]:
        raise ValueError(
            f"samples have {samples.beta.shape[1]} coefficients but "
            f"{X.shape[1]} design columns were supplied"
        )
    return X


def intensity_draw_rows(
    samples: PosteriorSamples, covariates: list[GriddedField], grid: GridSpec
):
    """Yield per-draw intensity vectors on the active cells (kept w draws)."""
    X = _active_design(samples, covariates, grid)
    for row, idx in zip(samples.w, samples.w_indices):
        yield np.exp(X @ samples.beta[idx] + row)


def posterior_abundance(
    samples: PosteriorSamples,
    covariates: list[GriddedField],
    grid: GridSpec,
    region_mask: np.ndarray | None = None,
    rng_seed=0,
) -> AbundanceDraws:
    """Integrate each intensity draw over the (masked) region.

    Also draws one posterior-predictive count per abundance draw, for use in
    count scoring.
    """
    if samples.n_draws == 0:
        raise ValueError("no posterior draws")
    act = np.flatnonzero(samples.active)
    if region_mask is None:
        sel = slice(None)
    else:
        region_mask = np.asarray(region_mask, dtype=bool).ravel()
        if region_mask.size != grid.n_cells:
            raise ValueError("region mask length does not match grid cell count")
        sel = region_mask[act]
    area = grid.cell_area
    abundance = np.array(
        [area * lam[sel].sum() for lam in intensity_draw_rows(samples, covariates, grid)]
    )
    rng = np.random.default_rng(rng_seed)
    return AbundanceDraws(abundance=abundance, predictive=rng.poisson(abundance))


def posterior_mean_intensity(
    samples: PosteriorSamples, covariates: list[GriddedField], grid: GridSpec
) -> GriddedField:
    """Pointwise posterior mean of the intensity surface (zero on masked cells)."""
    total = np.zeros(samples.active.sum())
    count = 0
    for lam in intensity_draw_rows(samples, covariates, grid):
        total += lam
        count += 1
    values = np.zeros(grid.n_cells)
    values[np.flatnonzero(samples.active)] = total / count
    return GriddedField(grid=grid, values=values)
