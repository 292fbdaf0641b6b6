"""Bayesian Causal Forests: regularized treatment effect estimation.

The outcome model is

    y = mu(x, pi(x)) + tau(x) * z + noise

with separate forests for the prognostic surface mu and the treatment
moderation surface tau. mu sees the covariates plus one extra design column
carrying a propensity estimate; tau sees the covariates alone and is
updated only against treated units. Three variants differ solely in what
fills the extra column: a constant 0.5 (no propensity adjustment), the true
assignment probabilities, or the posterior mean probability from an
internal probit fit of treatment on covariates.

Forest priors follow the usual BCF asymmetry: a large, flexible mu forest
(200 trees, depth prior 0.95/(1+d)^2, half-Cauchy scale with median twice
the outcome sd) and a small, heavily regularized tau forest (50 trees,
depth prior 0.25/(1+d)^3, half-normal scale with median equal to the
outcome sd).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bart import (
    BartConfig,
    ForestSampler,
    HalfCauchy,
    HalfNormal,
    HALF_NORMAL_MEDIAN,
    _sigma_prior_scale,
    fit_binary_probit,
)

__all__ = [
    "PropensityMode", "BcfConfig", "BcfFit", "build_design", "fit_bcf",
    "cate_intervals", "ate_posterior",
]


class PropensityMode(str, enum.Enum):
    """How the extra design column for the prognostic forest is filled."""

    NO_PROPENSITY = "no_propensity"
    TRUE_PROPENSITY = "true_propensity"
    ESTIMATED_PROPENSITY = "estimated_propensity"


def _default_mu_config() -> BartConfig:
    return BartConfig(
        num_trees=200, base=0.95, power=2.0,
        leaf_scale_prior=HalfCauchy(2.0),
    )


def _default_tau_config() -> BartConfig:
    return BartConfig(
        num_trees=50, base=0.25, power=3.0,
        leaf_scale_prior=HalfNormal(1.0 / HALF_NORMAL_MEDIAN),
    )


@dataclass(frozen=True)
class BcfConfig:
    """Per-forest settings plus the credible-interval level.

    The two outcome forests run interleaved inside one chain, so their
    chain controls (iterations, burn-in, thinning) must agree; the noise
    variance prior is read from ``mu_config``. ``propensity_config`` drives
    the internal probit fit and is used only by the estimated-propensity
    variant.
    """

    mu_config: BartConfig = field(default_factory=_default_mu_config)
    tau_config: BartConfig = field(default_factory=_default_tau_config)
    propensity_config: BartConfig = field(default_factory=BartConfig)
    interval_level: float = 0.95

    def validate(self) -> None:
        self.mu_config.validate()
        self.tau_config.validate()
        self.propensity_config.validate()
        for name in ("iterations", "burn_in", "thin"):
            if getattr(self.mu_config, name) != getattr(self.tau_config, name):
                raise ValueError(
                    f"mu and tau forests share one chain; {name} must match")
        if not 0.0 < self.interval_level < 1.0:
            raise ValueError("interval_level must be in (0, 1)")


@dataclass
class BcfFit:
    """Posterior draws from one BCF fit, on the original outcome scale.

    ``mu_draws`` and ``tau_draws`` have one row per retained iteration and
    one column per unit. ``pi_used`` is the propensity column the
    prognostic forest actually saw.
    """

    mu_draws: np.ndarray
    tau_draws: np.ndarray
    sigma_draws: np.ndarray
    pi_used: np.ndarray
    mode: PropensityMode
    fit_seconds: float


def build_design(X: np.ndarray, pi_values: np.ndarray) -> np.ndarray:
    """Covariates with the propensity estimate appended as a final column."""
    X = np.asarray(X, dtype=float)
    pi_values = np.asarray(pi_values, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if pi_values.shape != (X.shape[0],):
        raise ValueError("pi_values must have one entry per row of X")
    if pi_values.min() < 0.0 or pi_values.max() > 1.0:
        raise ValueError("pi_values must lie in [0, 1]")
    return np.column_stack([X, pi_values])


def fit_bcf(X, z, y, mode: PropensityMode | str,
            pi_true=None, config: BcfConfig | None = None, seed=0) -> BcfFit:
    """Fit one BCF variant; deterministic given (inputs, config, seed).

    ``pi_true`` is required for the true-propensity variant and rejected
    otherwise. ``seed`` may be an int or a ``numpy.random.SeedSequence``;
    the estimated-propensity variant splits it so the probit stage and the
    outcome chain draw from independent streams.
    """
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=float)
    z = np.asarray(z)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    n = X.shape[0]
    if z.shape != (n,) or y.shape != (n,):
        raise ValueError("X, z, y must have matching lengths")
    if not np.all((z == 0) | (z == 1)):
        raise ValueError("z must be binary")
    if z.min() == z.max():
        raise ValueError("z must contain both treated and control units")
    mode = PropensityMode(mode)
    if config is None:
        config = BcfConfig()
    config.validate()

    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    ss_propensity, ss_outcome = ss.spawn(2)

    if mode is PropensityMode.TRUE_PROPENSITY:
        if pi_true is None:
            raise ValueError("pi_true is required for the true-propensity variant")
        pi_used = np.asarray(pi_true, dtype=float).copy()
        if pi_used.shape != (n,):
            raise ValueError("pi_true must have one entry per unit")
        if pi_used.min() < 0.0 or pi_used.max() > 1.0:
            raise ValueError("pi_true must lie in [0, 1]")
    else:
        if pi_true is not None:
            raise ValueError("pi_true is only accepted by the true-propensity variant")
        if mode is PropensityMode.NO_PROPENSITY:
            pi_used = np.full(n, 0.5)
        else:
            probit = fit_binary_probit(X, z, config.propensity_config,
                                       seed=ss_propensity)
            pi_used = probit.probability_draws.mean(axis=0)

    design = build_design(X, pi_used)
    zmask = z.astype(bool)

    mu_cfg = config.mu_config
    center = float(y.mean())
    sd = float(y.std())
    scale = sd if sd > 0 else 1.0
    if not mu_cfg.standardize:
        center, scale = 0.0, 1.0
    y_work = (y - center) / scale

    rng = np.random.default_rng(ss_outcome)
    mu_sampler = ForestSampler(design, mu_cfg)
    tau_sampler = ForestSampler(X, config.tau_config, weights=z)
    resid = y_work.copy()
    sigma = mu_cfg.fixed_sigma if mu_cfg.fixed_sigma is not None else 1.0
    prior = mu_cfg.sigma_prior
    lam = _sigma_prior_scale(prior, float(y_work.var()))

    keep = mu_cfg.n_retained
    mu_draws = np.empty((keep, n))
    tau_draws = np.empty((keep, n))
    sigma_draws = np.empty(keep)
    k = 0
    for it in range(mu_cfg.iterations):
        mu_sampler.sweep(resid, sigma, rng)
        tau_sampler.sweep(resid, sigma, rng)
        if mu_cfg.fixed_sigma is None and not mu_cfg.prior_only:
            ssr = float(resid @ resid)
            shape = 0.5 * (prior.nu + n)
            rate = 0.5 * (prior.nu * lam + ssr)
            sigma = math.sqrt(rate / rng.gamma(shape))
        if it >= mu_cfg.burn_in and (it - mu_cfg.burn_in) % mu_cfg.thin == 0:
            tau_work = tau_sampler.current_fit()
            # residual bookkeeping gives mu without another forest traversal
            mu_work = y_work - resid
            mu_work[zmask] -= tau_work[zmask]
            mu_draws[k] = center + scale * mu_work
            tau_draws[k] = scale * tau_work
            sigma_draws[k] = scale * sigma
            k += 1
    return BcfFit(
        mu_draws=mu_draws,
        tau_draws=tau_draws,
        sigma_draws=sigma_draws,
        pi_used=pi_used,
        mode=mode,
        fit_seconds=time.perf_counter() - t0,
    )


def cate_intervals(fit: BcfFit, level: float = 0.95) -> dict:
    """Posterior mean and equal-tailed interval of tau(x) per unit."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    draws = fit.tau_draws
    if draws.size == 0:
        raise ValueError("fit has no retained draws")
    tail = 0.5 * (1.0 - level)
    return {
        "mean": draws.mean(axis=0),
        "lower": np.quantile(draws, tail, axis=0),
        "upper": np.quantile(draws, 1.0 - tail, axis=0),
    }


def ate_posterior(fit: BcfFit, level: float = 0.95) -> dict:
    """Posterior of the sample-average treatment effect.

    Each retained draw contributes the average of tau over the sample, so
    the returned draws carry full posterior uncertainty about the ATE.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    if fit.tau_draws.size == 0:
        raise ValueError("fit has no retained draws")
    draws = fit.tau_draws.mean(axis=1)
    tail = 0.5 * (1.0 - level)
    return {
        "draws": draws,
        "mean": float(draws.mean()),
        "lower": float(np.quantile(draws, tail)),
        "upper": float(np.quantile(draws, 1.0 - tail)),
    }
