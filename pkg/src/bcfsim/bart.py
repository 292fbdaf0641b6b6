"""Backfitting MCMC for sum-of-trees models.

Continuous-outcome BART and binary-probit BART built on the tree moves in
``trees``. Each tree update marginalizes its leaf means in the
Metropolis-Hastings ratio (conjugate normal-mean marginal), then redraws all
leaf values from their full conditional; the noise variance gets an
inverse-gamma Gibbs update each sweep, and half-Cauchy / half-normal leaf
scales are refreshed by slice sampling. The binary sampler is the
Albert-Chib latent-variable scheme with the noise scale pinned to 1.

Scale conventions: ``leaf_scale_prior`` acts on the prior standard deviation
of the summed forest output; individual leaf values get sd
``forest_scale / sqrt(num_trees)``. The continuous sampler standardizes the
outcome internally (mean 0, sd 1) and returns draws on the original scale,
which makes priors anchored to "the sd of y" exact.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import chi2

from .trees import (
    DecisionTree,
    MoveKind,
    Node,
    depth_split_prob,
    make_cutpoint_grids,
    propose_move,
    apply_move,
)

__all__ = [
    "HalfCauchy", "HalfNormal", "FixedScale", "SigmaPrior", "BartConfig",
    "BartPosterior", "ForestSampler", "depth_split_prob",
    "leaf_log_marginal", "fit_continuous", "fit_binary_probit",
]

_LOG_2PI = math.log(2.0 * math.pi)

# median of |N(0, 1)|, i.e. the 0.75 normal quantile
HALF_NORMAL_MEDIAN = float(ndtri(0.75))


@dataclass(frozen=True)
class HalfCauchy:
    """Half-Cauchy prior on the forest scale; its median equals ``scale``."""

    scale: float

    def initial(self) -> float:
        return self.scale

    def log_pdf(self, x: float) -> float:
        return -math.log1p((x / self.scale) ** 2)


@dataclass(frozen=True)
class HalfNormal:
    """Half-normal prior on the forest scale; median = 0.6745 * scale."""

    scale: float

    def initial(self) -> float:
        return HALF_NORMAL_MEDIAN * self.scale

    def log_pdf(self, x: float) -> float:
        return -0.5 * (x / self.scale) ** 2


@dataclass(frozen=True)
class FixedScale:
    """Degenerate prior: the forest scale stays at ``value``."""

    value: float

    def initial(self) -> float:
        return self.value


@dataclass(frozen=True)
class SigmaPrior:
    """Scaled-inverse-chi-squared prior on the noise variance.

    ``nu`` degrees of freedom; the scale is calibrated so that
    P(sigma < sd of the working outcome) = q.
    """

    nu: float = 3.0
    q: float = 0.90


@dataclass(frozen=True)
class BartConfig:
    """Forest size, tree prior, scale priors and chain controls.

    ``base``/``power`` set the depth-split prior base*(1+d)^-power. The last
    three fields are test hooks: ``standardize=False`` fits on the raw
    outcome scale, ``fixed_sigma`` pins the noise sd (skipping its Gibbs
    update), and ``prior_only`` disables the likelihood so the chain samples
    the tree prior.
    """

    num_trees: int = 200
    base: float = 0.95
    power: float = 2.0
    leaf_scale_prior: object = FixedScale(1.5)
    sigma_prior: SigmaPrior = SigmaPrior()
    iterations: int = 2000
    burn_in: int = 1000
    thin: int = 1
    cutpoints_per_feature: int = 100
    move_probabilities: tuple = (0.4, 0.4, 0.2)
    standardize: bool = True
    fixed_sigma: float | None = None
    prior_only: bool = False

    def validate(self) -> None:
        if self.num_trees < 1:
            raise ValueError("num_trees must be positive")
        if not 0 < self.base <= 1:
            raise ValueError(f"base must be in (0, 1], got {self.base}")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if self.cutpoints_per_feature < 1:
            raise ValueError("cutpoints_per_feature must be positive")
        probs = self.move_probabilities
        if len(probs) != 3 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("move_probabilities must be 3 nonnegatives summing to 1")
        if not isinstance(self.leaf_scale_prior, (HalfCauchy, HalfNormal, FixedScale)):
            raise ValueError("unknown leaf_scale_prior")
        if self.fixed_sigma is not None and self.fixed_sigma <= 0:
            raise ValueError("fixed_sigma must be positive")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass
class BartPosterior:
    """Retained draws from one fit.

    ``draws`` holds per-unit fitted values, one row per retained iteration,
    on the original outcome scale (latent scale for the probit sampler).
    ``sigma_draws`` is None for probit fits; ``probability_draws`` is None
    for continuous fits.
    """

    draws: np.ndarray
    sigma_draws: np.ndarray | None
    probability_draws: np.ndarray | None
    acceptance_rate: float


def leaf_log_marginal(n_node: int, sum_resid: float, sigma: float,
                      leaf_sd: float) -> float:
    """Log marginal likelihood of a node's residuals, leaf mean integrated out.

    The leaf mean carries a N(0, leaf_sd^2) prior and residuals are
    N(mean, sigma^2). The residual sum of squares enters only through a term
    that is identical across competing partitions of the same rows, so it is
    omitted; what remains depends on the data through (n_node, sum_resid)
    alone. An empty node contributes 0.
    """
    if sigma <= 0 or leaf_sd <= 0:
        raise ValueError("sigma and leaf_sd must be positive")
    if n_node < 0:
        raise ValueError("n_node must be nonnegative")
    return _llm(n_node, sum_resid, sigma * sigma, leaf_sd * leaf_sd)


def _llm(n, s, sig2, ls2):
    if n == 0:
        return 0.0
    denom = sig2 + n * ls2
    return (
        -0.5 * n * (_LOG_2PI + math.log(sig2))
        - 0.5 * (math.log(denom) - math.log(sig2))
        + ls2 * s * s / (2.0 * sig2 * denom)
    )


def _slice_sample(log_density, x0: float, rng, width: float = 1.0,
                  max_steps: int = 50) -> float:
    """One stepping-out / shrinkage slice-sampling update (Neal 2003)."""
    u = rng.random()
    threshold = log_density(x0) + (math.log(u) if u > 0 else -math.inf)
    lo = x0 - width * rng.random()
    hi = lo + width
    for _ in range(max_steps):
        if log_density(lo) <= threshold:
            break
        lo -= width
    for _ in range(max_steps):
        if log_density(hi) <= threshold:
            break
        hi += width
    while True:
        x1 = lo + (hi - lo) * rng.random()
        if log_density(x1) > threshold:
            return x1
        if x1 < x0:
            lo = x1
        else:
            hi = x1


class ForestSampler:
    """Backfitting state for one forest: trees, row caches, and scale.

    The caller owns the global residual vector, defined as the working
    outcome minus every model component. ``sweep`` temporarily adds its own
    forest's contribution back leaf by leaf, so each tree sees the partial
    residual it needs, and subtracts the freshly drawn leaf values on the
    way out.

    ``weights`` (0/1 per unit, optional) multiply the forest inside the
    likelihood: rows with weight zero still route through the trees and
    receive predictions, but contribute nothing to leaf sufficient
    statistics and are untouched by the residual bookkeeping. This is what a
    treatment-moderated forest needs, with the treatment indicator as the
    weight.
    """

    def __init__(self, X: np.ndarray, config: BartConfig, weights=None):
        config.validate()
        self.X = np.ascontiguousarray(np.asarray(X, dtype=float))
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("X must be a nonempty 2-D array")
        self.config = config
        self.weights = None
        if weights is not None:
            w = np.asarray(weights)
            if w.shape != (self.X.shape[0],):
                raise ValueError("weights must be one value per row")
            self.weights = w.astype(bool)
        self.grids = make_cutpoint_grids(self.X, config.cutpoints_per_feature)
        n = self.X.shape[0]
        all_rows = np.arange(n)
        self.trees = []
        for _ in range(config.num_trees):
            root = Node(rows=all_rows)
            root.wrows = self._wfilter(all_rows)
            self.trees.append(DecisionTree(root, n_features=self.X.shape[1]))
        self.forest_scale = float(config.leaf_scale_prior.initial())
        self._scale_root = math.sqrt(config.num_trees)
        self.proposals = 0
        self.accepts = 0

    @property
    def leaf_sd(self) -> float:
        return self.forest_scale / self._scale_root

    def _wfilter(self, rows):
        if self.weights is None:
            return rows
        return rows[self.weights[rows]]

    def sweep(self, resid: np.ndarray, sigma: float, rng) -> None:
        """One backfitting pass over every tree, then the scale update."""
        cfg = self.config
        prior_only = cfg.prior_only
        leaf_sd = self.leaf_sd
        sig2 = sigma * sigma
        ls2 = leaf_sd * leaf_sd
        for tree in self.trees:
            leaves = tree.leaves()
            singly = [lf.parent for lf in leaves
                      if lf.parent is not None and lf.parent.left is lf
                      and lf.parent.right.is_leaf]
            for leaf in leaves:
                if leaf.value != 0.0:
                    resid[leaf.wrows] += leaf.value
            prop = propose_move(tree, self.X, self.grids, rng,
                                cfg.move_probabilities, cfg.base, cfg.power,
                                leaves=leaves, singly=singly)
            self.proposals += 1
            if prop is not None:
                if prior_only:
                    log_like = 0.0
                else:
                    log_like = self._log_like_ratio(prop, resid, sig2, ls2)
                log_alpha = (log_like + prop.log_tree_prior_ratio
                             + prop.log_transition_ratio)
                u = rng.random()
                if log_alpha >= 0.0 or (u > 0.0 and math.log(u) < log_alpha):
                    for node in apply_move(tree, prop):
                        node.wrows = self._wfilter(node.rows)
                    self.accepts += 1
                    leaves = tree.leaves()
            noise = rng.standard_normal(len(leaves))
            for leaf, eps in zip(leaves, noise):
                wrows = leaf.wrows
                if prior_only:
                    value = leaf_sd * float(eps)
                    leaf.value = value
                    resid[wrows] -= value
                else:
                    part = resid[wrows]
                    var = 1.0 / (1.0 / ls2 + len(wrows) / sig2)
                    mean = var * float(part.sum()) / sig2
                    value = mean + math.sqrt(var) * float(eps)
                    leaf.value = value
                    resid[wrows] = part - value
        self._update_scale(rng, sig2)

    def _log_like_ratio(self, prop, resid, sig2, ls2) -> float:
        if prop.kind is MoveKind.GROW:
            wl = self._wfilter(prop.rows_left)
            wr = self._wfilter(prop.rows_right)
            nl, sl = len(wl), float(resid[wl].sum())
            nr, sr = len(wr), float(resid[wr].sum())
            return (_llm(nl, sl, sig2, ls2) + _llm(nr, sr, sig2, ls2)
                    - _llm(nl + nr, sl + sr, sig2, ls2))
        if prop.kind is MoveKind.PRUNE:
            lw = prop.node.left.wrows
            rw = prop.node.right.wrows
            nl, sl = len(lw), float(resid[lw].sum())
            nr, sr = len(rw), float(resid[rw].sum())
            return (_llm(nl + nr, sl + sr, sig2, ls2)
                    - _llm(nl, sl, sig2, ls2) - _llm(nr, sr, sig2, ls2))
        # Change: same rows redistributed between the two leaf children
        wl = self._wfilter(prop.rows_left)
        wr = self._wfilter(prop.rows_right)
        ol = prop.node.left.wrows
        orr = prop.node.right.wrows
        return (
            _llm(len(wl), float(resid[wl].sum()), sig2, ls2)
            + _llm(len(wr), float(resid[wr].sum()), sig2, ls2)
            - _llm(len(ol), float(resid[ol].sum()), sig2, ls2)
            - _llm(len(orr), float(resid[orr].sum()), sig2, ls2)
        )

    def _update_scale(self, rng, sig2) -> None:
        prior = self.config.leaf_scale_prior
        if isinstance(prior, FixedScale):
            return
        values = np.array([leaf.value for tree in self.trees
                           for leaf in tree.leaves()])
        n_leaves = len(values)
        ssq = float(values @ values)
        root_m = self._scale_root

        def log_density(v: float) -> float:
            forest_scale = math.exp(v)
            leaf_sd = forest_scale / root_m
            return (
                -n_leaves * math.log(leaf_sd)
                - ssq / (2.0 * leaf_sd * leaf_sd)
                + prior.log_pdf(forest_scale)
                + v
            )

        v_new = _slice_sample(log_density, math.log(self.forest_scale), rng)
        self.forest_scale = math.exp(v_new)

    def current_fit(self) -> np.ndarray:
        """Forest prediction at every training row, recomputed from leaves."""
        out = np.zeros(self.X.shape[0])
        for tree in self.trees:
            for leaf in tree.leaves():
                out[leaf.rows] += leaf.value
        return out

    @property
    def acceptance_rate(self) -> float:
        return self.accepts / self.proposals if self.proposals else 0.0


def _sigma_prior_scale(prior: SigmaPrior, var_y: float) -> float:
    """Scale lambda with P(sigma < sd(y)) = q under nu*lambda/sigma^2 ~ chi2_nu."""
    if var_y <= 0:
        var_y = 1.0
    return float(chi2.ppf(1.0 - prior.q, prior.nu)) * var_y / prior.nu


def fit_continuous(X, y, config: BartConfig = BartConfig(), seed=0) -> BartPosterior:
    """Fit BART to a continuous outcome; deterministic given (inputs, seed).

    The outcome is standardized internally (unless the config's
    ``standardize`` hook is off) and draws are returned on the original
    scale. Each sweep updates every tree by one MH move plus conjugate leaf
    redraws, then the noise variance from its inverse-gamma full
    conditional.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per outcome")
    n = y.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    config.validate()
    rng = np.random.default_rng(seed)

    if config.standardize:
        center = float(y.mean())
        sd = float(y.std())
        scale = sd if sd > 0 else 1.0
    else:
        center, scale = 0.0, 1.0
    y_work = (y - center) / scale

    sampler = ForestSampler(X, config)
    resid = y_work.copy()
    sigma = config.fixed_sigma if config.fixed_sigma is not None else 1.0
    prior = config.sigma_prior
    lam = _sigma_prior_scale(prior, float(y_work.var()))

    keep = config.n_retained
    draws = np.empty((keep, n))
    sigma_draws = np.empty(keep)
    k = 0
    for it in range(config.iterations):
        sampler.sweep(resid, sigma, rng)
        if config.fixed_sigma is None and not config.prior_only:
            ssr = float(resid @ resid)
            shape = 0.5 * (prior.nu + n)
            rate = 0.5 * (prior.nu * lam + ssr)
            sigma = math.sqrt(rate / rng.gamma(shape))
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws[k] = center + scale * (y_work - resid)
            sigma_draws[k] = scale * sigma
            k += 1
    return BartPosterior(
        draws=draws,
        sigma_draws=sigma_draws,
        probability_draws=None,
        acceptance_rate=sampler.acceptance_rate,
    )


def fit_binary_probit(X, d, config: BartConfig = BartConfig(), seed=0) -> BartPosterior:
    """Probit BART via truncated-normal data augmentation.

    Latent utilities are N(forest(x), 1), positive exactly for d=1; each
    sweep redraws them given the current forest, then updates the trees
    against the latent residuals with the noise sd pinned at 1.
    ``probability_draws`` are the normal CDF of the forest output.
    """
    X = np.asarray(X, dtype=float)
    d = np.asarray(d)
    if X.ndim != 2 or X.shape[0] != d.shape[0]:
        raise ValueError("X must be 2-D with one row per outcome")
    if not np.all((d == 0) | (d == 1)):
        raise ValueError("d must be binary")
    if d.min() == d.max():
        raise ValueError("d must contain both classes")
    config = replace(config, standardize=False, fixed_sigma=1.0)
    config.validate()
    rng = np.random.default_rng(seed)

    n = d.shape[0]
    pos = d == 1
    neg = ~pos
    sampler = ForestSampler(X, config)
    g = np.zeros(n)

    keep = config.n_retained
    draws = np.empty((keep, n))
    probs = np.empty((keep, n))
    k = 0
    for it in range(config.iterations):
        # Albert-Chib latent draws by inverse survival / CDF sampling
        u = rng.random(n)
        z = np.empty(n)
        w_pos = np.maximum(u[pos] * ndtr(g[pos]), 1e-300)
        z[pos] = g[pos] - ndtri(w_pos)
        w_neg = np.maximum(u[neg] * ndtr(-g[neg]), 1e-300)
        z[neg] = g[neg] + ndtri(w_neg)

        resid = z - g
        sampler.sweep(resid, 1.0, rng)
        g = z - resid
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws[k] = g
            probs[k] = np.clip(ndtr(g), 1e-12, 1.0 - 1e-12)
            k += 1
    return BartPosterior(
        draws=draws,
        sigma_draws=None,
        probability_draws=probs,
        acceptance_rate=sampler.acceptance_rate,
    )
