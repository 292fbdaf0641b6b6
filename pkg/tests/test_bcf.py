import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bcfsim.bart import BartConfig, FixedScale, HalfCauchy, HalfNormal
from bcfsim.bcf import (
    BcfConfig, BcfFit, PropensityMode, ate_posterior, build_design,
    cate_intervals, fit_bcf,
)


def _small_config(iterations=80, burn_in=40, **kw):
    mu = BartConfig(num_trees=20, base=0.95, power=2.0,
                    leaf_scale_prior=HalfCauchy(2.0),
                    iterations=iterations, burn_in=burn_in)
    tau = BartConfig(num_trees=10, base=0.25, power=3.0,
                     leaf_scale_prior=HalfNormal(1.0),
                     iterations=iterations, burn_in=burn_in)
    probit = BartConfig(num_trees=20, iterations=iterations, burn_in=burn_in,
                        leaf_scale_prior=FixedScale(1.5))
    return BcfConfig(mu_config=mu, tau_config=tau, propensity_config=probit,
                     **kw)


def _toy_data(n=80, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 3))
    z = (rng.random(n) < 0.5).astype(int)
    y = X[:, 0] + 0.8 * z + rng.normal(0, 0.3, size=n)
    return X, z, y


def _fake_fit(tau_draws, mode=PropensityMode.NO_PROPENSITY):
    tau_draws = np.asarray(tau_draws, dtype=float)
    k, n = tau_draws.shape
    return BcfFit(
        mu_draws=np.zeros((k, n)),
        tau_draws=tau_draws,
        sigma_draws=np.ones(k),
        pi_used=np.full(n, 0.5),
        mode=mode,
        fit_seconds=0.0,
    )


# ------------------------------------------------------------------- design

def test_build_design_appends_column():
    X = np.arange(6.0).reshape(3, 2)
    pi = np.array([0.2, 0.5, 0.8])
    design = build_design(X, pi)
    assert design.shape == (3, 3)
    assert_array_equal(design[:, :2], X)
    assert_array_equal(design[:, 2], pi)


def test_build_design_validation():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError):
        build_design(X, np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        build_design(X, np.array([0.1, 0.2, 1.2]))
    with pytest.raises(ValueError):
        build_design(np.zeros(3), np.array([0.1, 0.2, 0.3]))


# ------------------------------------------------------------- config rules

def test_config_requires_matching_chains():
    mu = BartConfig(iterations=100, burn_in=50)
    tau = BartConfig(iterations=120, burn_in=50)
    with pytest.raises(ValueError):
        BcfConfig(mu_config=mu, tau_config=tau).validate()
    tau = BartConfig(iterations=100, burn_in=40)
    with pytest.raises(ValueError):
        BcfConfig(mu_config=mu, tau_config=tau).validate()


def test_config_interval_level_bounds():
    with pytest.raises(ValueError):
        BcfConfig(interval_level=1.0).validate()
    with pytest.raises(ValueError):
        BcfConfig(interval_level=0.0).validate()
    BcfConfig().validate()


# ------------------------------------------------------------ mode contract

def test_pi_used_per_mode():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=10, burn_in=5)
    no = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=1)
    assert_array_equal(no.pi_used, np.full(len(y), 0.5))
    assert no.mode is PropensityMode.NO_PROPENSITY

    pi = np.clip(0.3 + 0.4 * X[:, 0], 0.0, 1.0)
    true = fit_bcf(X, z, y, PropensityMode.TRUE_PROPENSITY, pi_true=pi,
                   config=cfg, seed=1)
    assert_array_equal(true.pi_used, pi)

    est = fit_bcf(X, z, y, "estimated_propensity", config=cfg, seed=1)
    assert est.pi_used.shape == (len(y),)
    assert np.all((est.pi_used > 0) & (est.pi_used < 1))
    # the estimate is a posterior mean, not a copy of anything supplied
    assert not np.array_equal(est.pi_used, pi)


def test_pi_true_argument_is_gated():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=10, burn_in=5)
    pi = np.full(len(y), 0.4)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "true_propensity", config=cfg, seed=0)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "no_propensity", pi_true=pi, config=cfg, seed=0)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "estimated_propensity", pi_true=pi, config=cfg, seed=0)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "true_propensity", pi_true=pi[:-1], config=cfg, seed=0)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "true_propensity", pi_true=pi + 0.7, config=cfg, seed=0)


def test_input_validation():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=10, burn_in=5)
    with pytest.raises(ValueError):
        fit_bcf(X, z[:-1], y, "no_propensity", config=cfg)
    with pytest.raises(ValueError):
        fit_bcf(X, z + 1, y, "no_propensity", config=cfg)
    with pytest.raises(ValueError):
        fit_bcf(X, np.zeros_like(z), y, "no_propensity", config=cfg)
    with pytest.raises(ValueError):
        fit_bcf(X[:, 0], z, y, "no_propensity", config=cfg)
    with pytest.raises(ValueError):
        fit_bcf(X, z, y, "some_other_mode", config=cfg)


# -------------------------------------------------------------- determinism

def test_fit_is_deterministic_given_seed():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=30, burn_in=10)
    a = fit_bcf(X, z, y, "estimated_propensity", config=cfg, seed=7)
    b = fit_bcf(X, z, y, "estimated_propensity", config=cfg, seed=7)
    c = fit_bcf(X, z, y, "estimated_propensity", config=cfg, seed=8)
    assert_array_equal(a.mu_draws, b.mu_draws)
    assert_array_equal(a.tau_draws, b.tau_draws)
    assert_array_equal(a.sigma_draws, b.sigma_draws)
    assert_array_equal(a.pi_used, b.pi_used)
    assert not np.array_equal(a.tau_draws, c.tau_draws)


def test_constant_propensity_column_is_inert():
    # a constant design column has no valid cutpoints, so filling it with
    # 0.5 or any other constant must give the identical chain
    X, z, y = _toy_data()
    cfg = _small_config(iterations=30, burn_in=10)
    no = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=5)
    const = fit_bcf(X, z, y, "true_propensity",
                    pi_true=np.full(len(y), 0.7), config=cfg, seed=5)
    assert_array_equal(no.mu_draws, const.mu_draws)
    assert_array_equal(no.tau_draws, const.tau_draws)
    assert_array_equal(no.sigma_draws, const.sigma_draws)


# ----------------------------------------------------------------- recovery

def test_recovers_constant_treatment_effect():
    rng = np.random.default_rng(42)
    n = 300
    X = rng.random((n, 3))
    z = (rng.random(n) < 0.5).astype(int)
    y = X[:, 1] + 2.0 * z + rng.normal(0, 0.3, size=n)
    cfg = _small_config(iterations=300, burn_in=150)
    fit = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=9)
    ate = ate_posterior(fit)
    assert abs(ate["mean"] - 2.0) < 0.3
    assert ate["lower"] < 2.0 < ate["upper"]
    cate = cate_intervals(fit)
    rmse = math.sqrt(float(np.mean((cate["mean"] - 2.0) ** 2)))
    assert rmse < 0.5


def test_noise_scale_recovered_at_unit_sigma():
    # n = 250 with unit noise: sigma draws stay positive and their median
    # lands near the truth
    rng = np.random.default_rng(45)
    n = 250
    X = rng.random((n, 3))
    z = (rng.random(n) < 0.5).astype(int)
    y = np.sin(3.0 * X[:, 0]) + 0.5 * z + rng.normal(0.0, 1.0, size=n)
    cfg = _small_config(iterations=300, burn_in=150)
    fit = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=11)
    assert np.all(fit.sigma_draws > 0)
    assert 0.8 < float(np.median(fit.sigma_draws)) < 1.25


def test_treated_outcomes_shift_tau_not_mu():
    # flipping y only on treated units must leave an imprint in tau
    rng = np.random.default_rng(43)
    n = 200
    X = rng.random((n, 2))
    z = (rng.random(n) < 0.5).astype(int)
    y = X[:, 0] + rng.normal(0, 0.2, size=n)
    cfg = _small_config(iterations=200, burn_in=100)
    base = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=3)
    bumped = fit_bcf(X, z, y + 1.5 * z, "no_propensity", config=cfg, seed=3)
    ate_base = ate_posterior(base)["mean"]
    ate_bumped = ate_posterior(bumped)["mean"]
    assert ate_bumped - ate_base > 1.0


# ----------------------------------------------------------------- summaries

def test_cate_intervals_quantile_oracle():
    k = 100
    tau = np.tile(np.arange(1.0, k + 1.0)[:, None], (1, 2))
    fit = _fake_fit(tau)
    out = cate_intervals(fit, level=0.95)
    assert_allclose(out["mean"], [50.5, 50.5])
    assert_allclose(out["lower"], np.quantile(np.arange(1.0, 101.0), 0.025))
    assert_allclose(out["upper"], np.quantile(np.arange(1.0, 101.0), 0.975))


def test_cate_intervals_nest_by_level():
    rng = np.random.default_rng(44)
    fit = _fake_fit(rng.normal(size=(500, 4)))
    narrow = cate_intervals(fit, level=0.5)
    wide = cate_intervals(fit, level=0.95)
    assert np.all(wide["lower"] <= narrow["lower"])
    assert np.all(narrow["upper"] <= wide["upper"])
    assert np.all(narrow["lower"] <= narrow["upper"])


def test_ate_posterior_is_rowwise_mean():
    tau = np.array([[1.0, 3.0], [2.0, 4.0], [0.0, 0.0]])
    out = ate_posterior(_fake_fit(tau), level=0.5)
    assert_allclose(out["draws"], [2.0, 3.0, 0.0])
    assert_allclose(out["mean"], 5.0 / 3.0)
    assert out["lower"] <= out["mean"] <= out["upper"]


def test_summary_validation():
    fit = _fake_fit(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        cate_intervals(fit, level=1.0)
    with pytest.raises(ValueError):
        ate_posterior(fit, level=0.0)
    empty = _fake_fit(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        cate_intervals(empty)
    with pytest.raises(ValueError):
        ate_posterior(empty)


def test_fit_metadata():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=10, burn_in=5)
    fit = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=0)
    assert fit.fit_seconds > 0
    assert fit.mu_draws.shape == (5, len(y))
    assert fit.tau_draws.shape == (5, len(y))
    assert fit.sigma_draws.shape == (5,)
    assert np.all(fit.sigma_draws > 0)


def test_seed_sequence_accepted():
    X, z, y = _toy_data()
    cfg = _small_config(iterations=10, burn_in=5)
    ss = np.random.SeedSequence(123)
    a = fit_bcf(X, z, y, "no_propensity", config=cfg, seed=ss)
    b = fit_bcf(X, z, y, "no_propensity", config=cfg,
                seed=np.random.SeedSequence(123))
    assert_array_equal(a.tau_draws, b.tau_draws)
