import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import gammaln

from ardnet.likelihood import (ard_log_likelihood, degree_from_nu, expected_ard,
                               grad_log_posterior, log_lambda, log_posterior,
                               log_posterior_terms, nu_from_degree)
from ardnet.model import ModelParams, Prior, PriorConfig
from ardnet.simlab import ExperimentConfig, simulate_dgp
from ardnet.sphere import sample_uniform, sample_vmf


def c3(k):
    # independent closed form of the D=3 constant
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = k / (4 * np.pi * np.sinh(k))
    return np.where(k < 1e-8, 1 / (4 * np.pi), out)


def lam_oracle(d, b, zeta, eta, theta):
    rho = np.sqrt(zeta**2 + eta**2 + 2 * zeta * eta * np.cos(theta))
    return d * b * c3(zeta) * c3(eta) / (c3(0.0) * c3(rho))


def test_expected_ard_collapses():
    assert expected_ard(12.0, 0.2, 0.0, 4.0, 1.1) == pytest.approx(2.4)
    assert expected_ard(12.0, 0.2, 3.0, 0.0, 1.1) == pytest.approx(2.4)


def test_expected_ard_reference_value():
    assert expected_ard(20, 0.1, 0.3, 5, 0.0) == pytest.approx(2.509, abs=5e-4)
    assert expected_ard(20, 0.1, 0.3, 5, 0.0) == pytest.approx(lam_oracle(20, 0.1, 0.3, 5, 0.0), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(d=st.floats(0.5, 100), b=st.floats(0.01, 1), zeta=st.floats(0.01, 20),
       eta=st.floats(0.01, 40), theta=st.floats(0, np.pi))
def test_expected_ard_matches_oracle(d, b, zeta, eta, theta):
    assert expected_ard(d, b, zeta, eta, theta) == pytest.approx(
        max(lam_oracle(d, b, zeta, eta, theta), 1e-12), rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(zeta=st.floats(0.05, 30), eta=st.floats(0.05, 30), D=st.integers(3, 5))
def test_expected_ard_monotone_and_symmetric(zeta, eta, D):
    theta = np.linspace(0, np.pi, 50)
    lam = expected_ard(10.0, 0.3, zeta, eta, theta, D)
    assert np.all(np.diff(lam) <= 1e-12 * lam[:-1])
    assert np.allclose(lam, expected_ard(10.0, 0.3, eta, zeta, theta, D), rtol=1e-10)


def test_likelihood_zero_counts():
    lam = np.array([[0.5, 2.0], [1.5, 0.1]])
    assert ard_log_likelihood(np.zeros((2, 2)), lam) == pytest.approx(-lam.sum())


def test_likelihood_single_cell():
    assert ard_log_likelihood(np.array([[2]]), np.array([[2.0]])) == pytest.approx(np.log(2) - 2)
    assert ard_log_likelihood(np.array([[2]]), np.array([[2.0]])) == pytest.approx(-1.3069, abs=1e-4)


def test_likelihood_matches_scipy_poisson():
    rng = np.random.default_rng(0)
    lam = rng.gamma(2.0, 1.0, (5, 4))
    y = rng.poisson(lam)
    assert ard_log_likelihood(y, lam) == pytest.approx(stats.poisson.logpmf(y, lam).sum())


def test_likelihood_floor_keeps_finite():
    assert np.isfinite(ard_log_likelihood(np.array([[3]]), np.array([[0.0]])))


def test_true_params_beat_permuted_positions():
    cfg = ExperimentConfig(seed=21)
    truth = simulate_dgp(cfg, cfg.rep_rng(0))
    y = truth.data.y
    base = ard_log_likelihood(y, truth.params)
    rng = np.random.default_rng(1)
    wins = 0
    for _ in range(100):
        p = dataclasses.replace(truth.params, z=truth.params.z[rng.permutation(len(truth.params.z))])
        wins += base > ard_log_likelihood(y, p)
    assert wins >= 95


def _random_params(rng, m=4, K=4, D=3):
    return ModelParams(
        z=sample_uniform(m, D, rng), d=rng.uniform(3, 30, m), beta=np.log(rng.uniform(0.05, 0.5, K)),
        centers=sample_uniform(K, D, rng), eta=rng.uniform(1, 10, K), zeta=float(rng.uniform(0.2, 3)),
        mu_d=2.0, sigma2_d=0.7, mu_beta=-2.0, sigma2_beta=1.0, fixed_centers=(0, 1, 2))


def test_posterior_support(tiny_data):
    p = _random_params(np.random.default_rng(0))
    priors = PriorConfig()
    assert log_posterior(dataclasses.replace(p, zeta=-0.1), tiny_data, priors) == -np.inf
    bad_eta = p.eta.copy()
    bad_eta[0] = -1
    assert log_posterior(dataclasses.replace(p, eta=bad_eta), tiny_data, priors) == -np.inf


def test_posterior_additivity(tiny_data):
    rng = np.random.default_rng(2)
    priors = PriorConfig(degree_mode="observed")
    a, b = _random_params(rng), _random_params(rng)
    diff = log_posterior(a, tiny_data, priors) - log_posterior(b, tiny_data, priors)
    ta, tb = log_posterior_terms(a, tiny_data, priors), log_posterior_terms(b, tiny_data, priors)
    assert diff == pytest.approx(sum(ta[k] - tb[k] for k in ta))
    lik = ard_log_likelihood(tiny_data.y, a) - ard_log_likelihood(tiny_data.y, b)
    assert ta["likelihood"] - tb["likelihood"] == pytest.approx(lik)


def test_default_prior_terms_match_density_oracle(tiny_data):
    p = _random_params(np.random.default_rng(3))
    terms = log_posterior_terms(p, tiny_data, PriorConfig())
    # Gamma(shape a, rate b): a log b - lgamma(a) + (a - 1) log x - b x
    gam = lambda x, a, b: a * np.log(b) - gammaln(a) + (a - 1) * np.log(x) - b * x
    assert terms["zeta"] == pytest.approx(gam(p.zeta, 0.5, 0.5))
    assert terms["eta"] == pytest.approx(np.sum(gam(p.eta, 5.0, 0.1)))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("degree_mode", ["observed", "estimated"])
def test_gradient_matches_finite_differences(tiny_data, seed, degree_mode):
    rng = np.random.default_rng(seed)
    p = _random_params(rng)
    priors = PriorConfig(degree_mode=degree_mode)
    g = grad_log_posterior(p, tiny_data, priors)
    h = 1e-5

    def f(**kw):
        return log_posterior(dataclasses.replace(p, **kw), tiny_data, priors)

    fd = (f(zeta=p.zeta + h) - f(zeta=p.zeta - h)) / (2 * h)
    assert g["zeta"] == pytest.approx(fd, rel=1e-4, abs=1e-6)
    for k in range(p.eta.size):
        up, dn = p.eta.copy(), p.eta.copy()
        up[k] += h
        dn[k] -= h
        assert g["eta"][k] == pytest.approx((f(eta=up) - f(eta=dn)) / (2 * h), rel=1e-4, abs=1e-6)
    for i in range(p.d.size):
        up, dn = p.d.copy(), p.d.copy()
        up[i] *= np.exp(h)
        dn[i] *= np.exp(-h)
        assert g["log_d"][i] == pytest.approx((f(d=up) - f(d=dn)) / (2 * h), rel=1e-4, abs=1e-6)


def test_log_lambda_shape_and_floor():
    p = _random_params(np.random.default_rng(4))
    ll = log_lambda(p)
    assert ll.shape == (4, 4) and np.all(ll >= np.log(1e-12))


def test_degree_from_nu_examples():
    assert np.allclose(degree_from_nu(np.full(250, -1.27), 0.0, 250), 250 * np.exp(-2.54))
    assert np.allclose(degree_from_nu(np.full(250, -1.27), 0.0, 250), 19.72, atol=0.01)
    assert degree_from_nu(np.zeros(1), 0.0, 1)[0] == pytest.approx(1.0)


def test_degree_shift_scaling():
    rng = np.random.default_rng(0)
    nu = rng.normal(-1, 0.5, 30)
    c = 0.4
    ratio = degree_from_nu(nu + c, 0.5, 30) / degree_from_nu(nu, 0.5, 30)
    assert np.allclose(ratio, np.exp(2 * c))


def test_nu_from_degree_examples():
    nu = nu_from_degree(np.full(10, 5.0), 0.0, 10)
    assert np.allclose(nu, 0.5 * np.log(5.0 / 10))
    d = np.random.default_rng(1).uniform(1, 30, 10)
    assert np.allclose(nu_from_degree(4 * d, 0.0, 10) - nu_from_degree(d, 0.0, 10), np.log(2))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), zeta=st.floats(0, 30), n=st.integers(1, 300), D=st.integers(3, 5))
def test_degree_round_trip(seed, zeta, n, D):
    nu = np.random.default_rng(seed).normal(-1.3, 1.0, n)
    back = nu_from_degree(degree_from_nu(nu, zeta, n, D), zeta, n, D)
    assert np.max(np.abs(back - nu)) < 1e-8


def test_nu_from_degree_rejects_nonpositive():
    with pytest.raises(ValueError):
        nu_from_degree(np.array([1.0, 0.0]), 0.3, 2)
