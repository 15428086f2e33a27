"""Poisson ARD likelihood, posterior density and degree/gregariousness maps."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .model import ArdDataset, ModelParams, PriorConfig
from .sphere import log_vmf_norm_const, mean_resultant_length

LAMBDA_FLOOR = 1e-12
_LOG_FLOOR = np.log(LAMBDA_FLOOR)


def log_proximity_factor(zeta, eta, cos_theta, D: int = 3):
    """log of C(zeta) C(eta) / (C(0) C(sqrt(zeta^2 + eta^2 + 2 zeta eta cos)))."""
    zeta = np.asarray(zeta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    cos_theta = np.asarray(cos_theta, dtype=float)
    rho = np.sqrt(np.maximum(zeta**2 + eta**2 + 2.0 * zeta * eta * cos_theta, 0.0))
    return (log_vmf_norm_const(zeta, D) + log_vmf_norm_const(eta, D)
            - log_vmf_norm_const(0.0, D) - log_vmf_norm_const(rho, D))


def expected_ard(d, b, zeta, eta, theta, D: int = 3):
    """Expected ARD count lambda for degree d, group share b and angle theta."""
    logl = (np.log(d) + np.log(b)
            + log_proximity_factor(zeta, eta, np.cos(theta), D))
    return np.exp(np.maximum(logl, _LOG_FLOOR))


def log_lambda(params: ModelParams, D: int | None = None) -> np.ndarray:
    """m x K matrix of floored log expected counts."""
    D = params.z.shape[1] if D is None else D
    cos = params.z @ params.centers.T
    base = log_proximity_factor(params.zeta, params.eta[None, :], cos, D)
    return np.maximum(np.log(params.d)[:, None] + params.beta[None, :] + base, _LOG_FLOOR)


def poisson_logpmf(y, loglam):
    return y * loglam - np.exp(loglam) - gammaln(y + 1.0)


def ard_log_likelihood(y, params_or_loglam) -> float:
    """Sum over cells of the Poisson log pmf, including the log(y!) term."""
    if isinstance(params_or_loglam, ModelParams):
        loglam = log_lambda(params_or_loglam)
    else:
        with np.errstate(divide="ignore"):
            loglam = np.maximum(np.log(np.asarray(params_or_loglam, dtype=float)), _LOG_FLOOR)
    return float(np.sum(poisson_logpmf(np.asarray(y, dtype=float), loglam)))


def membership_log_density(params: ModelParams, memberships) -> float:
    """Sum of log vMF(z_j | center_k, eta_k) over respondents j in group k."""
    if memberships is None:
        return 0.0
    D = params.z.shape[1]
    counts = memberships.sum(axis=0)
    resultant = memberships.T.astype(float) @ params.z
    dots = np.sum(resultant * params.centers, axis=1)
    return float(np.sum(counts * log_vmf_norm_const(params.eta, D) + params.eta * dots))


def _sigma_hyper_logprior(prior, sigma2):
    # "flat" is flat in sigma, i.e. p(sigma^2) proportional to sigma^-1
    if prior.kind == "flat":
        return -0.5 * np.log(sigma2)
    return float(prior.logpdf(sigma2))


def log_posterior_terms(params: ModelParams, data: ArdDataset,
                        priors: PriorConfig) -> dict:
    """Additive pieces of the log posterior; a -inf piece marks zero density."""
    terms = {}
    if not priors.latent:
        # no latent geometry: zeta is held at zero and positions play no role
        if params.zeta != 0 or params.sigma2_d <= 0 or params.sigma2_beta <= 0:
            return {"support": -np.inf}
    elif not (params.zeta > 0) or np.any(params.eta < 0) or not np.all(np.isfinite(params.eta)):
        return {"support": -np.inf}
    elif params.sigma2_d <= 0 or params.sigma2_beta <= 0:
        return {"support": -np.inf}
    terms["likelihood"] = ard_log_likelihood(data.y, params)
    if priors.latent:
        if priors.membership_term:
            terms["membership"] = membership_log_density(params, data.ard_memberships())
        terms["zeta"] = float(priors.zeta_prior.logpdf(params.zeta))
        terms["eta"] = float(np.sum(priors.eta_prior.logpdf(params.eta)))
    if priors.degree_mode != "observed":
        logd = np.log(params.d)
        sd = np.sqrt(params.sigma2_d)
        terms["degree"] = float(np.sum(-0.5 * ((logd - params.mu_d) / sd) ** 2
                                       - np.log(sd) - 0.5 * np.log(2 * np.pi)))
        terms["mu_d"] = 0.0 if priors.degree_mode == "pinned" else float(priors.mu_d_prior.logpdf(params.mu_d))
        terms["sigma2_d"] = float(_sigma_hyper_logprior(priors.sigma2_d_prior, params.sigma2_d))
    if priors.prevalence_mode == "estimated":
        sd = np.sqrt(params.sigma2_beta)
        terms["beta"] = float(np.sum(-0.5 * ((params.beta - params.mu_beta) / sd) ** 2
                                     - np.log(sd) - 0.5 * np.log(2 * np.pi)))
        terms["sigma2_beta"] = float(-0.5 * np.log(params.sigma2_beta))
    return terms


def log_posterior(params: ModelParams, data: ArdDataset, priors: PriorConfig) -> float:
    """Unnormalized log posterior density of ``params``."""
    total = float(sum(log_posterior_terms(params, data, priors).values()))
    return total if not np.isnan(total) else -np.inf


def grad_log_posterior(params: ModelParams, data: ArdDataset, priors: PriorConfig) -> dict:
    """Analytic gradient with respect to zeta, each eta_k and each log d_i.

    Uses d/dk log C_D(k) = -A_D(k). Gamma priors only for zeta and eta.
    """
    D = params.z.shape[1]
    y = data.y.astype(float)
    cos = params.z @ params.centers.T
    zeta, eta = params.zeta, params.eta[None, :]
    rho = np.sqrt(zeta**2 + eta**2 + 2 * zeta * eta * cos)
    raw = np.log(params.d)[:, None] + params.beta[None, :] + log_proximity_factor(zeta, eta, cos, D)
    live = raw > _LOG_FLOOR
    resid = np.where(live, y - np.exp(raw), 0.0)
    a_rho = mean_resultant_length(rho, D)
    dzeta = -mean_resultant_length(zeta, D) + a_rho * (zeta + eta * cos) / rho
    deta = -mean_resultant_length(eta, D) + a_rho * (eta + zeta * cos) / rho
    g_zeta = float(np.sum(resid * dzeta))
    g_eta = np.sum(resid * deta, axis=0)
    mem = data.ard_memberships() if priors.membership_term else None
    if mem is not None:
        res_k = mem.T.astype(float) @ params.z
        g_eta = g_eta + (-mem.sum(axis=0) * mean_resultant_length(params.eta, D)
                         + np.sum(res_k * params.centers, axis=1))
    for prior, name in ((priors.zeta_prior, "zeta"), (priors.eta_prior, "eta")):
        if prior.kind != "gamma":
            raise NotImplementedError("gradient only implemented for gamma priors")
    g_zeta += (priors.zeta_prior.a - 1) / zeta - priors.zeta_prior.b
    g_eta = g_eta + (priors.eta_prior.a - 1) / params.eta - priors.eta_prior.b
    g_logd = np.sum(resid, axis=1)
    if priors.degree_mode != "observed":
        g_logd = g_logd - (np.log(params.d) - params.mu_d) / params.sigma2_d
    return {"zeta": g_zeta, "eta": g_eta, "log_d": g_logd}


def degree_ratio(zeta, D: int) -> float:
    """C(0) / C(zeta)."""
    return float(np.exp(log_vmf_norm_const(0.0, D) - log_vmf_norm_const(zeta, D)))


def degree_from_nu(nu, zeta: float, n: int, D: int = 3) -> np.ndarray:
    """Expected degrees d_i = n exp(nu_i) mean_j exp(nu_j) C(0)/C(zeta)."""
    nu = np.asarray(nu, dtype=float)
    return n * np.exp(nu) * np.mean(np.exp(nu)) * degree_ratio(zeta, D)


def nu_from_degree(d, zeta: float, n: int, D: int = 3, tol: float = 1e-10,
                   maxiter: int = 500) -> np.ndarray:
    """Invert :func:`degree_from_nu`.

    With h_i = d_i / d_1 every nu_i = nu_1 + log h_i, which leaves a single
    monotone equation in nu_1: log d_1 = log(n r mean h) + 2 nu_1.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise ValueError("degrees must be positive and finite")
    log_h = np.log(d) - np.log(d[0])
    const = np.log(n * degree_ratio(zeta, D) * np.mean(np.exp(log_h)))

    def resid(nu1):
        return const + 2.0 * nu1 - np.log(d[0])

    centre = 0.5 * (np.log(d[0]) - const)
    lo, hi = centre - 10.0, centre + 10.0
    nu1 = brentq(resid, lo, hi, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps, maxiter=maxiter)
    nu = nu1 + log_h
    check = np.max(np.abs(np.log(degree_from_nu(nu, zeta, n, D)) - np.log(d)))
    if check > tol * 10:
        raise RuntimeError(f"degree inversion did not converge (max log residual {check:.2e})")
    return nu
