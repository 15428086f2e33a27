"""Metropolis-within-Gibbs sampler for the latent surface ARD model.

One sweep updates, in order: respondent positions (vMF random walk), free
group centers (conjugate vMF proposal with a Metropolis correction for the
ARD term), log degrees, log prevalences, concentrations, zeta, and then the
conjugate hyperparameter draws. Scalar-per-node and scalar-per-group blocks
are updated in parallel across their components because, given everything
else, their conditionals factorize.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .likelihood import LAMBDA_FLOOR, log_posterior, log_proximity_factor
from .model import Anchors, ArdDataset, ModelParams, PriorConfig, initialize_params

log = logging.getLogger(__name__)

_LOG_FLOOR = np.log(LAMBDA_FLOOR)
SCALE_BOUNDS = (1e-4, 1e4)
ALL_BLOCKS = ("z", "centers", "centers_rw", "d", "beta", "eta", "zeta", "hyper")
MH_BLOCKS = ("z", "centers_rw", "d", "beta", "eta", "zeta")
# held at their starting values for the first warm-up sweeps of burn-in so the
# positions can organize before the latent intensity is free to collapse
WARMUP_FROZEN = ("eta", "zeta")
# Sphere moves use vMF proposals with concentration 1 / scale**2. Past scale 1
# the proposal is close to uniform on the sphere, and letting adaptation push
# further scrambles z during burn-in: zeta then collapses toward 0 and the
# flatter target pushes the scale up again.
SPHERE_SCALE_MAX = {"z": 1.0, "centers_rw": 1.0}


class SamplerError(RuntimeError):
    """Numerical failure inside a sampler block."""


@dataclass
class PosteriorDraws:
    draws: list
    acceptance_log: list
    jump_scales: dict
    seed: int | None
    config: dict
    sweeps: list = field(default_factory=list)
    log_post: list = field(default_factory=list)
    scale_trace: list = field(default_factory=list)

    def trace(self, name: str) -> np.ndarray:
        """Stack one field over the retained draws (arrays gain a leading axis)."""
        return np.array([getattr(p, name) for p in self.draws])


@dataclass
class ChainDiagnostics:
    stats: dict

    def max_rhat(self) -> float:
        vals = [s["rhat"] for s in self.stats.values() if np.isfinite(s["rhat"])]
        return max(vals) if vals else float("nan")

    def degenerate(self) -> list:
        return [k for k, s in self.stats.items() if s["degenerate"]]


def adapt_jump_scale(window_acceptance: float, current_scale: float,
                     target: float = 0.3) -> float:
    """Multiplicative scale update exp(acceptance - target), clamped."""
    new = current_scale * np.exp(window_acceptance - target)
    return float(np.clip(new, *SCALE_BOUNDS))


def update_center_gibbs(directions, weights, eta_k: float, rng: np.random.Generator,
                        prior_mean=None, prior_kappa: float = 0.0):
    """Conjugate vMF draw for a group center.

    Treating the weighted directions as vMF(center, eta_k) observations under a
    vMF(prior_mean, prior_kappa) prior, the center is vMF with natural
    parameter eta_k * sum(w z) + prior_kappa * prior_mean. Returns the draw, the
    mean direction and the concentration; a zero resultant gives a uniform draw.
    """
    directions = np.asarray(directions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    vec = eta_k * (weights @ directions) if directions.size else 0.0
    if prior_mean is not None:
        vec = vec + prior_kappa * np.asarray(prior_mean, dtype=float)
    D = directions.shape[-1] if directions.size else np.asarray(prior_mean).size
    vec = np.broadcast_to(np.asarray(vec, dtype=float), (D,))
    kappa = float(np.linalg.norm(vec))
    if kappa < 1e-12:
        mean = np.eye(D)[0]
        return sphere.sample_uniform(1, D, rng)[0], mean, 0.0
    mean = vec / kappa
    return sphere.sample_vmf(mean, kappa, rng), mean, kappa


def _cell(y, logl):
    logl = np.maximum(logl, _LOG_FLOOR)
    return y * logl - np.exp(logl)


def _scaled_inv_chi2(df, scale, rng):
    return df * scale / rng.chisquare(df)


class _Chain:
    """Mutable sampler state with cached per-cell quantities."""

    def __init__(self, data: ArdDataset, priors: PriorConfig, params: ModelParams,
                 anchors: Anchors, rng: np.random.Generator):
        self.data = data
        self.priors = priors
        self.p = params
        self.anchors = anchors
        self.rng = rng
        self.D = priors.D
        self.y = data.y.astype(float)
        # census indicators of respondents: used to build center proposals and,
        # when enabled, as a vMF membership term in the target
        self.members = data.ard_memberships()
        self.mem = self.members if priors.membership_term else None
        self.latent = getattr(priors, "latent", True)
        self.free = np.array([k for k in range(data.K) if k not in anchors.groups], dtype=int)
        self.blocks = self._active_blocks()
        self.scales = {b: priors.initial_scale for b in MH_BLOCKS if b in self.blocks}
        self.window = {b: [0, 0] for b in self.blocks}
        self._refresh()

    def _active_blocks(self):
        pr = self.priors
        wanted = set(ALL_BLOCKS if pr.blocks is None else pr.blocks)
        if not self.latent:
            wanted -= {"z", "centers", "centers_rw", "eta", "zeta"}
        if "centers" not in wanted or len(self.free) == 0:
            wanted -= {"centers", "centers_rw"}
        if pr.degree_mode == "observed":
            wanted.discard("d")
        if pr.prevalence_mode == "census":
            wanted.discard("beta")
        return tuple(b for b in ALL_BLOCKS if b in wanted)

    def _refresh(self):
        p = self.p
        self.cos = p.z @ p.centers.T
        self.base = self._base(self.cos, p.zeta, p.eta) + p.beta[None, :]
        self.logd = np.log(p.d)

    def _base(self, cos, zeta, eta):
        if not self.latent:
            return np.zeros_like(cos)
        eta = np.asarray(eta, dtype=float)
        return log_proximity_factor(zeta, eta[None, :] if eta.ndim == 1 else eta, cos, self.D)

    def _tally(self, block, accepted, total):
        self.window[block][0] += int(accepted)
        self.window[block][1] += int(total)

    @staticmethod
    def _check(block, delta):
        if np.any(np.isnan(delta)):
            raise SamplerError(f"NaN log-posterior difference in block {block!r}")

    # blocks ---------------------------------------------------------------

    def update_z(self):
        p, rng = self.p, self.rng
        kappa = 1.0 / self.scales["z"] ** 2
        prop = sphere.sample_vmf(p.z, kappa, rng)
        cos_new = prop @ p.centers.T
        base_new = self._base(cos_new, p.zeta, p.eta) + p.beta[None, :]
        ld = self.logd[:, None]
        delta = np.sum(_cell(self.y, ld + base_new) - _cell(self.y, ld + self.base), axis=1)
        if self.mem is not None:
            delta += np.sum(self.mem * p.eta[None, :] * (cos_new - self.cos), axis=1)
        self._check("z", delta)
        acc = np.log(rng.random(delta.size)) < delta
        p.z[acc] = prop[acc]
        self.cos[acc] = cos_new[acc]
        self.base[acc] = base_new[acc]
        self._tally("z", acc.sum(), acc.size)

    def _columns_target(self, cols, centers):
        """Per-column log target of candidate centers for groups ``cols``."""
        p = self.p
        cos = p.z @ centers.T
        base = self._base(cos, p.zeta, p.eta[cols]) + p.beta[cols][None, :]
        val = np.sum(_cell(self.y[:, cols], self.logd[:, None] + base), axis=0)
        if self.mem is not None:
            val += p.eta[cols] * np.sum(self.mem[:, cols] * cos, axis=0)
        return val, cos, base

    def _center_weights(self):
        """m x F weights defining each free center's conjugate proposal.

        Census members of the group when there are any, otherwise each
        respondent's share of ARD contacts in the group.
        """
        free = self.free
        rows = self.y.sum(axis=1, keepdims=True)
        share = np.divide(self.y[:, free], rows, out=np.zeros((self.y.shape[0], free.size)),
                          where=rows > 0)
        if self.members is None:
            return share
        mem = self.members[:, free].astype(float)
        has = mem.any(axis=0)
        return np.where(has[None, :], mem, share)

    def update_centers(self):
        """Independence move from the conjugate vMF proposal of each free center."""
        p, rng, free = self.p, self.rng, self.free
        vec = p.eta[free][:, None] * (self._center_weights().T @ p.z)
        kappa = np.linalg.norm(vec, axis=1)
        flat = kappa < 1e-12
        mean = np.where(flat[:, None], np.eye(self.D)[0], vec / np.where(flat, 1.0, kappa)[:, None])
        kappa = np.where(flat, 0.0, kappa)
        prop = sphere.sample_vmf(mean, kappa, rng)
        cur_t, _, _ = self._columns_target(free, p.centers[free])
        new_t, cos_new, base_new = self._columns_target(free, prop)
        # correct with q(current) / q(proposal); the vMF constants cancel
        log_alpha = new_t - cur_t + kappa * np.sum(mean * (p.centers[free] - prop), axis=1)
        self._check("centers", log_alpha)
        acc = np.log(rng.random(free.size)) < log_alpha
        cols = free[acc]
        p.centers[cols] = prop[acc]
        self.cos[:, cols] = cos_new[:, acc]
        self.base[:, cols] = base_new[:, acc]
        self._tally("centers", acc.sum(), acc.size)

    def update_centers_rw(self):
        """Joint vMF random walk on every free center, accepted column by column."""
        p, rng = self.p, self.rng
        free = self.free
        kappa = 1.0 / self.scales["centers_rw"] ** 2
        prop = sphere.sample_vmf(p.centers[free], kappa, rng)
        cos_new = p.z @ prop.T
        base_new = self._base(cos_new, p.zeta, p.eta[free]) + p.beta[free][None, :]
        ld = self.logd[:, None]
        y = self.y[:, free]
        delta = np.sum(_cell(y, ld + base_new) - _cell(y, ld + self.base[:, free]), axis=0)
        if self.mem is not None:
            delta += p.eta[free] * np.sum(self.mem[:, free] * (cos_new - self.cos[:, free]), axis=0)
        self._check("centers_rw", delta)
        acc = np.log(rng.random(delta.size)) < delta
        cols = free[acc]
        p.centers[cols] = prop[acc]
        self.cos[:, cols] = cos_new[:, acc]
        self.base[:, cols] = base_new[:, acc]
        self._tally("centers_rw", acc.sum(), acc.size)

    def update_d(self):
        p, rng = self.p, self.rng
        prop = self.logd + self.scales["d"] * rng.standard_normal(self.logd.size)
        delta = np.sum(_cell(self.y, prop[:, None] + self.base)
                       - _cell(self.y, self.logd[:, None] + self.base), axis=1)
        s2 = p.sigma2_d
        delta += -0.5 * ((prop - p.mu_d) ** 2 - (self.logd - p.mu_d) ** 2) / s2
        self._check("d", delta)
        acc = np.log(rng.random(delta.size)) < delta
        self.logd[acc] = prop[acc]
        p.d = np.exp(self.logd)
        self._tally("d", acc.sum(), acc.size)

    def update_beta(self):
        p, rng = self.p, self.rng
        step = self.scales["beta"] * rng.standard_normal(p.beta.size)
        prop = p.beta + step
        ld = self.logd[:, None]
        delta = np.sum(_cell(self.y, ld + self.base + step[None, :])
                       - _cell(self.y, ld + self.base), axis=0)
        delta += -0.5 * ((prop - p.mu_beta) ** 2 - (p.beta - p.mu_beta) ** 2) / p.sigma2_beta
        self._check("beta", delta)
        acc = np.log(rng.random(delta.size)) < delta
        p.beta = np.where(acc, prop, p.beta)
        self.base[:, acc] += step[acc][None, :]
        self._tally("beta", acc.sum(), acc.size)
        self._rescale_total_prop()

    def _rescale_total_prop(self):
        tp = self.data.total_prop
        if self.members is not None or tp is None or self.priors.degree_mode == "observed":
            return
        shift = np.log(tp) - np.log(np.sum(np.exp(self.p.beta)))
        self.p.beta = self.p.beta + shift
        self.base += shift
        self.logd -= shift
        self.p.d = np.exp(self.logd)

    def update_eta(self):
        p, rng, pr = self.p, self.rng, self.priors
        prop = p.eta + self.scales["eta"] * rng.standard_normal(p.eta.size)
        valid = prop > 0
        prop_safe = np.where(valid, prop, p.eta)
        base_new = self._base(self.cos, p.zeta, prop_safe) + p.beta[None, :]
        ld = self.logd[:, None]
        delta = np.sum(_cell(self.y, ld + base_new) - _cell(self.y, ld + self.base), axis=0)
        if self.mem is not None:
            counts = self.mem.sum(axis=0)
            dots = np.sum((self.mem.T.astype(float) @ p.z) * p.centers, axis=1)
            delta += counts * (sphere.log_vmf_norm_const(prop_safe, self.D)
                               - sphere.log_vmf_norm_const(p.eta, self.D))
            delta += (prop_safe - p.eta) * dots
        with np.errstate(divide="ignore", invalid="ignore"):
            delta += pr.eta_prior.logpdf(prop_safe) - pr.eta_prior.logpdf(p.eta)
        delta = np.where(valid, delta, -np.inf)
        self._check("eta", delta)
        acc = np.log(rng.random(delta.size)) < delta
        p.eta = np.where(acc, prop_safe, p.eta)
        self.base[:, acc] = base_new[:, acc]
        self._tally("eta", acc.sum(), acc.size)

    def update_zeta(self):
        p, rng, pr = self.p, self.rng, self.priors
        prop = p.zeta + self.scales["zeta"] * rng.standard_normal()
        ok = False
        if prop > 0:
            base_new = self._base(self.cos, prop, p.eta) + p.beta[None, :]
            ld = self.logd[:, None]
            delta = float(np.sum(_cell(self.y, ld + base_new) - _cell(self.y, ld + self.base)))
            with np.errstate(divide="ignore"):
                delta += float(pr.zeta_prior.logpdf(prop) - pr.zeta_prior.logpdf(p.zeta))
            self._check("zeta", np.array([delta]))
            if np.log(rng.random()) < delta:
                ok = True
                p.zeta = float(prop)
                self.base = base_new
        else:
            rng.random()
        self._tally("zeta", ok, 1)

    def update_hyper(self):
        p, rng, pr = self.p, self.rng, self.priors
        if pr.degree_mode != "observed":
            x = self.logd
            n = x.size
            if pr.degree_mode != "pinned":
                if pr.mu_d_prior.kind == "normal":
                    prec = n / p.sigma2_d + 1.0 / pr.mu_d_prior.b
                    mean = (x.sum() / p.sigma2_d + pr.mu_d_prior.a / pr.mu_d_prior.b) / prec
                    p.mu_d = float(mean + rng.standard_normal() / np.sqrt(prec))
                else:
                    p.mu_d = float(x.mean() + np.sqrt(p.sigma2_d / n) * rng.standard_normal())
            S = float(np.sum((x - p.mu_d) ** 2))
            if pr.sigma2_d_prior.kind == "scaled_inv_chi2":
                nu0, s0 = pr.sigma2_d_prior.a, pr.sigma2_d_prior.b
                p.sigma2_d = float(_scaled_inv_chi2(nu0 + n, (nu0 * s0 + S) / (nu0 + n), rng))
            elif n > 1:
                p.sigma2_d = float(_scaled_inv_chi2(n - 1, S / (n - 1), rng))
        if pr.prevalence_mode == "estimated":
            x = p.beta
            K = x.size
            p.mu_beta = float(x.mean() + np.sqrt(p.sigma2_beta / K) * rng.standard_normal())
            S = float(np.sum((x - p.mu_beta) ** 2))
            p.sigma2_beta = float(_scaled_inv_chi2(K - 1, S / (K - 1), rng))
        self._tally("hyper", 1, 1)

    def pin_anchors(self):
        p = self.p
        idx = list(self.anchors.groups)
        # anchors were validated when the Anchors object was built
        R = sphere.procrustes_rotation(p.centers[idx], self.anchors.targets)
        p.z = sphere.normalize(p.z @ R.T)
        p.centers = sphere.normalize(p.centers @ R.T)
        p.centers[idx] = self.anchors.targets
        self._refresh()

    def sweep(self, frozen=()):
        for b in self.blocks:
            if b not in frozen:
                getattr(self, f"update_{b}")()
        if self.latent:
            self.pin_anchors()

    def close_window(self):
        rates = {}
        for b, (a, t) in self.window.items():
            rates[b] = a / t if t else float("nan")
            self.window[b] = [0, 0]
        return rates


def run_chain(data: ArdDataset, priors: PriorConfig, anchors: Anchors | None,
              rng: np.random.Generator | int | None = None, init: ModelParams | None = None,
              progress: bool = False) -> PosteriorDraws:
    """Run one chain for ``priors.T`` sweeps and keep the thinned second half.

    With T = 0 the result holds only the initial state.
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    if anchors is None:
        anchors = Anchors.default(data.K, priors.D)
    sphere.check_anchor_targets(anchors.targets)
    params = initialize_params(data, priors, rng, anchors) if init is None else init.copy()
    if not getattr(priors, "latent", True):
        params.zeta = 0.0
    chain = _Chain(data, priors, params, anchors, rng)
    if chain.latent:
        chain.pin_anchors()
    config = dataclasses.asdict(priors)
    if priors.T == 0:
        return PosteriorDraws([params.copy()], [], dict(chain.scales), seed, config,
                              sweeps=[0], log_post=[log_posterior(params, data, priors)])
    draws, sweeps, lps, acc_log, scale_trace = [], [], [], [], []
    burn = priors.burn_in
    for t in range(1, priors.T + 1):
        chain.sweep(WARMUP_FROZEN if t <= priors.warmup_sweeps else ())
        if t % priors.adapt_window == 0:
            rates = chain.close_window()
            acc_log.append({"sweep": t, **rates})
            if t <= burn:
                for b in chain.scales:
                    if np.isfinite(rates.get(b, np.nan)):
                        chain.scales[b] = min(adapt_jump_scale(rates[b], chain.scales[b],
                                                               priors.target_accept),
                                              SPHERE_SCALE_MAX.get(b, np.inf))
            if progress:
                log.info("sweep %d acceptance %s log-post %.2f", t,
                         {k: round(v, 3) for k, v in rates.items()},
                         log_posterior(chain.p, data, priors))
        if t > burn and (t - burn) % priors.thin == 0:
            draws.append(chain.p.copy())
            sweeps.append(t)
            lps.append(log_posterior(chain.p, data, priors))
            scale_trace.append(dict(chain.scales))
    return PosteriorDraws(draws, acc_log, dict(chain.scales), seed, config,
                          sweeps=sweeps, log_post=lps, scale_trace=scale_trace)


def run_chains(data: ArdDataset, priors: PriorConfig, anchors: Anchors | None,
               seed: int, n_chains: int = 2, workers: int = 1) -> list:
    """Independent chains with streams spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n_chains)
    if workers <= 1 or n_chains == 1:
        return [run_chain(data, priors, anchors, np.random.default_rng(c)) for c in children]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(run_chain, data, priors, anchors, np.random.default_rng(c))
                for c in children]
        return [f.result() for f in futs]


# convergence summaries -----------------------------------------------------

def _split(chains: np.ndarray) -> np.ndarray:
    half = chains.shape[1] // 2
    return np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)


def split_rhat(chains) -> float:
    """Split-R-hat for an (n_chains, n_draws) array."""
    x = _split(np.atleast_2d(np.asarray(chains, dtype=float)))
    n = x.shape[1]
    W = x.var(axis=1, ddof=1).mean()
    B = n * x.mean(axis=1).var(ddof=1)
    if W <= 0:
        return float("nan")
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def effective_sample_size(chains) -> float:
    """Multi-chain ESS using the variogram autocorrelation estimate and
    Geyer's initial positive sequence truncation."""
    x = _split(np.atleast_2d(np.asarray(chains, dtype=float)))
    M, n = x.shape
    W = x.var(axis=1, ddof=1).mean()
    B = n * x.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * W + B / n
    if var_plus <= 0 or W <= 0:
        return float("nan")
    rho = []
    for t in range(1, n):
        V = np.mean((x[:, t:] - x[:, :-t]) ** 2)
        rho.append(1.0 - V / (2.0 * var_plus))
    rho = np.array(rho)
    total = 0.0
    for t in range(0, len(rho) - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        total += pair
    return float(M * n / (1.0 + 2.0 * total))


def summarize_chain(draws_list, rng: np.random.Generator | int = 0, n_degree: int = 10,
                    min_draws: int = 10) -> ChainDiagnostics:
    """Split-R-hat, ESS, mean and sd for the scalar parameters across chains."""
    if isinstance(draws_list, PosteriorDraws):
        draws_list = [draws_list]
    if not draws_list:
        raise ValueError("need at least one chain")
    n = min(len(c.draws) for c in draws_list)
    if n < min_draws:
        raise ValueError(f"need at least {min_draws} retained draws, have {n}")
    rng = np.random.default_rng(rng)
    series = {}

    def stack(fn):
        return np.array([[fn(p) for p in c.draws[:n]] for c in draws_list])

    series["zeta"] = stack(lambda p: p.zeta)
    K = draws_list[0].draws[0].eta.size
    for k in range(K):
        series[f"eta[{k}]"] = stack(lambda p, k=k: p.eta[k])
    series["mu_d"] = stack(lambda p: p.mu_d)
    series["sigma2_d"] = stack(lambda p: p.sigma2_d)
    series["mu_beta"] = stack(lambda p: p.mu_beta)
    series["sigma2_beta"] = stack(lambda p: p.sigma2_beta)
    m = draws_list[0].draws[0].d.size
    for i in np.sort(rng.choice(m, size=min(n_degree, m), replace=False)):
        series[f"d[{i}]"] = stack(lambda p, i=i: p.d[i])
    out = {}
    for name, arr in series.items():
        flat = arr.ravel()
        constant = np.ptp(flat) == 0
        if constant and name in ("mu_beta", "sigma2_beta", "mu_d", "sigma2_d", "zeta"):
            continue
        out[name] = {
            "rhat": float("nan") if constant else split_rhat(arr),
            "ess": float("nan") if constant else effective_sample_size(arr),
            "mean": float(flat.mean()),
            "sd": float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
            "degenerate": bool(constant),
        }
    diag = ChainDiagnostics(out)
    worst = diag.max_rhat()
    if np.isfinite(worst) and worst >= 1.1:
        log.warning("convergence warning: max split R-hat %.3f >= 1.1", worst)
    return diag
