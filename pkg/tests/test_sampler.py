import dataclasses

import numpy as np
import pytest
from scipy import integrate, stats

from ardnet import sphere
from ardnet.likelihood import log_posterior
from ardnet.model import (Anchors, ArdDataset, ModelParams, PriorConfig, initialize_params,
                          validate_dataset)
from ardnet.sampler import (MH_BLOCKS, PosteriorDraws, SamplerError, _Chain, adapt_jump_scale,
                            effective_sample_size, run_chain, run_chains, split_rhat,
                            summarize_chain, update_center_gibbs)


# ---------------------------------------------------------------------------
# adaptation

def test_adapt_examples():
    assert adapt_jump_scale(0.3, 0.5) == pytest.approx(0.5)
    assert adapt_jump_scale(1.0, 1.0) == pytest.approx(np.exp(0.7))
    assert adapt_jump_scale(1.0, 1.0) == pytest.approx(2.01, abs=0.005)
    assert adapt_jump_scale(0.0, 1.0) == pytest.approx(np.exp(-0.3))
    assert adapt_jump_scale(0.0, 1.0) == pytest.approx(0.74, abs=0.005)


def test_adapt_clamped():
    assert adapt_jump_scale(0.0, 1e-4) == 1e-4
    assert adapt_jump_scale(1.0, 1e4) == 1e4


# ---------------------------------------------------------------------------
# conjugate center draw

def test_center_single_member():
    rng = np.random.default_rng(0)
    e1 = np.eye(3)[0]
    draw, mean, kappa = update_center_gibbs(e1[None, :], np.ones(1), 12.0, rng)
    assert np.allclose(mean, e1) and kappa == pytest.approx(12.0)
    assert np.linalg.norm(draw) == pytest.approx(1.0)


def test_center_antipodal_members_uniform():
    rng = np.random.default_rng(1)
    e1 = np.eye(3)[0]
    draws = np.array([update_center_gibbs(np.array([e1, -e1]), np.ones(2), 5.0, rng)[0]
                      for _ in range(4000)])
    assert update_center_gibbs(np.array([e1, -e1]), np.ones(2), 5.0, rng)[2] == 0.0
    assert np.linalg.norm(draws.mean(axis=0)) < 0.05


def test_center_mean_direction_matches_resultant():
    rng = np.random.default_rng(2)
    dirs = sphere.sample_vmf(sphere.normalize(np.array([1.0, 2.0, 0.5])), 3.0, rng, size=8)
    w = rng.uniform(0.5, 2.0, 8)
    target = sphere.normalize(w @ dirs)
    draws = np.array([update_center_gibbs(dirs, w, 4.0, rng)[0] for _ in range(10_000)])
    emp = sphere.normalize(draws.mean(axis=0))
    assert np.linalg.norm(emp - target) < 0.02


def test_center_prior_term():
    rng = np.random.default_rng(3)
    _, mean, kappa = update_center_gibbs(np.zeros((0, 3)), np.zeros(0), 5.0, rng,
                                         prior_mean=np.eye(3)[1], prior_kappa=2.0)
    assert np.allclose(mean, np.eye(3)[1]) and kappa == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# exact acceptance rule of every Metropolis block

class ScriptedRng:
    """Wraps a Generator; the ``target``-th call to random() is replaced."""

    def __init__(self, seed, target=None, replace=None):
        self.g = np.random.default_rng(seed)
        self.calls = 0
        self.target = target
        self.replace = replace

    def random(self, size=None):
        self.calls += 1
        val = self.g.random(size)
        if self.calls == self.target:
            return self.replace(np.asarray(val))
        return val

    def __getattr__(self, name):
        return getattr(self.g, name)


def make_block_setup():
    from ardnet.simlab import ExperimentConfig, simulate_dgp
    cfg = ExperimentConfig(n=40, K=6, psi=0.5, seed=5)
    truth = simulate_dgp(cfg, cfg.rep_rng(0))
    data = dataclasses.replace(truth.data, reported_degrees=None)
    priors = PriorConfig(prevalence_mode="estimated", degree_mode="estimated")
    start = initialize_params(data, priors, np.random.default_rng(0))
    start.eta = np.random.default_rng(1).uniform(2, 8, data.K)
    start.zeta = 0.8
    return data, priors, start


@pytest.fixture(scope="module")
def block_setup():
    return make_block_setup()


def _run_block(block, data, priors, start, rng, scale):
    ch = _Chain(data, priors, start.copy(), Anchors.default(data.K, priors.D), rng)
    ch.scales[block] = scale
    getattr(ch, f"update_{block}")()
    return ch.p


# how one component of each block maps onto ModelParams
COMPONENTS = {
    "z": lambda p: [("z", i) for i in range(p.z.shape[0])],
    "centers": lambda p: [("centers", k) for k in range(3, p.centers.shape[0])],
    "centers_rw": lambda p: [("centers", k) for k in range(3, p.centers.shape[0])],
    "d": lambda p: [("d", i) for i in range(p.d.size)],
    "beta": lambda p: [("beta", k) for k in range(p.beta.size)],
    "eta": lambda p: [("eta", k) for k in range(p.eta.size)],
    "zeta": lambda p: [("zeta", None)],
}
SCALES = {"z": 0.15, "centers": 1.0, "centers_rw": 0.2, "d": 0.2, "beta": 0.1, "eta": 0.8, "zeta": 0.1}


def _with(params, name, idx, value_from):
    out = params.copy()
    if idx is None:
        setattr(out, name, getattr(value_from, name))
    else:
        arr = getattr(out, name).copy()
        arr[idx] = getattr(value_from, name)[idx]
        setattr(out, name, arr)
    return out


def _proposal_log_q(data, start, prop, k):
    """log q(current) - log q(proposal) for the independence center move."""
    mem = data.ard_memberships()[:, k].astype(float)
    if not mem.any():
        rows = data.y.sum(axis=1)
        mem = np.divide(data.y[:, k], rows, out=np.zeros(rows.size), where=rows > 0)
    vec = start.eta[k] * (mem @ start.z)
    kappa = np.linalg.norm(vec)
    mean = vec / kappa
    return (sphere.vmf_log_density(start.centers[k], mean, kappa)
            - sphere.vmf_log_density(prop.centers[k], mean, kappa))


@pytest.mark.parametrize("block", ["z", "centers", "centers_rw", "d", "beta", "eta", "zeta"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_block_accepts_with_exact_metropolis_probability(block_setup, block, seed):
    check_block_metropolis(block_setup, block, seed)


def check_block_metropolis(setup, block, seed):
    """Replay one block and check it accepts iff u < pi(proposal) / pi(current)."""
    data, priors, start = setup
    scale = SCALES[block]
    counter = ScriptedRng(seed)
    _run_block(block, data, priors, start, counter, scale)
    last = counter.calls  # the acceptance uniforms are the block's final random() call
    proposal = _run_block(block, data, priors, start,
                          ScriptedRng(seed, last, lambda u: np.full_like(u, 1e-300)), scale)
    lp0 = log_posterior(start, data, priors)
    comps = COMPONENTS[block](start)
    log_alpha = []
    for name, idx in comps:
        moved = _with(start, name, idx, proposal)
        la = log_posterior(moved, data, priors) - lp0
        if block == "centers":
            la += _proposal_log_q(data, start, proposal, idx)
        log_alpha.append(la)
    log_alpha = np.array(log_alpha)
    if block == "zeta" and proposal.zeta == start.zeta:
        pytest.skip("proposal fell outside the support")
    finite = np.isfinite(log_alpha)
    assert finite.any()
    # u just below the ratio: accept; just above: reject (when the ratio is < 1)
    eps = 1e-7
    below = np.where(finite, np.exp(np.minimum(log_alpha, 0.0)) * (1 - eps), 0.0)
    above = np.where(finite, np.exp(np.minimum(log_alpha, 0.0)) * (1 + eps), 1.0)
    shape = lambda arr: (lambda u: arr.reshape(u.shape) if u.shape else arr[0])
    after_below = _run_block(block, data, priors, start, ScriptedRng(seed, last, shape(below)), scale)
    after_above = _run_block(block, data, priors, start, ScriptedRng(seed, last, shape(above)), scale)
    for j, (name, idx) in enumerate(comps):
        moved_b = getattr(after_below, name) if idx is None else getattr(after_below, name)[idx]
        moved_a = getattr(after_above, name) if idx is None else getattr(after_above, name)[idx]
        prop_v = getattr(proposal, name) if idx is None else getattr(proposal, name)[idx]
        old_v = getattr(start, name) if idx is None else getattr(start, name)[idx]
        if finite[j]:
            assert np.allclose(moved_b, prop_v), (block, j, log_alpha[j])
        if finite[j] and log_alpha[j] < -1e-4:
            assert np.allclose(moved_a, old_v), (block, j, log_alpha[j])
        elif not finite[j]:
            assert np.allclose(moved_a, old_v)


@pytest.mark.parametrize("block", ["d", "beta", "eta", "zeta"])
def test_scalar_proposals_symmetric(block_setup, block):
    # random walk steps are Normal and centered: the mean step over many proposals is ~0
    data, priors, start = block_setup
    steps = []
    for s in range(200):
        counter = ScriptedRng(s)
        _run_block(block, data, priors, start, counter, SCALES[block])
        p = _run_block(block, data, priors, start,
                       ScriptedRng(s, counter.calls, lambda u: np.full_like(u, 1e-300)), SCALES[block])
        name = {"d": "d", "beta": "beta", "eta": "eta", "zeta": "zeta"}[block]
        new, old = np.atleast_1d(getattr(p, name)), np.atleast_1d(getattr(start, name))
        if block == "d":
            new, old = np.log(new), np.log(old)
        keep = new != old
        steps.extend((new - old)[keep])
    steps = np.array(steps)
    assert abs(steps.mean()) < 4 * steps.std() / np.sqrt(steps.size)
    assert stats.skew(steps) == pytest.approx(0.0, abs=0.3)


# ---------------------------------------------------------------------------
# whole chains

def _small_problem(seed=0):
    from ardnet.simlab import ExperimentConfig, simulate_dgp
    cfg = ExperimentConfig(n=50, K=6, psi=1.0, seed=seed)
    return simulate_dgp(cfg, cfg.rep_rng(0)).data


def test_t0_returns_initial_state():
    data = _small_problem()
    out = run_chain(data, PriorConfig(T=0), None, 3)
    assert len(out.draws) == 1 and out.acceptance_log == []
    init = initialize_params(data, PriorConfig(T=0), np.random.default_rng(3))
    assert np.allclose(out.draws[0].z @ out.draws[0].centers.T, init.z @ init.centers.T)


def test_chain_deterministic():
    data = _small_problem()
    pr = PriorConfig(T=60, thin=3)
    a, b = run_chain(data, pr, None, 7), run_chain(data, pr, None, 7)
    assert len(a.draws) == len(b.draws) == 10
    for x, y in zip(a.draws, b.draws):
        for f in dataclasses.fields(x):
            assert np.array_equal(getattr(x, f.name), getattr(y, f.name))
    assert a.acceptance_log == b.acceptance_log


def test_anchors_pinned_after_every_sweep():
    data = _small_problem(1)
    pr = PriorConfig(T=40, thin=1)
    out = run_chain(data, pr, None, 1)
    for p in out.draws:
        assert np.all(sphere.angle_between(p.centers[:3], np.eye(3)) < 1e-9)
    # and through the chain internals, sweep by sweep
    anchors = Anchors((0, 2, 4), sphere.normalize(np.array([[1, 0.2, 0], [0, 1, 0.3], [0.1, 0, 1.0]])))
    rng = np.random.default_rng(0)
    ch = _Chain(data, pr, initialize_params(data, pr, rng, anchors), anchors, rng)
    for _ in range(25):
        ch.sweep()
        assert np.all(sphere.angle_between(ch.p.centers[[0, 2, 4]], anchors.targets) < 1e-9)
        assert np.allclose(np.linalg.norm(ch.p.z, axis=1), 1.0, atol=1e-12)


def test_kernel_frozen_after_burn_in():
    data = _small_problem(2)
    out = run_chain(data, PriorConfig(T=200, thin=2), None, 4)
    assert len(out.scale_trace) == 50
    assert all(s == out.scale_trace[0] for s in out.scale_trace)
    assert out.scale_trace[0] == out.jump_scales
    for entry in out.acceptance_log:
        for k, v in entry.items():
            if k == "sweep":
                continue
            if np.isnan(v):
                # no attempts: only the blocks held fixed during warm-up
                assert k in ("eta", "zeta") and entry["sweep"] <= 50
            else:
                assert 0 <= v <= 1


def test_warmup_holds_zeta_and_eta():
    data = _small_problem(3)
    pr = PriorConfig(T=40, thin=1, warmup=20)
    rng = np.random.default_rng(0)
    ch = _Chain(data, pr, initialize_params(data, pr, rng), Anchors.default(6, 3), rng)
    z0, e0 = ch.p.zeta, ch.p.eta.copy()
    for _ in range(20):
        ch.sweep(("eta", "zeta"))
    assert ch.p.zeta == z0 and np.array_equal(ch.p.eta, e0)


def test_nan_names_block():
    data = _small_problem()
    pr = PriorConfig(T=2)
    rng = np.random.default_rng(0)
    params = initialize_params(data, pr, rng)
    ch = _Chain(data, pr, params, Anchors.default(6, 3), rng)
    ch.logd[:] = np.nan
    with pytest.raises(SamplerError, match="'z'"):
        ch.update_z()


def test_observed_and_census_modes_drop_blocks():
    data = _small_problem()
    pr = PriorConfig(degree_mode="observed", prevalence_mode="census")
    rng = np.random.default_rng(0)
    ch = _Chain(data, pr, initialize_params(data, pr, rng), Anchors.default(6, 3), rng)
    assert "d" not in ch.blocks and "beta" not in ch.blocks
    base = dataclasses.replace(pr, latent=False)
    ch = _Chain(data, base, initialize_params(data, base, rng), Anchors.default(6, 3), rng)
    assert set(ch.blocks) <= {"d", "beta", "hyper"}


def test_run_chains_independent_streams():
    data = _small_problem()
    a, b = run_chains(data, PriorConfig(T=20, thin=2), None, seed=3, n_chains=2)
    assert not np.array_equal(a.draws[-1].z, b.draws[-1].z)


# ---------------------------------------------------------------------------
# reduced one-parameter chain against quadrature

def _reduced_problem():
    y = np.array([[14, 2, 1]])
    census = np.ones((1, 3), dtype=int)
    data = validate_dataset(ArdDataset(y=y, n=1, ard_index=np.arange(1), census_traits=census,
                                       reported_degrees=np.array([20])))
    z = sphere.normalize(np.array([[1.0, 0.3, 0.1]]))
    params = ModelParams(z=z, d=np.array([20.0]), beta=np.log(np.full(3, 0.4)), centers=np.eye(3),
                         eta=np.array([3.0, 3.0, 3.0]), zeta=1.0, mu_d=0.0, sigma2_d=1.0,
                         mu_beta=0.0, sigma2_beta=1.0, fixed_centers=(0, 1, 2))
    return data, params


def _c3(k):
    return np.where(k < 1e-8, 1 / (4 * np.pi), k / (4 * np.pi * np.sinh(np.maximum(k, 1e-300))))


def _reduced_log_density(zeta, data, params):
    cos = (params.z @ params.centers.T)[0]
    y = data.y[0]
    out = stats.gamma.logpdf(zeta, 0.5, scale=2.0)
    for k in range(3):
        eta = params.eta[k]
        rho = np.sqrt(zeta**2 + eta**2 + 2 * zeta * eta * cos[k])
        lam = params.d[0] * 0.4 * _c3(zeta) * _c3(eta) / (_c3(0.0) * _c3(rho))
        out += stats.poisson.logpmf(y[k], lam)
    return out


def test_reduced_zeta_chain_matches_quadrature():
    assert reduced_chain_ks() < 0.05


def reduced_chain_ks():
    """KS distance between a zeta-only chain and the quadrature posterior."""
    data, params = _reduced_problem()
    pr = PriorConfig(T=100_000, thin=5, degree_mode="observed", blocks=("zeta",), warmup=0)
    out = run_chain(data, pr, None, 11, init=params)
    draws = out.trace("zeta")
    assert draws.size == 10_000
    # density in u = sqrt(zeta) is smooth at the origin
    f = lambda u: np.exp(_reduced_log_density(u * u, data, params)) * 2 * u
    upper = 60.0  # posterior mass beyond this is below 1e-15
    grid = np.linspace(1e-12, np.sqrt(upper), 8001)
    vals = np.array([f(u) for u in grid])
    assert vals[-1] < 1e-15 * vals.max()
    cdf_u = integrate.cumulative_trapezoid(vals, grid, initial=0.0)
    norm = cdf_u[-1]
    cdf = lambda x: np.interp(np.sqrt(np.minimum(x, upper)), grid, cdf_u) / norm
    return stats.kstest(draws, cdf).statistic


# ---------------------------------------------------------------------------
# diagnostics

def _fake_draws(values):
    base = ModelParams(z=np.zeros((3, 3)), d=np.ones(3), beta=np.zeros(3), centers=np.eye(3),
                       eta=np.ones(3), zeta=1.0, mu_d=0.0, sigma2_d=1.0, mu_beta=0.0,
                       sigma2_beta=1.0)
    draws = []
    for v in values:
        p = base.copy()
        p.zeta = float(v[0])
        p.eta = np.array(v[1:4])
        p.d = np.exp(np.array(v[4:7]))
        draws.append(p)
    return PosteriorDraws(draws, [], {}, 0, {})


def test_rhat_iid_chains():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 2000))
    assert 0.98 <= split_rhat(x) <= 1.05
    assert 0.98 <= split_rhat(np.vstack([x[0], x[0]])) <= 1.05


def test_rhat_detects_separated_chains():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 500))
    x[1] += 3
    assert split_rhat(x) > 1.5


def test_ess_iid_and_ar1():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 4000))
    assert effective_sample_size(x) == pytest.approx(8000, rel=0.15)
    ar = np.zeros((2, 4000))
    for t in range(1, 4000):
        ar[:, t] = 0.9 * ar[:, t - 1] + rng.standard_normal(2)
    # AR(1) with phi = 0.9 has ESS ratio (1 - phi) / (1 + phi)
    assert effective_sample_size(ar) == pytest.approx(8000 * 0.1 / 1.9, rel=0.35)


def test_summarize_identical_iid_chains():
    rng = np.random.default_rng(3)
    vals = np.abs(rng.standard_normal((200, 7))) + 0.1
    diag = summarize_chain([_fake_draws(vals), _fake_draws(vals)])
    # R-hat sits at 1 up to sampling noise for identical i.i.d. chains
    assert all(0.98 <= s["rhat"] <= 1.05 for s in diag.stats.values())


def test_summarize_constant_chain_degenerate():
    vals = np.tile(np.arange(1, 8, dtype=float), (50, 1))
    diag = summarize_chain(_fake_draws(vals))
    assert "eta[0]" in diag.degenerate()
    assert np.isnan(diag.stats["eta[0]"]["ess"])


def test_summarize_needs_draws():
    with pytest.raises(ValueError, match="at least 10"):
        summarize_chain(_fake_draws(np.ones((5, 7))))


def test_summarize_warns_on_bad_rhat(caplog):
    rng = np.random.default_rng(4)
    a = np.abs(rng.standard_normal((100, 7))) + 0.1
    b = a + 5
    with caplog.at_level("WARNING", logger="ardnet.sampler"):
        diag = summarize_chain([_fake_draws(a), _fake_draws(b)])
    assert diag.max_rhat() > 1.1
    assert "convergence warning" in caplog.text


def test_sphere_scales_capped_during_adaptation():
    # zeta = 0 makes the target flat in z, so acceptance stays near 1 and an
    # uncapped scale would keep growing
    from ardnet.sampler import SPHERE_SCALE_MAX
    data = _small_problem(2)
    pr = PriorConfig(T=400, thin=5, blocks=("z", "centers_rw"), initial_scale=0.5)
    init = initialize_params(data, pr, np.random.default_rng(0))
    init.zeta = 0.0
    out = run_chain(data, pr, None, 3, init=init)
    assert out.jump_scales["z"] == SPHERE_SCALE_MAX["z"]
    assert all(s["z"] <= SPHERE_SCALE_MAX["z"] for s in out.scale_trace)
