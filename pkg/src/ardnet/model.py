"""Data and parameter containers, validation and sampler initialization."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import sphere

DEGREE_MODES = ("observed", "estimated", "pinned")
PREVALENCE_MODES = ("census", "estimated")


class DataValidationError(ValueError):
    """Raised with the full list of problems found in an ARD dataset."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Prior:
    """A univariate prior. ``kind`` is one of gamma (shape, rate), uniform
    (low, high), normal (mean, variance), lognormal (mean, variance of the
    log), scaled_inv_chi2 (df, scale) or flat."""

    kind: str
    a: float = 0.0
    b: float = 0.0

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        # closed forms: these run every sweep and scipy.stats adds heavy overhead
        if self.kind == "gamma":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (self.a * np.log(self.b) - gammaln(self.a)
                       + (self.a - 1.0) * np.log(x) - self.b * x)
            out = np.where(x > 0, out, -np.inf)
            if self.a == 1.0:
                out = np.where(x == 0, np.log(self.b), out)
            return out if out.ndim else float(out)
        if self.kind == "uniform":
            inside = (x >= self.a) & (x <= self.b)
            out = np.where(inside, -np.log(self.b - self.a), -np.inf)
            return out if out.ndim else float(out)
        if self.kind == "normal":
            return -0.5 * (x - self.a) ** 2 / self.b - 0.5 * np.log(2 * np.pi * self.b)
        if self.kind == "lognormal":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = stats.norm.logpdf(np.log(x), self.a, np.sqrt(self.b)) - np.log(x)
            return np.where(x > 0, out, -np.inf)
        if self.kind == "scaled_inv_chi2":
            nu, s2 = self.a, self.b
            return stats.invgamma.logpdf(x, nu / 2.0, scale=nu * s2 / 2.0)
        if self.kind == "flat":
            return np.zeros_like(x)
        raise ValueError(f"unknown prior kind {self.kind!r}")

    def mean(self) -> float:
        if self.kind == "gamma":
            return self.a / self.b
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "normal":
            return self.a
        if self.kind == "lognormal":
            return float(np.exp(self.a + 0.5 * self.b))
        raise ValueError(f"prior {self.kind!r} has no usable mean")


@dataclass
class PriorConfig:
    """Priors plus run settings for one fit.

    Defaults: Gamma(0.5, 0.5) on zeta, Gamma(5, 0.1) on each eta_k (shape,
    rate) and uniform hyperpriors on (mu_d, sigma_d).
    """

    zeta_prior: Prior = Prior("gamma", 0.5, 0.5)
    eta_prior: Prior = Prior("gamma", 5.0, 0.1)
    mu_d_prior: Prior = Prior("flat")
    sigma2_d_prior: Prior = Prior("flat")
    p: int = 2
    T: int = 3000
    thin: int = 5
    n_graph_draws: int = 100
    adapt_window: int = 50
    target_accept: float = 0.3
    initial_scale: float = 0.1
    knn_k: int = 5
    degree_mode: str = "estimated"
    prevalence_mode: str = "census"
    pinned_degree: float | None = None
    blocks: tuple | None = None
    latent: bool = True
    membership_term: bool = False
    warmup: int | None = None

    def __post_init__(self):
        problems = []
        if self.T < 0 or self.T % 2:
            problems.append(f"T must be a non-negative even integer, got {self.T}")
        if self.thin < 1:
            problems.append("thin must be >= 1")
        if self.p < 2:
            problems.append("latent dimension p must be >= 2")
        if self.degree_mode not in DEGREE_MODES:
            problems.append(f"degree_mode must be one of {DEGREE_MODES}")
        if self.prevalence_mode not in PREVALENCE_MODES:
            problems.append(f"prevalence_mode must be one of {PREVALENCE_MODES}")
        if self.degree_mode == "pinned" and not (self.pinned_degree and self.pinned_degree > 0):
            problems.append("pinned degree mode needs a positive pinned_degree")
        for name in ("zeta_prior", "eta_prior"):
            pr = getattr(self, name)
            if pr.kind == "gamma" and (pr.a <= 0 or pr.b <= 0):
                problems.append(f"{name}: gamma shape and rate must be > 0")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def D(self) -> int:
        return self.p + 1

    @property
    def burn_in(self) -> int:
        return self.T // 2

    @property
    def warmup_sweeps(self) -> int:
        """Early burn-in sweeps during which zeta and eta stay at their start values."""
        return self.T // 4 if self.warmup is None else min(self.warmup, self.burn_in)


@dataclass(frozen=True)
class ArdDataset:
    """One village: ARD counts for the m respondents plus census information.

    ``covariate_distance`` is the (n - m) x m matrix of covariate distances from
    each non-respondent (in ascending node id order) to each respondent.
    """

    y: np.ndarray
    n: int
    ard_index: np.ndarray
    census_traits: np.ndarray | None = None
    group_sizes: np.ndarray | None = None
    covariate_distance: np.ndarray | None = None
    reported_degrees: np.ndarray | None = None
    total_prop: float | None = None
    trait_names: tuple = ()
    excluded: str | None = None

    @property
    def m(self) -> int:
        return int(self.y.shape[0])

    @property
    def K(self) -> int:
        return int(self.y.shape[1])

    @property
    def psi(self) -> float:
        return self.m / self.n

    @property
    def non_ard_index(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.ard_index] = False
        return np.flatnonzero(mask)

    def ard_memberships(self) -> np.ndarray | None:
        """Boolean m x K trait indicators of the respondents, if a census exists."""
        if self.census_traits is None:
            return None
        return self.census_traits[self.ard_index].astype(bool)

    def __eq__(self, other):
        if not isinstance(other, ArdDataset):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None


def validate_dataset(raw: ArdDataset, min_share: float = 0.0,
                     required_anchors: int = 3) -> ArdDataset:
    """Check dataset invariants, returning a normalized copy.

    Raises DataValidationError listing every violation. A dataset whose
    sampling share m/n is below ``min_share`` is returned with ``excluded``
    set rather than raising.
    """
    v = []
    y = np.asarray(raw.y)
    if y.ndim != 2:
        raise DataValidationError([f"ARD matrix must be 2-d, got shape {y.shape}"])
    if not np.all(np.isfinite(y)) or np.any(np.round(y) != y):
        v.append("ARD counts must be finite integers")
    neg = np.argwhere(y < 0)
    for r, c in neg[:10]:
        v.append(f"negative ARD count {y[r, c]} at row {r}, column {c}")
    m, K = y.shape
    n = int(raw.n)
    if K < required_anchors:
        v.append(f"K={K} groups but {required_anchors} anchored groups are required")
    if m > n:
        v.append(f"more respondents (m={m}) than nodes (n={n})")
    ard_index = np.asarray(raw.ard_index, dtype=int)
    if ard_index.shape != (m,):
        v.append(f"ard_index has length {ard_index.size}, expected m={m}")
    elif ard_index.size and (ard_index.min() < 0 or ard_index.max() >= n
                             or np.unique(ard_index).size != m):
        v.append("ard_index entries must be distinct node ids in [0, n)")
    census = raw.census_traits
    sizes = raw.group_sizes
    if census is not None:
        census = np.asarray(census)
        if census.shape != (n, K):
            v.append(f"census has shape {census.shape}, expected ({n}, {K})")
        elif not np.isin(census, (0, 1)).all():
            v.append("census traits must be binary")
        else:
            census = census.astype(np.int8)
            col = census.sum(axis=0)
            if sizes is not None and not np.array_equal(np.asarray(sizes), col):
                v.append("group_sizes disagree with census column sums")
            sizes = col
    if sizes is not None:
        sizes = np.asarray(sizes, dtype=int)
    dist = raw.covariate_distance
    if dist is not None:
        dist = np.asarray(dist, dtype=float)
        if dist.shape != (n - m, m):
            hint = " (looks transposed)" if dist.shape == (m, n - m) else ""
            v.append(f"covariate distance has shape {dist.shape}, expected ({n - m}, {m}){hint}")
        elif not np.all(np.isfinite(dist)) or np.any(dist < 0):
            v.append("covariate distances must be finite and non-negative")
    elif m < n:
        v.append("covariate distance matrix required when m < n")
    deg = raw.reported_degrees
    if deg is not None:
        deg = np.asarray(deg)
        if deg.shape != (m,):
            v.append(f"reported_degrees has length {deg.size}, expected {m}")
        elif np.any(deg < 0) or np.any(np.round(deg) != deg):
            v.append("reported degrees must be non-negative integers")
    if v:
        raise DataValidationError(v)
    excluded = raw.excluded
    if n and m / n < min_share:
        excluded = f"sampling share {m / n:.3f} below floor {min_share:.3f}"
    return dataclasses.replace(
        raw, y=y.astype(np.int64), n=n, ard_index=ard_index, census_traits=census,
        group_sizes=sizes, covariate_distance=dist,
        reported_degrees=None if deg is None else deg.astype(np.int64),
        trait_names=tuple(raw.trait_names), excluded=excluded,
    )


def fix_group_prevalence(census_traits, group_sizes=None) -> np.ndarray:
    """Population shares b_k = N_k / n from the census.

    Empty groups get b_k = 0 and a warning; callers drop them with
    :func:`drop_groups`.
    """
    census = np.asarray(census_traits)
    n = census.shape[0]
    sizes = census.sum(axis=0) if group_sizes is None else np.asarray(group_sizes)
    b = sizes / n
    if np.any(sizes == 0):
        warnings.warn(f"groups {np.flatnonzero(sizes == 0).tolist()} are empty and will be dropped")
    if np.all(sizes == n):
        warnings.warn("every group contains the whole population; prevalence is degenerate")
    return b.astype(float)


def drop_groups(data: ArdDataset, keep) -> ArdDataset:
    keep = np.asarray(keep, dtype=bool)
    return dataclasses.replace(
        data, y=data.y[:, keep],
        census_traits=None if data.census_traits is None else data.census_traits[:, keep],
        group_sizes=None if data.group_sizes is None else data.group_sizes[keep],
        trait_names=tuple(t for t, k in zip(data.trait_names, keep) if k) if data.trait_names else (),
    )


@dataclass
class ModelParams:
    """One parameter point for the m respondents and K groups.

    ``beta`` always holds log b_k, whether fixed from the census or sampled.
    """

    z: np.ndarray
    d: np.ndarray
    beta: np.ndarray
    centers: np.ndarray
    eta: np.ndarray
    zeta: float
    mu_d: float
    sigma2_d: float
    mu_beta: float
    sigma2_beta: float
    fixed_centers: tuple = ()

    def copy(self) -> "ModelParams":
        return dataclasses.replace(
            self, z=self.z.copy(), d=self.d.copy(), beta=self.beta.copy(),
            centers=self.centers.copy(), eta=self.eta.copy(),
        )

    @property
    def b(self) -> np.ndarray:
        return np.exp(self.beta)


@dataclass(frozen=True)
class Anchors:
    """Anchored group centers: group indices and their fixed unit vectors."""

    groups: tuple
    targets: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.groups) != len(self.targets):
            raise ValueError("one target per anchored group")
        sphere.check_anchor_targets(self.targets)

    @classmethod
    def default(cls, K: int, D: int) -> "Anchors":
        """Groups 0..D-1 at the coordinate axes."""
        if K < D:
            raise sphere.IdentificationError(f"need {D} groups to anchor, have {K}")
        return cls(tuple(range(D)), np.eye(D))


def initial_prevalence(data: ArdDataset) -> np.ndarray:
    if data.census_traits is not None:
        b = fix_group_prevalence(data.census_traits, data.group_sizes)
        return np.clip(b, 1e-6, None)
    col = data.y.sum(axis=0).astype(float) + 0.5
    total = data.total_prop if data.total_prop is not None else 1.0
    return total * col / col.sum()


def initialize_params(data: ArdDataset, priors: PriorConfig, rng: np.random.Generator,
                      anchors: Anchors | None = None) -> ModelParams:
    """Deterministic (given rng) starting point for the sampler."""
    D = priors.D
    K = data.K
    if anchors is None:
        anchors = Anchors.default(K, D)
    if len(anchors.groups) < 3:
        raise sphere.IdentificationError("at least three anchored centers are required")
    if anchors.targets.shape[1] != D:
        raise ValueError(f"anchor targets live in R^{anchors.targets.shape[1]}, model uses R^{D}")
    b = initial_prevalence(data)
    if data.reported_degrees is not None and priors.degree_mode != "pinned":
        d = np.maximum(data.reported_degrees.astype(float), 0.5)
    elif priors.degree_mode == "pinned":
        rows = data.y.sum(axis=1) / b.sum()
        d = np.maximum(rows * priors.pinned_degree / max(rows.mean(), 1e-9), 0.5)
    else:
        d = np.maximum(data.y.sum(axis=1) / b.sum(), 0.5)

    free = [k for k in range(K) if k not in anchors.groups]
    centers = np.empty((K, D))
    centers[list(anchors.groups)] = anchors.targets
    centers[free] = sphere.spread_points(len(free), D, rng, avoid=anchors.targets)

    weights = data.y / b[None, :]
    res = weights @ centers
    norm = np.linalg.norm(res, axis=1)
    z = sphere.sample_uniform(data.m, D, rng)
    ok = norm > 1e-12
    z[ok] = res[ok] / norm[ok, None]

    eta = np.full(K, priors.eta_prior.mean())
    zeta = priors.zeta_prior.mean() if priors.latent else 0.0
    logd = np.log(d)
    beta = np.log(b)
    return ModelParams(
        z=z, d=d, beta=beta, centers=centers, eta=eta, zeta=float(zeta),
        mu_d=float(np.log(priors.pinned_degree)) if priors.degree_mode == "pinned" else float(logd.mean()),
        sigma2_d=float(logd.var()) if logd.var() > 1e-8 else 1.0,
        mu_beta=float(beta.mean()),
        sigma2_beta=float(beta.var()) if beta.var() > 1e-8 else 1.0,
        fixed_centers=tuple(anchors.groups),
    )
