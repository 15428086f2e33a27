"""Hypersphere geometry and the von Mises-Fisher distribution.

Points on the sphere are stored as rows of float arrays with shape ``(..., D)``,
where ``D`` is the ambient dimension. With latent dimension ``p`` the ambient
dimension is ``D = p + 1`` (``p = 2`` gives ordinary unit vectors in 3-space).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ive

# Below this concentration the normalizing constant equals its kappa -> 0
# limit to within double precision.
_SMALL_KAPPA = 1e-8


class IdentificationError(ValueError):
    """Anchor configuration cannot pin the orientation of the latent space."""


def _check_kappa(kappa):
    kappa = np.asarray(kappa, dtype=float)
    if not np.isfinite(kappa).all():
        raise ValueError("concentration must be finite")
    if kappa.size and kappa.min() < 0:
        raise ValueError("concentration must be non-negative")
    return kappa


@lru_cache(maxsize=None)
def log_sphere_area(D: int) -> float:
    """Log surface area of the unit sphere in R^D."""
    return float(np.log(2.0) + 0.5 * D * np.log(np.pi) - gammaln(0.5 * D))


def log_vmf_norm_const(kappa, D: int):
    """Log of the vMF normalizing constant C_D(kappa).

    C_D(k) = k^(D/2-1) / ((2 pi)^(D/2) I_(D/2-1)(k)); at k = 0 it is the inverse
    sphere area. Bessel values come from the exponentially scaled ``ive`` so
    large concentrations do not overflow.
    """
    if D < 2:
        raise ValueError("ambient dimension must be at least 2")
    kappa = _check_kappa(kappa)
    order = 0.5 * D - 1.0
    safe = np.where(kappa < _SMALL_KAPPA, 1.0, kappa)
    if D == 3:
        # C_3(k) = k / (4 pi sinh k); log sinh k = k + log1p(-exp(-2k)) - log 2
        log_sinh = safe + np.log1p(-np.exp(-2.0 * safe)) - np.log(2.0)
        val = np.log(safe) - np.log(4.0 * np.pi) - log_sinh
    else:
        log_bessel = np.log(ive(order, safe)) + safe
        val = order * np.log(safe) - 0.5 * D * np.log(2.0 * np.pi) - log_bessel
    out = np.where(kappa < _SMALL_KAPPA, -log_sphere_area(D), val)
    return out if out.ndim else float(out)


def vmf_norm_const(kappa, D: int):
    return np.exp(log_vmf_norm_const(kappa, D))


def mean_resultant_length(kappa, D: int):
    """A_D(kappa) = I_{D/2}(kappa) / I_{D/2-1}(kappa), the expected x . mu."""
    kappa = _check_kappa(kappa)
    safe = np.where(kappa < _SMALL_KAPPA, 1.0, kappa)
    ratio = ive(0.5 * D, safe) / ive(0.5 * D - 1.0, safe)
    out = np.where(kappa < _SMALL_KAPPA, 0.0, ratio)
    return out if out.ndim else float(out)


def vmf_log_density(x, mu, kappa):
    """Log density of vMF(mu, kappa) at x with respect to surface measure."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape[-1] != mu.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {mu.shape[-1]}")
    D = x.shape[-1]
    return log_vmf_norm_const(kappa, D) + np.asarray(kappa) * np.sum(x * mu, axis=-1)


def normalize(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def sample_uniform(size: int, D: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the unit sphere in R^D, shape (size, D)."""
    return normalize(rng.standard_normal((size, D)))


def _sample_w(kappa: np.ndarray, D: int, rng: np.random.Generator) -> np.ndarray:
    """Wood (1994) rejection sampler for the component along the mean direction."""
    m1 = D - 1.0
    w = np.empty_like(kappa)
    # stable form of b = (-2k + sqrt(4k^2 + (D-1)^2)) / (D-1)
    b = m1 / (np.sqrt(4.0 * kappa**2 + m1**2) + 2.0 * kappa)
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m1 * np.log(1.0 - x0**2)
    todo = np.arange(kappa.size)
    while todo.size:
        z = rng.beta(0.5 * m1, 0.5 * m1, size=todo.size)
        bt = b[todo]
        cand = (1.0 - (1.0 + bt) * z) / (1.0 - (1.0 - bt) * z)
        u = rng.random(todo.size)
        ok = kappa[todo] * cand + m1 * np.log(1.0 - x0[todo] * cand) - c[todo] >= np.log(u)
        w[todo[ok]] = cand[ok]
        todo = todo[~ok]
    return w


def sample_vmf(mu, kappa, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from vMF(mu, kappa).

    ``mu`` may be a single direction (optionally with ``size`` draws) or an
    array of directions of shape (N, D) with ``kappa`` scalar or length N, in
    which case one draw per row is returned. kappa = 0 gives uniform draws.
    """
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    if single:
        mu = np.broadcast_to(mu, (1 if size is None else size, mu.size))
    elif size is not None and size != mu.shape[0]:
        raise ValueError("size must match the number of mean directions")
    N, D = mu.shape
    kappa = np.broadcast_to(_check_kappa(kappa), (N,)).astype(float)
    w = _sample_w(kappa, D, rng)
    # tangent direction uniform on the sub-sphere orthogonal to mu
    g = rng.standard_normal((N, D))
    g -= np.sum(g * mu, axis=1, keepdims=True) * mu
    v = normalize(g)
    out = w[:, None] * mu + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * v
    out = normalize(out)
    if single and size is None:
        return out[0]
    return out


def angle_between(x, y):
    """Angle in [0, pi] between unit vectors (row-wise for arrays).

    Uses 2 atan2(|x - y|, |x + y|), which agrees with the clamped arccos of
    the dot product but keeps full precision for nearly equal or nearly
    opposite vectors.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def check_anchor_targets(targets, tol: float = 1e-8) -> None:
    """Raise IdentificationError unless anchors can fix the orientation.

    Requires at least three anchors, no antipodal pair and not all anchors on
    one great circle (the anchors must span at least three dimensions).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] < 3:
        raise IdentificationError(
            f"need at least 3 anchored centers, got {targets.shape[0]} "
            "(identification requires three fixed group centers)"
        )
    gram = targets @ targets.T
    iu = np.triu_indices(targets.shape[0], 1)
    if np.any(gram[iu] < -1.0 + tol):
        raise IdentificationError("anchored centers must not be antipodal")
    if np.any(gram[iu] > 1.0 - tol):
        raise IdentificationError("anchored centers must be distinct")
    sv = np.linalg.svd(targets, compute_uv=False)
    if sv.size < 3 or sv[2] < tol:
        raise IdentificationError(
            "anchored centers lie on one great circle"
        )


def procrustes_rotation(source, target) -> np.ndarray:
    """Proper rotation R (det +1) minimizing sum ||R s_a - t_a||^2."""
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    u, _, vt = np.linalg.svd(target.T @ source)
    fix = np.ones(u.shape[0])
    fix[-1] = np.sign(np.linalg.det(u @ vt)) or 1.0
    return (u * fix) @ vt


def procrustes_align(points, anchor_indices, anchor_targets):
    """Rotate ``points`` so the anchor rows best match ``anchor_targets``.

    Returns ``(R, rotated)`` with ``rotated = points @ R.T``. Rotations keep
    every inner product, so the likelihood is unchanged.
    """
    points = np.asarray(points, dtype=float)
    anchor_targets = np.asarray(anchor_targets, dtype=float)
    check_anchor_targets(anchor_targets)
    R = procrustes_rotation(points[list(anchor_indices)], anchor_targets)
    return R, points @ R.T


def spread_points(count: int, D: int, rng: np.random.Generator, avoid=None,
                  candidates: int = 2000) -> np.ndarray:
    """Greedy farthest-point selection of well separated directions."""
    pool = sample_uniform(candidates, D, rng)
    chosen = [] if avoid is None else [np.asarray(a, dtype=float) for a in np.atleast_2d(avoid)]
    out = []
    for _ in range(count):
        if chosen:
            closeness = np.max(pool @ np.array(chosen).T, axis=1)
            idx = int(np.argmin(closeness))
        else:
            idx = 0
        out.append(pool[idx])
        chosen.append(pool[idx])
    return np.array(out).reshape(count, D)
