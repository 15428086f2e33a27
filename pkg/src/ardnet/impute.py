"""Nearest-neighbor extension of (nu, z) from respondents to the rest of the census."""

from __future__ import annotations

import numpy as np

WEIGHT_EPS = 1e-9


def neighbor_weights(covariate_distance, k: int):
    """Indices and normalized inverse-distance weights of the k nearest respondents.

    Rows are non-respondents, columns respondents. Ties in distance go to the
    lower respondent index (stable sort).
    """
    dist = np.asarray(covariate_distance, dtype=float)
    if dist.ndim != 2:
        raise ValueError("distance matrix must be 2-d")
    m = dist.shape[1]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    if np.any(dist < 0) or not np.all(np.isfinite(dist)):
        raise ValueError("distances must be finite and non-negative")
    idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
    near = np.take_along_axis(dist, idx, axis=1)
    w = 1.0 / (near + WEIGHT_EPS)
    return idx, w / w.sum(axis=1, keepdims=True)


def impute_non_ard(ard_nu, ard_z, covariate_distance, k: int = 5):
    """Weighted kNN averages of nu and z for every non-respondent.

    z is renormalized to unit length; when the weighted sum cancels exactly the
    nearest neighbor's position is used instead.
    """
    ard_nu = np.asarray(ard_nu, dtype=float)
    ard_z = np.asarray(ard_z, dtype=float)
    dist = np.asarray(covariate_distance, dtype=float)
    if dist.shape[0] == 0:
        return np.zeros(0), np.zeros((0, ard_z.shape[1]))
    if dist.shape[1] != ard_nu.size or ard_z.shape[0] != ard_nu.size:
        raise ValueError("distance columns must match the number of respondents")
    idx, w = neighbor_weights(dist, k)
    nu = np.sum(w * ard_nu[idx], axis=1)
    zsum = np.einsum("jk,jkd->jd", w, ard_z[idx])
    norm = np.linalg.norm(zsum, axis=1)
    bad = norm < 1e-12
    # already unit length (for example a single exact match): keep the bits as they are
    unit = np.abs(norm - 1.0) <= 4 * np.finfo(float).eps
    norm = np.where(unit, 1.0, norm)
    z = np.empty_like(zsum)
    z[~bad] = zsum[~bad] / norm[~bad, None]
    z[bad] = ard_z[idx[bad, 0]]
    return nu, z
