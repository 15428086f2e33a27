"""Link probabilities, graph draws and network statistics.

Graphs are small and dense enough (hundreds to a few thousand nodes) that
all-pairs quantities are computed with dense matrix products: shortest path
counts for every source at once, level by level, and the Brandes dependency
accumulation run backwards over the same levels.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.special import logsumexp

log = logging.getLogger(__name__)

NODE_STATS = ("degree", "eigenvector_centrality", "betweenness", "closeness",
              "clustering", "support", "distance_from_seed")
GRAPH_STATS = ("max_eigenvalue", "avg_path_length", "proximity", "diameter",
               "clustering", "n_components", "giant_fraction", "eigenvector_cut")


@dataclass
class GraphSample:
    """Undirected simple graph on nodes 0..n-1; ``edges`` rows are (u, v), u < v, sorted."""

    n: int
    edges: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        self.edges = e

    @classmethod
    def from_adjacency(cls, A, meta=None) -> "GraphSample":
        A = np.asarray(A)
        u, v = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], np.column_stack([u, v]), meta or {})

    def adjacency(self, dtype=float) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=dtype)
        if self.edges.size:
            A[self.edges[:, 0], self.edges[:, 1]] = 1
            A[self.edges[:, 1], self.edges[:, 0]] = 1
        return A

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def __eq__(self, other):
        return (isinstance(other, GraphSample) and self.n == other.n
                and np.array_equal(self.edges, other.edges))


def link_probability_matrix(nu, z, zeta: float, expected_degrees, clamp: bool = True):
    """Normalized link probabilities exp(nu_i + nu_j + zeta z_i.z_j) * sum E[d] / total.

    The total runs over ordered pairs i != j, so before clamping the entries sum
    to sum(expected_degrees). With ``clamp`` cells above 1 are set to 1 and the
    number of such cells is logged.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    n = nu.size
    logw = nu[:, None] + nu[None, :] + zeta * (z @ z.T)
    np.fill_diagonal(logw, -np.inf)
    log_total = logsumexp(logw)
    P = np.exp(logw - log_total + np.log(np.sum(expected_degrees)))
    np.fill_diagonal(P, 0.0)
    if clamp:
        over = int(np.count_nonzero(P > 1.0)) // 2
        if over:
            log.info("clamped %d link probabilities at 1 (n=%d)", over, n)
        P = np.minimum(P, 1.0)
    return P


def sample_graph(P, rng: np.random.Generator, meta=None) -> GraphSample:
    """Independent Bernoulli draw for every unordered pair."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < P[iu, ju]
    return GraphSample(n, np.column_stack([iu[keep], ju[keep]]), meta or {})


# ---------------------------------------------------------------------------
# shared per-graph computations

class _Analysis:
    def __init__(self, g: GraphSample):
        self.g = g
        self.n = g.n
        self.A = g.adjacency()
        self.deg = self.A.sum(axis=1)
        self._dist = None
        self._comp = None

    @property
    def dist(self):
        if self._dist is None:
            if self.n == 0:
                self._dist = np.zeros((0, 0))
            else:
                self._dist = shortest_path(csr_matrix(self.A), method="D", unweighted=True,
                                           directed=False)
        return self._dist

    @property
    def components(self):
        if self._comp is None:
            k, labels = connected_components(csr_matrix(self.A), directed=False)
            sizes = np.bincount(labels, minlength=k)
            # largest component; ties go to the one holding the lowest node id
            giant = int(np.argmax(sizes))
            self._comp = (k, labels, sizes, giant)
        return self._comp

    @property
    def giant_nodes(self):
        _, labels, _, giant = self.components
        return np.flatnonzero(labels == giant)

    def path_counts(self):
        """sigma[s, v]: number of shortest s-v paths (sigma[s, s] = 1)."""
        dist = self.dist
        finite = np.isfinite(dist)
        level = np.where(finite, dist, -1).astype(int)
        sigma = np.eye(self.n)
        for ell in range(1, level.max() + 1 if level.size else 1):
            prev = np.where(level == ell - 1, sigma, 0.0)
            sigma = np.where(level == ell, prev @ self.A, sigma)
        return sigma, level

    def betweenness(self):
        """Unnormalized betweenness, each unordered pair of endpoints counted once."""
        if self.n < 3:
            return np.zeros(self.n)
        sigma, level = self.path_counts()
        delta = np.zeros((self.n, self.n))
        top = level.max()
        for ell in range(top, 0, -1):
            at = level == ell
            T = np.where(at, (1.0 + delta) / np.where(at, sigma, 1.0), 0.0)
            contrib = (T @ self.A) * sigma
            delta = np.where(level == ell - 1, delta + contrib, delta)
        np.fill_diagonal(delta, 0.0)
        return delta.sum(axis=0) / 2.0

    def triangles(self):
        A = self.A
        return np.einsum("ij,ij->i", A @ A, A) / 2.0


def _power_iteration(M, tol=1e-10, max_iter=100_000, start=None):
    v = np.ones(M.shape[0]) if start is None else np.asarray(start, dtype=float).copy()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return v, 0.0, True
        w /= nw
        if np.linalg.norm(w - v) < tol:
            return w, float(w @ (M @ w)), True
        v = w
    return v, float(v @ (M @ v)), False


def eigenvector_centrality(g: GraphSample, tol: float = 1e-10, max_iter: int = 100_000,
                           _an: _Analysis | None = None) -> np.ndarray:
    """Leading adjacency eigenvector on the giant component, max entry 1, zeros elsewhere.

    Power iteration runs on A + I, which has the same leading eigenvector as A
    but no sign-alternating partner on bipartite components.
    """
    an = _an or _Analysis(g)
    out = np.zeros(an.n)
    if an.n == 0 or an.g.n_edges == 0:
        return out
    idx = an.giant_nodes
    sub = an.A[np.ix_(idx, idx)]
    M = sub + np.eye(idx.size)
    v, _, ok = _power_iteration(M, tol, max_iter, start=an.deg[idx] + 1.0)
    if not ok:
        log.warning("power iteration did not converge; using a symmetric eigensolver")
        v = np.linalg.eigh(sub)[1][:, -1]
    v = np.abs(v)
    out[idx] = v / v.max()
    return out


def fiedler_vector(A) -> np.ndarray:
    """Eigenvector of the second smallest Laplacian eigenvalue, sign fixed so
    the entry of largest magnitude (lowest index on ties) is positive."""
    A = np.asarray(A, dtype=float)
    L = np.diag(A.sum(axis=1)) - A
    _, vecs = np.linalg.eigh(L)
    f = vecs[:, 1]
    j = int(np.argmax(np.abs(f) - 1e-12 * np.arange(f.size)))
    return f if f[j] > 0 else -f


def cut_share(A, high) -> float:
    """Share of edges whose endpoints fall on different sides of a split."""
    A = np.asarray(A)
    high = np.asarray(high, dtype=bool)
    total = A.sum() / 2.0
    if total == 0:
        return float("nan")
    cross = A[np.ix_(high, ~high)].sum()
    return float(cross / total)


def eigenvector_cut(g: GraphSample, split: str = "median", _an: _Analysis | None = None) -> float:
    """Cross-group edge share of the Fiedler split of the giant component.

    ``split="median"`` puts nodes at or below the median in the low group;
    ``split="sign"`` splits at zero.
    """
    an = _an or _Analysis(g)
    if an.g.n_edges == 0:
        return float("nan")
    idx = an.giant_nodes
    if idx.size < 2:
        return float("nan")
    sub = an.A[np.ix_(idx, idx)]
    f = fiedler_vector(sub)
    thresh = np.median(f) if split == "median" else 0.0
    if split not in ("median", "sign"):
        raise ValueError(f"unknown split {split!r}")
    return cut_share(sub, f > thresh)


def compute_node_stats(g: GraphSample, seed_node: int | None = 0,
                       _an: _Analysis | None = None) -> dict:
    """Per-node statistics keyed by name; every value is a length-n array."""
    an = _an or _Analysis(g)
    n = an.n
    deg = an.deg
    dist = an.dist
    with np.errstate(divide="ignore"):
        inv = np.where(np.isfinite(dist) & (dist > 0), 1.0 / dist, 0.0)
    closeness = inv.sum(axis=1) / (n - 1) if n > 1 else np.zeros(n)
    tri = an.triangles()
    pairs = deg * (deg - 1) / 2.0
    clustering = np.divide(tri, pairs, out=np.zeros(n), where=pairs > 0)
    # an edge is supported when its endpoints share a neighbor
    common = (an.A @ an.A) * an.A
    supported = (common > 0).sum(axis=1)
    support = np.divide(supported, deg, out=np.zeros(n), where=deg > 0)
    if seed_node is None or n == 0:
        seed_dist = np.full(n, np.nan)
    else:
        row = dist[seed_node]
        seed_dist = np.where(np.isfinite(row), row, np.nan)
    return {
        "degree": deg.copy(),
        "eigenvector_centrality": eigenvector_centrality(g, _an=an),
        "betweenness": an.betweenness(),
        "closeness": closeness,
        "clustering": clustering,
        "support": support,
        "distance_from_seed": seed_dist,
    }


def compute_graph_stats(g: GraphSample, split: str = "median",
                        _an: _Analysis | None = None) -> dict:
    """Graph-level statistics; a graph without edges gives an all-NaN report."""
    an = _an or _Analysis(g)
    n = an.n
    if n == 0 or g.n_edges == 0:
        return {k: float("nan") for k in GRAPH_STATS}
    dist = an.dist
    off = ~np.eye(n, dtype=bool)
    finite = np.isfinite(dist) & off
    with np.errstate(divide="ignore"):
        inv = np.where(finite, 1.0 / dist, 0.0)
    k, _, sizes, giant = an.components
    gi = an.giant_nodes
    wedges = float(np.sum(an.deg * (an.deg - 1)) / 2.0)
    return {
        "max_eigenvalue": float(np.linalg.eigvalsh(an.A)[-1]),
        "avg_path_length": float(dist[finite].mean()),
        "proximity": float(inv[off].mean()),
        "diameter": float(dist[np.ix_(gi, gi)].max()),
        "clustering": float(an.triangles().sum() / wedges) if wedges else 0.0,
        "n_components": float(k),
        "giant_fraction": float(sizes[giant] / n),
        "eigenvector_cut": eigenvector_cut(g, split=split, _an=an),
    }


def compute_stats(g: GraphSample, seed_node: int | None = 0, split: str = "median"):
    """Node and graph statistics sharing one all-pairs distance computation."""
    an = _Analysis(g)
    return compute_node_stats(g, seed_node, _an=an), compute_graph_stats(g, split, _an=an)


def diffusion_centrality(g: GraphSample, q: float, T: int) -> np.ndarray:
    """Row sums of sum_{t=1..T} (q A)^t via repeated matrix-vector products."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if q < 0:
        raise ValueError("q must be non-negative")
    A = g.adjacency()
    v = np.ones(g.n)
    total = np.zeros(g.n)
    for _ in range(T):
        v = q * (A @ v)
        total += v
    return total


_EDGE = re.compile(r"edge\((\d+),\s*(\d+)\)")


def posterior_expected_stat(graphs, selector, seed_node: int | None = 0):
    """Mean and sd over graph draws of a statistic.

    ``selector`` is a node statistic name, a graph statistic name prefixed with
    ``graph:`` (or any unambiguous graph statistic name), ``edge(i,j)``, or a
    callable mapping a GraphSample to a number or array.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("need at least one graph")
    if callable(selector):
        fn = selector
    elif (m := _EDGE.fullmatch(str(selector).replace(" ", ""))):
        i, j = sorted((int(m.group(1)), int(m.group(2))))

        def fn(g):
            return float(np.any((g.edges[:, 0] == i) & (g.edges[:, 1] == j))) if g.n_edges else 0.0
    elif selector.startswith("graph:") or (selector in GRAPH_STATS and selector not in NODE_STATS):
        name = selector.split(":", 1)[-1]

        def fn(g):
            return compute_graph_stats(g)[name]
    elif selector in NODE_STATS:
        def fn(g):
            if selector == "eigenvector_centrality":
                return eigenvector_centrality(g)
            if selector == "degree":
                return g.adjacency().sum(axis=1)
            return compute_node_stats(g, seed_node)[selector]
    else:
        raise ValueError(f"unknown statistic {selector!r}")
    vals = np.array([fn(g) for g in graphs], dtype=float)
    mean = np.nanmean(vals, axis=0) if np.isnan(vals).any() else vals.mean(axis=0)
    sd = np.zeros_like(mean) if len(graphs) == 1 else np.nanstd(vals, axis=0, ddof=1)
    return mean, sd


def assemble_full_state(params, data, zeta: float, D: int, knn_k: int = 5):
    """Gregariousness and positions for all n nodes from one parameter point.

    Respondent nu solves the degree map on the respondent sample; the other
    nodes are imputed by weighted nearest neighbors. Returns (nu, z, E[d]).
    """
    from .impute import impute_non_ard
    from .likelihood import degree_from_nu, nu_from_degree

    n = data.n
    nu_ard = nu_from_degree(params.d, zeta, n, D)
    nu = np.empty(n)
    z = np.empty((n, params.z.shape[1]))
    nu[data.ard_index] = nu_ard
    z[data.ard_index] = params.z
    rest = data.non_ard_index
    if rest.size:
        k = min(knn_k, data.m)
        nu[rest], z[rest] = impute_non_ard(nu_ard, params.z, data.covariate_distance, k)
    return nu, z, degree_from_nu(nu, zeta, n, D)


def draw_posterior_graphs(draws, data, count: int, rng: np.random.Generator | int | None = None,
                          knn_k: int = 5) -> list:
    """One graph per selected retained draw.

    Draws are taken evenly spaced over the retained sample; when ``count``
    exceeds the number of draws they are reused with fresh Bernoulli noise and
    the graph's ``meta["reused"]`` flag is set.
    """
    rng = np.random.default_rng(rng)
    if count <= 0:
        return []
    kept = draws.draws
    if not kept:
        raise ValueError("no retained draws")
    D = kept[0].z.shape[1]
    if count <= len(kept):
        picks = np.unique(np.linspace(0, len(kept) - 1, count).round().astype(int))
        if picks.size < count:
            picks = np.arange(count)
    else:
        log.warning("requested %d graphs from %d draws; reusing draws", count, len(kept))
        picks = np.arange(count) % len(kept)
    seeds = rng.integers(0, 2**63 - 1, size=count)
    seen = set()
    out = []
    for s, (idx, seed) in enumerate(zip(picks, seeds)):
        p = kept[int(idx)]
        nu, z, ed = assemble_full_state(p, data, p.zeta, D, knn_k)
        P = link_probability_matrix(nu, z, p.zeta, ed)
        meta = {"draw_index": int(idx), "seed": int(seed), "reused": int(idx) in seen, "graph": s}
        seen.add(int(idx))
        out.append(sample_graph(P, np.random.default_rng(int(seed)), meta))
    return out
