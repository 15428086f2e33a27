"""Fit one village end to end: chains, posterior graphs and their statistics."""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .graphs import compute_stats, diffusion_centrality, draw_posterior_graphs
from .model import Anchors, ArdDataset, PriorConfig
from .sampler import run_chain, summarize_chain
from .simlab import pooled_draws


def summarize_graphs(graphs, seed_node: int | None = 0, dc: tuple | None = None):
    """Means and sds over graph draws of every node and graph statistic.

    ``dc`` = (q, T) adds diffusion centrality to the node statistics.
    """
    node_acc, graph_acc = [], []
    for g in graphs:
        ns, gs = compute_stats(g, seed_node)
        if dc is not None:
            ns["diffusion_centrality"] = diffusion_centrality(g, *dc)
        node_acc.append(ns)
        graph_acc.append(gs)
    ddof = 1 if len(graphs) > 1 else 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        node_mean = {k: np.nanmean([s[k] for s in node_acc], axis=0) for k in node_acc[0]}
        node_sd = {k: np.nanstd([s[k] for s in node_acc], axis=0, ddof=ddof) for k in node_acc[0]}
        graph_mean = {k: float(np.nanmean([s[k] for s in graph_acc])) for k in graph_acc[0]}
        graph_sd = {k: float(np.nanstd([s[k] for s in graph_acc], ddof=ddof)) for k in graph_acc[0]}
    return node_mean, node_sd, graph_mean, graph_sd


def fit_village(data: ArdDataset, priors: PriorConfig, seed: int, village: int = 0,
                chains: int = 2, anchors: Anchors | None = None, baseline: bool = False,
                seed_node: int | None = 0, dc: tuple | None = None) -> dict:
    """Run ``chains`` chains, draw ``priors.n_graph_draws`` graphs, summarize.

    Every random stream descends from (seed, village), so the result does not
    depend on the order in which villages are processed.
    """
    if baseline:
        priors = dataclasses.replace(priors, latent=False)
    root = np.random.SeedSequence([seed, village])
    chain_seeds = root.spawn(chains + 1)
    fits = [run_chain(data, priors, anchors, np.random.default_rng(s)) for s in chain_seeds[:chains]]
    graphs = draw_posterior_graphs(pooled_draws(fits), data, priors.n_graph_draws,
                                   np.random.default_rng(chain_seeds[-1]), priors.knn_k)
    node_mean, node_sd, graph_mean, graph_sd = summarize_graphs(graphs, seed_node, dc)
    diag = None
    if min(len(f.draws) for f in fits) >= 10:
        diag = summarize_chain(fits, rng=np.random.default_rng(root.spawn(1)[0]))
    acceptance = {}
    for f in fits:
        for entry in f.acceptance_log[-1:]:
            for k, v in entry.items():
                if k != "sweep":
                    acceptance.setdefault(k, []).append(v)
    return {
        "village": village, "fits": fits, "graphs": graphs, "diagnostics": diag,
        "node_mean": node_mean, "node_sd": node_sd,
        "graph_mean": graph_mean, "graph_sd": graph_sd,
        "ard_index": data.ard_index,
        "acceptance": {k: float(np.mean(v)) for k, v in acceptance.items()},
    }
