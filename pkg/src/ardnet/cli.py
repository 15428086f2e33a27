"""Command line entry point: fit, simulate, stats, experiment, regress.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
failure, 3 file system error. Settings come from defaults, then the YAML
config file, then command line flags (flags win).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import io
from .model import Anchors, DataValidationError, Prior, PriorConfig
from .sampler import SamplerError
from .sphere import IdentificationError

log = logging.getLogger("ardnet")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


@dataclass
class FitSettings:
    p: int = 2
    T: int = 3000
    thin: int = 5
    graphs: int = 100
    chains: int = 2
    seed: int = 0
    degree_mode: str = "estimated"
    prevalence_mode: str = "census"
    pinned_degree: float | None = None
    knn_k: int = 5
    warmup: int | None = None
    zeta_prior: list = field(default_factory=lambda: ["gamma", 0.5, 0.5])
    eta_prior: list = field(default_factory=lambda: ["gamma", 5.0, 0.1])
    mu_d_prior: list = field(default_factory=lambda: ["flat"])
    sigma2_d_prior: list = field(default_factory=lambda: ["flat"])
    anchors: dict | None = None
    min_share: float = 0.0
    beta_baseline: bool = False
    seed_node: int | None = 0
    dc_q: float | None = None
    dc_T: int | None = None
    village: int | None = None

    def prior_config(self) -> PriorConfig:
        return PriorConfig(
            zeta_prior=Prior(*self.zeta_prior), eta_prior=Prior(*self.eta_prior),
            mu_d_prior=Prior(*self.mu_d_prior), sigma2_d_prior=Prior(*self.sigma2_d_prior),
            p=self.p, T=self.T, thin=self.thin, n_graph_draws=self.graphs, knn_k=self.knn_k,
            degree_mode=self.degree_mode, prevalence_mode=self.prevalence_mode,
            pinned_degree=self.pinned_degree, warmup=self.warmup,
        )

    def anchor_spec(self, K: int) -> Anchors:
        D = self.p + 1
        if not self.anchors:
            return Anchors.default(K, D)
        groups = tuple(int(g) for g in self.anchors["groups"])
        targets = np.asarray(self.anchors["targets"], dtype=float)
        targets = targets / np.linalg.norm(targets, axis=1, keepdims=True)
        return Anchors(groups, targets)


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a key-value mapping")
    return data


def merge_settings(cls, file_values: dict, flag_values: dict):
    """Defaults, overridden by the file, overridden by flags that were given."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(file_values) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None and k in names})
    return cls(**merged)


# ---------------------------------------------------------------------------
# commands

def cmd_fit(args) -> int:
    flags = {"village": args.village, "chains": args.chains, "seed": args.seed, "p": args.p,
             "T": args.T, "graphs": args.graphs, "degree_mode": args.degree_mode,
             "beta_baseline": True if args.beta_baseline else None}
    st = merge_settings(FitSettings, load_config(args.config), flags)
    priors = st.prior_config()
    villages = [st.village] if st.village is not None else io.discover_villages(args.in_dir)
    if not villages:
        raise FileNotFoundError(f"no ARD_SURVEY_i.csv files in {args.in_dir}")
    out = Path(args.out)
    dc = (st.dc_q, st.dc_T) if st.dc_q is not None and st.dc_T is not None else None
    datasets = {}
    for v in villages:
        data = io.load_village_inputs(args.in_dir, v, min_share=st.min_share)
        if data.excluded:
            log.warning("village %d excluded: %s", v, data.excluded)
            continue
        datasets[v] = data
    jobs = [(datasets[v], priors, st.seed, v, st.chains, st.anchor_spec(datasets[v].K),
             st.beta_baseline, st.seed_node, dc) for v in sorted(datasets)]
    workers = io.default_workers()
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fit_job, jobs))
    else:
        results = [_fit_job(j) for j in jobs]
    files = []
    for res in results:
        files += io.write_village_outputs(res, out)
    excluded = sorted(set(villages) - set(datasets))
    io.write_manifest(out, dataclasses.asdict(st), st.seed, files,
                      extra={"villages": sorted(datasets), "excluded": excluded})
    print(f"wrote {len(files)} files for {len(results)} villages to {out}")
    return EXIT_OK


def _fit_job(job):
    from .pipeline import fit_village

    data, priors, seed, v, chains, anchors, baseline, seed_node, dc = job
    res = fit_village(data, priors, seed, village=v, chains=chains, anchors=anchors,
                      baseline=baseline, seed_node=seed_node, dc=dc)
    res.pop("fits")
    return res


def cmd_simulate(args) -> int:
    from .simlab import ExperimentConfig, simulate_dgp

    cfg = merge_settings(ExperimentConfig, load_config(args.config),
                         {"seed": args.seed, "n_reps": args.reps})
    out = Path(args.out)
    files = []
    for r in range(cfg.n_reps):
        truth = simulate_dgp(cfg, cfg.rep_rng(r))
        files += io.write_village_inputs(truth.data, out, r)
        p = out / "truth" / f"graph_{r}.csv"
        io.write_graph(p, truth.graph)
        files.append(p)
        D = cfg.D
        is_ard = np.isin(np.arange(cfg.n), truth.ard_index)
        rows = [[i, int(is_ard[i]), truth.nu[i], truth.expected_degrees[i], *truth.params.z[i]]
                for i in range(cfg.n)]
        p = out / "truth" / f"nodes_{r}.csv"
        io._write_table(p, ["node_id", "is_ard", "nu", "expected_degree"]
                        + [f"z{j}" for j in range(D)], rows)
        files.append(p)
        p = out / "truth" / f"groups_{r}.csv"
        io._write_table(p, ["group", "eta", "anchored"] + [f"center{j}" for j in range(D)],
                        [[k, truth.params.eta[k], int(k in truth.anchors.groups), *truth.params.centers[k]]
                         for k in range(cfg.K)])
        files.append(p)
    io.write_manifest(out, dataclasses.asdict(cfg), cfg.seed, files,
                      extra={"zeta": cfg.zeta, "anchor_groups": list(range(cfg.D))})
    print(f"simulated {cfg.n_reps} datasets into {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .pipeline import summarize_graphs

    folder = Path(args.graphs)
    paths = sorted(folder.glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no edge-list CSV files in {folder}")
    n = args.n
    if n is None:
        n = max(io.read_graph(p).n for p in paths)
    graphs = [io.read_graph(p, n) for p in paths]
    dc = (args.dc_q, args.dc_T) if args.dc_q is not None and args.dc_T is not None else None
    nm, nsd, gm, gsd = summarize_graphs(graphs, args.seed_node, dc)
    rows = [["node", i, s, nm[s][i], nsd[s][i]] for s in nm for i in range(n)]
    rows += [["graph", "", s, gm[s], gsd[s]] for s in gm]
    io._write_table(Path(args.out), ["level", "id", "statistic", "mean", "sd"], rows)
    print(f"summarized {len(graphs)} graphs into {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .simlab import ExperimentConfig, run_experiment_grid

    spec = load_config(args.grid)
    base = merge_settings(ExperimentConfig, spec.get("base", {}), {})
    grid = spec.get("grid", {})
    workers = int(spec.get("workers", io.default_workers()))
    rows = run_experiment_grid(base, grid, workers=workers, baseline=bool(spec.get("baseline", False)))
    out = Path(args.out)
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    p = out / "results.csv"
    io._write_table(p, keys, [[_cell(r.get(k)) for k in keys] for r in rows])
    io.write_manifest(out, {"base": dataclasses.asdict(base), "grid": grid}, base.seed, [p])
    print(f"wrote {len(rows)} rows to {p}")
    return EXIT_OK


def _cell(v):
    if isinstance(v, (list, tuple)):
        return json.dumps(list(v))
    if v is None:
        return ""
    return v


def _read_columns(path):
    header, arr = io._read_table(Path(path))
    return header, arr


def cmd_regress(args) -> int:
    _, y = _read_columns(args.y)
    xh, X = _read_columns(args.x)
    clusters = None
    if args.cluster:
        _, c = _read_columns(args.cluster)
        clusters = c[:, 0]
    fit = io.ols_regress(y[:, 0], X, clusters, bootstrap=args.bootstrap, rng=args.seed)
    w = sys.stdout
    w.write("term,coef,se\n")
    for name, b, s in zip(["intercept"] + xh, fit["coef"], fit["se"]):
        w.write(f"{name},{io.fmt(b)},{io.fmt(s)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ardnet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate the model for each village and draw graphs")
    f.add_argument("--in", dest="in_dir", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--config")
    f.add_argument("--village", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--p", type=int)
    f.add_argument("--T", type=int)
    f.add_argument("--graphs", type=int)
    f.add_argument("--degree-mode", choices=("observed", "estimated", "pinned"))
    f.add_argument("--beta-baseline", action="store_true")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="write simulated village inputs plus truth files")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--reps", type=int)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stats", help="posterior means and sds of statistics over edge lists")
    st.add_argument("--graphs", required=True)
    st.add_argument("--out", required=True)
    st.add_argument("--n", type=int, help="node count (default: largest id + 1)")
    st.add_argument("--seed-node", type=int, default=0)
    st.add_argument("--dc-q", type=float)
    st.add_argument("--dc-T", type=int)
    st.set_defaults(func=cmd_stats)

    e = sub.add_parser("experiment", help="run a simulation grid")
    e.add_argument("--grid", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("regress", help="OLS with optional cluster block bootstrap")
    r.add_argument("--y", required=True)
    r.add_argument("--x", required=True)
    r.add_argument("--cluster")
    r.add_argument("--bootstrap", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_regress)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataValidationError, IdentificationError, io.InputFormatError,
            yaml.YAMLError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SamplerError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
