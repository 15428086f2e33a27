"""Village input files, the OUT results tree and the outcome regression helper.

Inputs for village ``i`` live in one folder:

* ``ARD_SURVEY_i.csv``: one row per respondent, one column per trait (header
  row of trait names). An optional ``node_id`` column gives each respondent's
  census row; without it respondents are census rows 0..m-1. An optional
  ``reported_degree`` column holds self-reported degrees.
* ``ARD_CENSUS_i.csv``: one 0/1 row per node, the same trait columns.
* ``distance_i.csv``: covariate distances, one row per non-respondent (in
  ascending node order) and one column per respondent. Optional when every
  node is a respondent.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import re
from pathlib import Path

import numpy as np

from .model import ArdDataset, validate_dataset

SURVEY = "ARD_SURVEY_{}.csv"
CENSUS = "ARD_CENSUS_{}.csv"
DISTANCE = "distance_{}.csv"
SPECIAL_COLUMNS = ("node_id", "reported_degree")


class InputFormatError(ValueError):
    """Malformed input file; the message names file, line and column."""


def fmt(x) -> str:
    """Shortest round-tripping text for a number; NaN as an empty cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _read_table(path: Path, numeric: bool = True):
    if not path.exists():
        raise FileNotFoundError(f"missing input file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputFormatError(f"{path}: empty file (a header row is required)")
    header = [h.strip() for h in rows[0]]
    body = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputFormatError(f"{path}, line {ln}: {len(row)} cells, header has {len(header)}")
        if numeric:
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise InputFormatError(
                        f"{path}, line {ln}, column {col} ({header[col - 1]!r}): "
                        f"non-numeric value {cell!r}") from None
            body.append(vals)
        else:
            body.append(row)
    arr = np.array(body, dtype=float).reshape(len(body), len(header)) if numeric else body
    return header, arr


def _write_table(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def discover_villages(folder) -> list:
    """Village indices with a survey file, in ascending order."""
    pat = re.compile(r"ARD_SURVEY_(\d+)\.csv$")
    found = [int(m.group(1)) for p in Path(folder).iterdir() if (m := pat.match(p.name))]
    return sorted(found)


def load_village_inputs(folder, village: int, min_share: float = 0.0) -> ArdDataset:
    folder = Path(folder)
    s_head, survey = _read_table(folder / SURVEY.format(village))
    c_head, census = _read_table(folder / CENSUS.format(village))
    s_traits = [h for h in s_head if h not in SPECIAL_COLUMNS]
    c_traits = [h for h in c_head if h != "node_id"]
    if s_traits != c_traits:
        raise InputFormatError(
            f"header mismatch: {SURVEY.format(village)} has {len(s_traits)} traits {s_traits}, "
            f"{CENSUS.format(village)} has {len(c_traits)} traits {c_traits}")
    y = survey[:, [s_head.index(t) for t in s_traits]]
    m = y.shape[0]
    traits = census[:, [c_head.index(t) for t in c_traits]]
    n = traits.shape[0]
    ard_index = (survey[:, s_head.index("node_id")].astype(int) if "node_id" in s_head
                 else np.arange(m))
    degrees = (survey[:, s_head.index("reported_degree")] if "reported_degree" in s_head
               else None)
    dpath = folder / DISTANCE.format(village)
    if dpath.exists():
        _, dist = _read_table(dpath)
    elif m == n:
        dist = np.zeros((0, m))
    else:
        raise FileNotFoundError(f"missing input file {dpath}")
    raw = ArdDataset(y=y, n=n, ard_index=ard_index, census_traits=traits,
                     covariate_distance=dist, reported_degrees=degrees,
                     trait_names=tuple(s_traits))
    return validate_dataset(raw, min_share=min_share)


def write_village_inputs(data: ArdDataset, folder, village: int) -> list:
    """Write the three input files; returns their paths."""
    folder = Path(folder)
    names = list(data.trait_names) or [f"trait{k}" for k in range(data.K)]
    s_head = ["node_id"] + names + (["reported_degree"] if data.reported_degrees is not None else [])
    s_rows = []
    for i in range(data.m):
        row = [int(data.ard_index[i])] + [int(v) for v in data.y[i]]
        if data.reported_degrees is not None:
            row.append(int(data.reported_degrees[i]))
        s_rows.append(row)
    paths = [folder / SURVEY.format(village), folder / CENSUS.format(village),
             folder / DISTANCE.format(village)]
    _write_table(paths[0], s_head, s_rows)
    _write_table(paths[1], names, [[int(v) for v in r] for r in data.census_traits])
    dist = data.covariate_distance if data.covariate_distance is not None else np.zeros((0, data.m))
    _write_table(paths[2], [f"r{int(i)}" for i in data.ard_index], dist.tolist())
    return paths


# ---------------------------------------------------------------------------
# OUT tree

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, tuple)):
        return list(o)
    if hasattr(o, "__dataclass_fields__"):
        import dataclasses
        return dataclasses.asdict(o)
    raise TypeError(f"not serializable: {type(o)}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_graph(path, g) -> None:
    _write_table(Path(path), ["u", "v"], g.edges.tolist())


def read_graph(path, n: int | None = None):
    from .graphs import GraphSample

    header, arr = _read_table(Path(path))
    if header != ["u", "v"]:
        raise InputFormatError(f"{path}: expected header 'u,v', got {header}")
    edges = arr.astype(np.int64)
    size = n if n is not None else (int(edges.max()) + 1 if edges.size else 0)
    return GraphSample(size, edges)


def write_village_outputs(result: dict, out_root) -> list:
    """Write one village's files under ``out_root``; returns the paths written.

    ``result`` keys: village, node_mean, node_sd (dicts of length-n arrays),
    graph_mean, graph_sd (dicts of floats), graphs (list of GraphSample),
    diagnostics (ChainDiagnostics or None), ard_index.
    """
    out = Path(out_root)
    v = result["village"]
    paths = []
    stats = list(result["node_mean"])
    n = len(next(iter(result["node_mean"].values())))
    is_ard = np.zeros(n, dtype=bool)
    is_ard[result["ard_index"]] = True
    header = ["node_id", "is_ard"] + [f"{s}_{x}" for s in stats for x in ("mean", "sd")]
    rows = [[i, int(is_ard[i])] + [val for s in stats
                                    for val in (result["node_mean"][s][i], result["node_sd"][s][i])]
            for i in range(n)]
    p = out / f"network_characteristics_{v}.csv"
    _write_table(p, header, rows)
    paths.append(p)
    p = out / f"graph_level_{v}.csv"
    _write_table(p, ["statistic", "mean", "sd"],
                 [[s, result["graph_mean"][s], result["graph_sd"][s]] for s in result["graph_mean"]])
    paths.append(p)
    for s, g in enumerate(result["graphs"]):
        p = out / "SIMULATION" / f"graph_{v}_{s}.csv"
        write_graph(p, g)
        paths.append(p)
    p = out / f"chain_{v}_diagnostics.csv"
    diag = result.get("diagnostics")
    drows = [] if diag is None else [[k, d["rhat"], d["ess"], d["mean"], d["sd"], int(d["degenerate"])]
                                     for k, d in diag.stats.items()]
    for block, rate in sorted(result.get("acceptance", {}).items()):
        drows.append([f"acceptance:{block}", "", "", rate, "", 0])
    _write_table(p, ["parameter", "rhat", "ess", "mean", "sd", "degenerate"], drows)
    paths.append(p)
    return paths


def write_manifest(out_root, config: dict, seed: int, files, extra: dict | None = None) -> Path:
    """manifest.json with seed, config hash, library versions and file digests."""
    import scipy

    from . import __version__

    out = Path(out_root)
    files = sorted(Path(f) for f in files)
    manifest = {
        "seed": int(seed),
        "config_hash": config_hash(config),
        "config": json.loads(json.dumps(config, sort_keys=True, default=_json_default)),
        "versions": {"ardnet": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "files": {str(f.relative_to(out)): _sha256(f) for f in files},
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# regression

def ols_regress(y, X, clusters=None, bootstrap: int = 1000, rng=None,
                intercept: bool = True) -> dict:
    """OLS by QR; with cluster ids, block-bootstrap sds over resampled clusters.

    Returns ``coef`` (intercept first when added), ``se`` (NaN without
    clusters), ``n`` and ``boot`` (the bootstrap coefficient draws).
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
    V, q = X.shape
    if y.size != V:
        raise ValueError("y and X have different numbers of rows")
    if V <= q:
        raise ValueError(f"need more observations ({V}) than coefficients ({q})")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise np.linalg.LinAlgError("design matrix is rank deficient")
    coef = np.linalg.solve(R, Q.T @ y)
    out = {"coef": coef, "se": np.full(q, np.nan), "n": V, "boot": None}
    if clusters is None or bootstrap <= 0:
        return out
    clusters = np.asarray(clusters).ravel()
    labels, inv = np.unique(clusters, return_inverse=True)
    C = labels.size
    xtx = np.zeros((C, q, q))
    xty = np.zeros((C, q))
    np.add.at(xtx, inv, X[:, :, None] * X[:, None, :])
    np.add.at(xty, inv, X * y[:, None])
    rng = np.random.default_rng(rng)
    boots = []
    for _ in range(bootstrap):
        w = np.bincount(rng.integers(0, C, C), minlength=C).astype(float)
        A = np.tensordot(w, xtx, axes=1)
        b = w @ xty
        try:
            boots.append(np.linalg.solve(A, b))
        except np.linalg.LinAlgError:
            continue
    boots = np.array(boots)
    out["boot"] = boots
    out["se"] = boots.std(axis=0, ddof=1)
    return out


def default_workers() -> int:
    """Parallelism from the ARDNET_WORKERS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("ARDNET_WORKERS", "1")))
    except ValueError:
        return 1
