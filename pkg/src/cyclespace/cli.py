"""Command line front end.

Every subcommand takes ``--config file.json``; keys mirror the long flag names
(dashes or underscores), and explicit flags override the file.  Each run
writes ``summary.json`` with the effective configuration, seed, versions and
wall time next to its other outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io, kernels
from .basis import (
    SpanningTree,
    decompose,
    fundamental_cycle_basis,
    random_spanning_tree,
    random_star_tree,
    star_tree,
)
from .graphs import NotInCycleSpace, odd_vertices, project_to_cycle_space
from .gwishart import ESTIMATORS, Dataset, EstimatorError, GWishartParams
from .mcmc import McmcConfig, run_chains, run_mcmc
from .prior import (
    CapExceeded,
    CycleBasisPrior,
    edge_count_bounds,
    edge_count_experiment,
    edge_inclusion_matrix,
    max_edge_construction,
    star_degree_pmf,
    vertex_joint_edge_distribution,
)
from .treeunion import (
    BOUNDS_HEADER,
    bounds_experiment,
    bounds_table,
    count_spanning_trees,
    count_trees_containing_edge,
    count_union_representations,
    lambda_count,
)

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_ESTIMATOR = 4
EXIT_CAP = 5
EXIT_IO = 6

PRESETS = {
    "paper-sec5": {"iterations": 1_000_000, "burn_in": 100_000, "prior": "uniform-star", "threshold": 0.95},
}


class OperationError(Exception):
    def __init__(self, operation: str, err: Exception):
        super().__init__(f"{operation} failed: {err}")
        self.operation = operation
        self.err = err

    @property
    def code(self) -> int:
        if isinstance(self.err, CapExceeded):
            return EXIT_CAP
        if isinstance(self.err, EstimatorError):
            return EXIT_ESTIMATOR
        if isinstance(self.err, OSError):
            return EXIT_IO
        return EXIT_INPUT


def _op(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except OperationError:
        raise
    except (ValueError, TypeError, KeyError, OSError, RuntimeError, NotInCycleSpace) as err:
        raise OperationError(name, err) from err


def ingest_csv(path, center: bool = True, standardize: bool = False) -> Dataset:
    """Data matrix from a CSV with one header row and numeric cells."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise ValueError("no data rows (N < 1)")
    X = np.empty((len(body), len(header)))
    for lineno, row in enumerate(body, 2):
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: {len(row)} cells, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                X[lineno - 2, c] = float(cell)
            except ValueError:
                raise ValueError(f"line {lineno}, column {c + 1}: non-numeric cell {cell!r}") from None
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in data")
    return Dataset.from_matrix(X, center=center, standardize=standardize)


def _parse_p(value):
    if isinstance(value, (list, tuple)):
        return [float(x) for x in value]
    if isinstance(value, str) and "," in value:
        return [float(x) for x in value.split(",") if x.strip()]
    return float(value)


def _bool(value):
    if isinstance(value, bool):
        return value
    return str(value).lower() in ("1", "true", "yes", "on")


# (flag, type, default, help, choices)
COMMON = [
    ("--output-dir", str, "out", "directory for outputs", None),
    ("--seed", int, 0, "random seed", None),
]
OPTIONS = {
    "prior-summary": [
        ("--n", int, 4, "number of vertices", None),
        ("--prior", str, "uniform-star", "prior mode", ("uniform-star", "tree")),
        ("--tree-prior", str, "uniform", "law of T in tree mode", ("uniform", "star")),
        ("--p", _parse_p, 0.5, "inclusion probability or comma-separated list", None),
        ("--vertex", int, 0, "vertex for the joint edge distribution", None),
        ("--draws", int, 100, "draws per r for the edge-count experiment", None),
        ("--cap", int, 24, "bit cap for the joint edge distribution", None),
    ],
    "mcmc-run": [
        ("--input", str, None, "data CSV with a header row", None),
        ("--delta", float, 3.0, "G-Wishart degrees of freedom", None),
        ("--d-matrix", str, "1", "rate matrix CSV, or a scalar s for s*I", None),
        ("--prior", str, "uniform-star", "prior mode", ("uniform-star", "tree")),
        ("--tree-prior", str, "uniform", "law of T in tree mode", ("uniform", "star")),
        ("--p", _parse_p, 0.5, "cycle inclusion probability or list", None),
        ("--iterations", int, 50_000, "MCMC iterations", None),
        ("--burn-in", int, 5_000, "burn-in iterations", None),
        ("--basis-period", int, 100, "iterations between basis refreshes", None),
        ("--thin", int, 10, "keep every thin-th sample", None),
        ("--estimator", str, "exact-laplace", "normalising-constant estimator", ESTIMATORS),
        ("--threshold", float, 0.95, "cutoff for the threshold graph", None),
        ("--chains", int, 1, "independent chains", None),
        ("--workers", int, 1, "processes for multiple chains", None),
        ("--init", str, "prior", "initial graph", ("prior", "empty")),
        ("--center", _bool, True, "center data columns", None),
        ("--standardize", _bool, False, "scale data columns to unit variance", None),
        ("--preset", str, None, "named preset", tuple(PRESETS)),
    ],
    "tree-union": [
        ("--input", str, None, "graph file (adjacency CSV or edge list)", None),
        ("--n", int, None, "vertex count for edge lists without a header", None),
        ("--k", int, 2, "largest k for Y(G, k)", None),
        ("--t0", str, None, "edge list of a spanning tree T0 for lambda(G, T0)", None),
        ("--cap", int, 20, "edge cap for Y(G, k)", None),
    ],
    "bounds-experiment": [
        ("--n", int, 5, "number of vertices", None),
        ("--k", int, 3, "number of trees in G", None),
        ("--replicates", int, 20, "random instances", None),
        ("--cap", int, 20, "edge cap for exact values", None),
    ],
    "project": [
        ("--input", str, None, "graph file (adjacency CSV or edge list)", None),
        ("--n", int, None, "vertex count for edge lists without a header", None),
    ],
}


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyclespace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON file with option values")
        for flag, typ, _default, help_, choices in COMMON + opts:
            sp.add_argument(flag, type=typ, default=argparse.SUPPRESS, help=help_, choices=choices)
    return parser


def effective_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then preset, then config file, then explicit flags."""
    specs = COMMON + OPTIONS[command]
    conv = {_dest(f): t for f, t, *_ in specs}
    choices = {_dest(f): c for f, _t, _d, _h, c in specs if c}
    cfg = {_dest(f): d for f, _t, d, *_ in specs}
    explicit = {k: v for k, v in vars(args).items() if k in conv}
    file_cfg = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise OperationError("read config", err) from err
        if not isinstance(raw, dict):
            raise OperationError("read config", ValueError("config must be a JSON object"))
        for key, val in raw.items():
            k = key.replace("-", "_")
            if k not in conv:
                raise OperationError("read config", ValueError(f"unknown option {key!r} for {command}"))
            file_cfg[k] = val if val is None else _op("read config", conv[k], val)
            if k in choices and file_cfg[k] is not None and file_cfg[k] not in choices[k]:
                raise OperationError("read config", ValueError(f"{key} must be one of {choices[k]}"))
    preset = explicit.get("preset", file_cfg.get("preset"))
    if preset is not None:
        cfg.update(PRESETS[preset])
    cfg.update(file_cfg)
    cfg.update(explicit)
    return cfg


def _versions() -> dict:
    return {
        "cyclespace": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": kernels.BACKEND,
    }


def _write_summary(out: Path, command: str, cfg: dict, start: float, extra: dict) -> None:
    summary = {
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "versions": _versions(),
        "runtime_seconds": time.perf_counter() - start,
    }
    summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _require(cfg, key, command):
    if cfg.get(key) is None:
        raise OperationError(command, ValueError(f"--{key.replace('_', '-')} is required"))
    return cfg[key]


def _load_d(spec, n: int) -> np.ndarray:
    try:
        return float(spec) * np.eye(n)
    except ValueError:
        D = io.read_matrix_csv(spec)
        if D.shape != (n, n):
            raise ValueError(f"rate matrix is {D.shape[0]}x{D.shape[1]}, data has {n} variables") from None
        return D


def cmd_prior_summary(cfg: dict, out: Path) -> dict:
    n = cfg["n"]
    rng = np.random.default_rng(cfg["seed"])
    if cfg["prior"] == "uniform-star":
        tree = _op("star_tree", star_tree, n, 0)
        p = 0.5
    elif cfg["tree_prior"] == "star":
        tree = _op("random_star_tree", random_star_tree, n, rng)
        p = cfg["p"]
    else:
        tree = _op("random_spanning_tree", random_spanning_tree, n, rng)
        p = cfg["p"]
    basis = fundamental_cycle_basis(tree)
    prior = _op("build prior", CycleBasisPrior, basis, p)
    io.write_matrix_csv(_op("edge_inclusion_probability", edge_inclusion_matrix, prior), out / "edge_probs.csv")
    io.write_edge_list(tree.graph, out / "tree.txt")
    extra = {"n": n, "basis_size": basis.size, "tree_edges": [list(e) for e in tree.edges]}

    v = cfg["vertex"]
    joint = _op("vertex_joint_edge_distribution", vertex_joint_edge_distribution, prior, v, cfg["cap"])
    io.write_rows_csv(
        out / "vertex_joint.csv",
        ["pattern", "probability"],
        [(io.coords_to_string(pat), repr(pr)) for pat, pr in joint.as_dict().items()],
    )
    degree = joint.degree_distribution()
    root = tree.star_root()
    common_p = basis.size > 0 and bool(np.all(prior.probs == prior.probs[0]))
    use_formula = root is not None and v != root and common_p
    rows = []
    for k in range(n):
        joint_k = float(degree[k]) if k < degree.size else 0.0
        formula = repr(star_degree_pmf(n, float(prior.probs[0]), k)) if use_formula else ""
        rows.append((k, repr(joint_k), formula))
    io.write_rows_csv(out / "degree_pmf.csv", ["degree", "joint_popcount", "star_formula"], rows)

    if root is not None:
        m = (n - 1) // 2
        rs = range(basis.size + 1)
        if basis.size > 200:
            rs = sorted(set(np.linspace(0, basis.size, 51).astype(int).tolist()))
        brows = []
        for r in rs:
            lo, hi = edge_count_bounds(n, r)
            counts = edge_count_experiment(n, r, cfg["draws"], rng)
            attained = max_edge_construction(n, r).num_edges if r <= m else ""
            brows.append((r, lo, hi, int(counts.min()), int(counts.max()), attained))
        io.write_rows_csv(out / "edge_count_bounds.csv",
                          ["r", "lower", "upper", "observed_min", "observed_max", "construction_edges"], brows)
    return extra


def cmd_mcmc_run(cfg: dict, out: Path) -> dict:
    path = _require(cfg, "input", "ingest_csv")
    data = _op("ingest_csv", ingest_csv, path, cfg["center"], cfg["standardize"])
    D = _op("read rate matrix", _load_d, cfg["d_matrix"], data.n)
    params = _op("GWishartParams", GWishartParams, cfg["delta"], D)
    mc = _op("McmcConfig", McmcConfig,
             iterations=cfg["iterations"], burn_in=cfg["burn_in"], basis_period=cfg["basis_period"],
             seed=cfg["seed"], prior_mode=cfg["prior"], p=cfg["p"], tree_prior=cfg["tree_prior"],
             estimator=cfg["estimator"], thin=cfg["thin"], init=cfg["init"])
    if cfg["chains"] > 1:
        summ = _op("run_mcmc", run_chains, mc, data, params, chains=cfg["chains"], workers=cfg["workers"])
    else:
        summ = _op("run_mcmc", run_mcmc, mc, data, params)
    io.write_matrix_csv(summ.edge_prob, out / "edge_probs.csv")
    io.write_adjacency_csv(summ.median_graph(), out / "median_graph.csv")
    io.write_adjacency_csv(summ.threshold_graph(cfg["threshold"]), out / "threshold_graph.csv")
    io.write_rows_csv(out / "trace.csv", ["iteration", "log_ml", "edge_count"],
                      [(int(j), repr(float(l)), int(m)) for j, l, m in summ.trace])
    return {
        "N": data.N,
        "n": data.n,
        "acceptance_rate": summ.acceptance_rate,
        "basis_acceptance_rate": None if math.isnan(summ.basis_acceptance_rate) else summ.basis_acceptance_rate,
        "samples_kept": summ.samples_kept,
        "mean_edge_count": summ.mean_edge_count,
        "estimator_failures": summ.failures,
        "chain_runtime_seconds": summ.runtime,
    }


def cmd_tree_union(cfg: dict, out: Path) -> dict:
    g = _op("read graph", io.read_graph, _require(cfg, "input", "read graph"), cfg["n"])
    tau = _op("count_spanning_trees", count_spanning_trees, g)
    extra = {"n": g.n, "edges": g.num_edges, "spanning_trees": str(tau)}
    rows = [(i, j, str(_op("count_trees_containing_edge", count_trees_containing_edge, g, (i, j))))
            for i, j in g.edges()]
    io.write_rows_csv(out / "trees_containing_edge.csv", ["i", "j", "count"], rows)
    ys = [(k, str(_op("count_union_representations", count_union_representations, g, k, cfg["cap"])))
          for k in range(1, cfg["k"] + 1)]
    io.write_rows_csv(out / "union_counts.csv", ["k", "Y"], ys)
    extra["union_counts"] = {str(k): y for k, y in ys}
    if cfg["t0"]:
        t = _op("read tree", io.read_edge_list, cfg["t0"], g.n)
        t0 = _op("read tree", SpanningTree, g.n, tuple(t.edges()))
        extra["lambda"] = str(_op("lambda", lambda_count, g, t0))
    return extra


def cmd_bounds_experiment(cfg: dict, out: Path) -> dict:
    rng = np.random.default_rng(cfg["seed"])
    rows = _op("bounds_experiment", bounds_experiment, cfg["n"], cfg["k"], cfg["replicates"], rng, cfg["cap"])
    io.write_rows_csv(out / "bounds.csv", BOUNDS_HEADER, bounds_table(rows))
    gaps = [float(r.upper / r.exact) for r in rows if r.exact is not None]
    return {
        "replicates": len(rows),
        "violations": sum(1 for r in rows if r.exact is not None and not (r.lower <= r.exact <= r.upper)),
        "max_upper_over_exact": max(gaps) if gaps else None,
    }


def cmd_project(cfg: dict, out: Path) -> dict:
    g = _op("read graph", io.read_graph, _require(cfg, "input", "read graph"), cfg["n"])
    proj, dist = _op("project_to_cycle_space", project_to_cycle_space, g)
    io.write_adjacency_csv(proj, out / "projected.csv")
    io.write_edge_list(proj, out / "projected.txt")
    extra = {"n": g.n, "odd_vertices": odd_vertices(g), "distance": dist}
    if g.n >= 3:
        coords = _op("decompose", decompose, proj, fundamental_cycle_basis(star_tree(g.n, 0)))
        extra["star_coordinates"] = io.coords_to_string(coords)
    return extra


COMMANDS = {
    "prior-summary": cmd_prior_summary,
    "mcmc-run": cmd_mcmc_run,
    "tree-union": cmd_tree_union,
    "bounds-experiment": cmd_bounds_experiment,
    "project": cmd_project,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = effective_config(args.command, args)
        out = Path(cfg["output_dir"])
        _op("create output directory", out.mkdir, parents=True, exist_ok=True)
        extra = COMMANDS[args.command](cfg, out)
        _op("write summary", _write_summary, out, args.command, cfg, start, extra)
    except OperationError as err:
        print(f"cyclespace {args.command}: {err}", file=sys.stderr)
        return err.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
