"""Command-line surface: simulate, fit, select, bench, metrics, fmri-analyze.

Every output file embeds the fully resolved configuration that produced it,
so any run can be reproduced from its own artifacts. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import _kernels
from .baselines import METHOD_NAMES, auto_fit, fit_glasso, fit_mb, \
    glasso_moment
from .bench import SCHEMA_VERSION, STREAM_GRAPH, emit_report, emit_timing, \
    replicate_dataset, run_benchmark
from .core import Dataset, ExperimentConfig, RngStream, read_dataset_csv, \
    write_dataset_csv
from .estimator import DropConfig, fit_drop
from .metrics import CommunityAssignment, degree_by_group, edge_metrics, \
    louvain, modularity, partial_correlations
from .selection import FitSettings, select_lambda
from .simgen import ContaminationSpec, GENERATOR_CONSTANTS, contaminate, \
    generate_graph

DISPLAY_THRESHOLD = 0.005


def _write_json(path, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=1)
    with open(path, "wb") as fh:
        fh.write((text + "\n").encode())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_matrix_csv(path, m: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.asarray(m):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix_csv(path) -> np.ndarray:
    return read_dataset_csv(path).values


def _edge_list(a: np.ndarray) -> list[list[int]]:
    iu = np.triu_indices(a.shape[0], 1)
    mask = np.asarray(a)[iu] != 0
    return [[int(i), int(j)] for i, j in
            zip(iu[0][mask], iu[1][mask])]


def _cmd_simulate(args) -> int:
    cfg = ExperimentConfig(
        graph_type=args.graph, p=args.p, n=args.n,
        contamination=args.contamination,
        contamination_rate=args.rate, replicates=1, seed=args.seed,
    )
    model = generate_graph(cfg.graph_type, cfg.p,
                           RngStream(cfg.seed, STREAM_GRAPH))
    data = replicate_dataset(cfg, model, args.replicate)
    write_dataset_csv(data, args.out + ".csv")
    _write_json(args.out + ".meta.json", {
        "schema_version": SCHEMA_VERSION,
        "config": {**cfg.to_dict(), "replicate": args.replicate},
        "generator_constants": GENERATOR_CONSTANTS,
        "k_star": model.k_star,
        "a_star": model.a_star,
    })
    return 0


def _fit_settings(args) -> FitSettings:
    grid = None
    if getattr(args, "lambdas", None):
        grid = tuple(float(t) for t in args.lambdas.split(","))
    return FitSettings(gamma_ebic=args.gamma_ebic, tol=args.tol,
                       max_sweeps=args.max_sweeps, lambda_grid=grid)


def _fit_once(data: Dataset, method: str, args):
    settings = _fit_settings(args)
    if args.auto or args.lam is None:
        return auto_fit(data, method, settings)
    if method == "drop":
        return fit_drop(data, DropConfig(
            args.lam, tol=args.tol, max_sweeps=args.max_sweeps,
            edge_threshold=args.edge_threshold))
    if method == "mb":
        from .core import FitResult
        a = fit_mb(data, args.lam)
        return FitResult(a=a, k=None, lam=args.lam, sweeps=1,
                         wall_time_s=0.0, converged=True, mse=None,
                         method="mb")
    moment, repaired = glasso_moment(data, method)
    fit = fit_glasso(moment, args.lam)
    fit.method = method
    fit.meta["repaired"] = repaired
    return fit


def _cmd_fit(args) -> int:
    data = read_dataset_csv(args.input)
    fit = _fit_once(data, args.method, args)
    config = {
        "input": args.input, "method": args.method,
        "lam": args.lam, "auto": bool(args.auto or args.lam is None),
        "gamma_ebic": args.gamma_ebic, "tol": args.tol,
        "max_sweeps": args.max_sweeps,
        "edge_threshold": args.edge_threshold,
    }
    if fit.k is not None:
        _write_matrix_csv(args.out + ".precision.csv", fit.k)
    _write_json(args.out + ".edges.json", {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "environment": {"kernel": _kernels.KERNEL_NAME},
        "method": fit.method,
        "lambda": fit.lam,
        "converged": fit.converged,
        "sweeps": fit.sweeps,
        "n_edges": fit.n_edges,
        "edges": _edge_list(fit.a),
        "meta": fit.meta,
    })
    return 0


def _cmd_select(args) -> int:
    data = read_dataset_csv(args.input)
    settings = _fit_settings(args)
    if args.method == "drop":
        fit, trace = select_lambda(data, cfg=settings)
    else:
        fit = auto_fit(data, args.method, settings)
        trace = None
    if fit.k is not None:
        _write_matrix_csv(args.out + ".precision.csv", fit.k)
    _write_json(args.out + ".selection.json", {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "input": args.input, "method": args.method,
            "gamma_ebic": args.gamma_ebic, "tol": args.tol,
            "max_sweeps": args.max_sweeps,
            "lambdas": getattr(args, "lambdas", None),
        },
        "environment": {"kernel": _kernels.KERNEL_NAME},
        "lambda": fit.lam,
        "n_edges": fit.n_edges,
        "converged": fit.converged,
        "trace": trace.to_dict() if trace is not None
                 else fit.meta.get("selection"),
    })
    return 0


def _cmd_bench(args) -> int:
    if args.from_config:
        with open(args.from_config, "rb") as fh:
            previous = json.loads(fh.read().decode())
        cfg = ExperimentConfig.from_dict(previous["config"])
        methods = previous["methods"]
    else:
        for name in ("graph", "p", "n"):
            if getattr(args, name) is None:
                print(f"bench: --{name} is required without --from-config",
                      file=sys.stderr)
                return 2
        grid = None
        if args.lambdas:
            grid = tuple(float(t) for t in args.lambdas.split(","))
        cfg = ExperimentConfig(
            graph_type=args.graph, p=args.p, n=args.n,
            contamination=args.contamination, contamination_rate=args.rate,
            replicates=args.replicates, seed=args.seed, lambda_grid=grid,
            gamma_ebic=args.gamma_ebic, time_limit_s=args.time_limit,
        )
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    workers = args.workers or int(os.environ.get("DROPGGM_WORKERS", "1"))
    report = run_benchmark(cfg, methods, workers=workers)
    with open(args.out, "wb") as fh:
        fh.write(emit_report(report, "json"))
    with open(args.out + ".timing.json", "wb") as fh:
        fh.write(emit_timing(report))
    if args.csv:
        with open(args.csv, "wb") as fh:
            fh.write(emit_report(report, "csv"))
    return 0


def _cmd_metrics(args) -> int:
    a_hat = _read_matrix_csv(args.estimated).astype(np.int8)
    a_star = _read_matrix_csv(args.truth).astype(np.int8)
    m = edge_metrics(a_hat, a_star)
    out = {
        "schema_version": SCHEMA_VERSION,
        "config": {"estimated": args.estimated, "truth": args.truth,
                   "louvain": bool(args.louvain)},
        "metrics": m.to_dict(),
    }
    if args.louvain and a_hat.sum() > 0:
        comm = louvain(a_hat)
        out["modularity"] = modularity(a_hat, comm)
        out["communities"] = comm.labels
    _write_json(args.out, out)
    return 0


def _read_labels_csv(path) -> dict[str, str]:
    import csv as _csv
    with open(path, "r", newline="") as fh:
        rows = [r for r in _csv.reader(fh) if r]
    if rows and rows[0] and rows[0][-1].strip().lower() in ("system", "group",
                                                            "label"):
        rows = rows[1:]
    out = {}
    for r in rows:
        if len(r) < 2:
            raise ValueError(f"{path}: need 'roi,system' rows")
        out[r[0].strip()] = r[1].strip()
    return out


def _display_graph(fit, threshold: float) -> np.ndarray:
    if fit.k is None:
        return np.asarray(fit.a, dtype=np.int8)
    pc = partial_correlations(fit.k)
    a = (np.abs(pc) > threshold).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def _cmd_fmri(args) -> int:
    series = read_dataset_csv(args.series)
    labels_map = _read_labels_csv(args.labels)
    roi_names = series.column_names or tuple(
        str(j) for j in range(series.p))
    missing = [r for r in roi_names if r not in labels_map]
    if missing:
        raise ValueError(f"labels file is missing ROI {missing[0]!r}")
    systems = [labels_map[r] for r in roi_names]

    if args.standardize:
        v = series.values
        sd = v.std(axis=0, ddof=0)
        if np.any(sd == 0):
            raise ValueError("constant ROI column; cannot standardize")
        series = series.with_values((v - v.mean(axis=0)) / sd)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    scenarios = [s.strip() for s in args.contaminations.split(",")
                 if s.strip()]
    settings = FitSettings(gamma_ebic=args.gamma_ebic, tol=args.tol,
                           max_sweeps=args.max_sweeps)

    os.makedirs(args.out_dir, exist_ok=True)
    results: dict = {}
    for method in methods:
        results[method] = {}
        for si, scenario in enumerate(scenarios):
            spec = ContaminationSpec(scheme=scenario, rate=args.rate)
            data, _ = contaminate(series, spec,
                                  RngStream(args.seed).child(si))
            fit = auto_fit(data, method, settings)
            disp = _display_graph(fit, args.display_threshold)
            n_disp = int(disp[np.triu_indices(series.p, 1)].sum())
            entry = {
                "edges": n_disp,
                "support_edges": fit.n_edges,
                "lambda": fit.lam,
                "converged": fit.converged,
                "modularity": None,
                "n_communities": None,
                "degrees": degree_by_group(disp, systems),
            }
            if n_disp > 0:
                comm = louvain(disp)
                entry["modularity"] = modularity(disp, comm)
                entry["n_communities"] = comm.n_communities
            results[method][scenario] = entry

    config = {
        "series": args.series, "labels": args.labels,
        "methods": methods, "contaminations": scenarios,
        "rate": args.rate, "seed": args.seed,
        "display_threshold": args.display_threshold,
        "standardize": bool(args.standardize),
        "gamma_ebic": args.gamma_ebic, "tol": args.tol,
        "max_sweeps": args.max_sweeps,
    }
    _write_json(os.path.join(args.out_dir, "summary.json"), {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "environment": {"kernel": _kernels.KERNEL_NAME},
        "results": results,
    })
    with open(os.path.join(args.out_dir, "edge_counts.csv"), "w") as fh:
        fh.write("method,scenario,edges,modularity\n")
        for method in methods:
            for scenario in scenarios:
                e = results[method][scenario]
                mod = "" if e["modularity"] is None else repr(e["modularity"])
                fh.write(f"{method},{scenario},{e['edges']},{mod}\n")
    with open(os.path.join(args.out_dir, "degrees.csv"), "w") as fh:
        fh.write("method,scenario,system,count,median,q1,q3,mean\n")
        for method in methods:
            for scenario in scenarios:
                for system, s in results[method][scenario]["degrees"].items():
                    fh.write(
                        f"{method},{scenario},{system},{s['count']},"
                        f"{repr(s['median'])},{repr(s['q1'])},"
                        f"{repr(s['q3'])},{repr(s['mean'])}\n")
    return 0


def _add_fit_flags(sub) -> None:
    sub.add_argument("--gamma-ebic", dest="gamma_ebic", type=float,
                     default=0.5)
    sub.add_argument("--tol", type=float, default=1e-4)
    sub.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=100)
    sub.add_argument("--lambdas", default=None,
                     help="comma-separated decreasing penalty grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dropggm",
        description="Robust sparse precision-matrix estimation toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="write a synthetic dataset + truth")
    sim.add_argument("--graph", required=True,
                     choices=("band", "hub", "cluster", "random", "scalefree"))
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--contamination", default="clean",
                     choices=("clean", "cauchy", "leverage"))
    sim.add_argument("--rate", type=float, default=0.1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replicate", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(fn=_cmd_simulate)

    fit = subs.add_parser("fit", help="fit one estimator to a CSV dataset")
    fit.add_argument("--input", required=True)
    fit.add_argument("--method", default="drop", choices=METHOD_NAMES)
    fit.add_argument("--lam", type=float, default=None)
    fit.add_argument("--auto", action="store_true",
                     help="pick the penalty by the information criterion")
    fit.add_argument("--edge-threshold", dest="edge_threshold", type=float,
                     default=1e-6)
    _add_fit_flags(fit)
    fit.add_argument("--out", required=True)
    fit.set_defaults(fn=_cmd_fit)

    sel = subs.add_parser("select", help="penalty-path selection with trace")
    sel.add_argument("--input", required=True)
    sel.add_argument("--method", default="drop", choices=METHOD_NAMES)
    _add_fit_flags(sel)
    sel.add_argument("--out", required=True)
    sel.set_defaults(fn=_cmd_select)

    ben = subs.add_parser("bench", help="Monte Carlo benchmark")
    ben.add_argument("--graph",
                     choices=("band", "hub", "cluster", "random", "scalefree"))
    ben.add_argument("--p", type=int)
    ben.add_argument("--n", type=int)
    ben.add_argument("--contamination", default="clean",
                     choices=("clean", "cauchy", "leverage"))
    ben.add_argument("--rate", type=float, default=0.1)
    ben.add_argument("--replicates", type=int, default=1)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--methods", default="drop")
    ben.add_argument("--gamma-ebic", dest="gamma_ebic", type=float,
                     default=0.5)
    ben.add_argument("--time-limit", dest="time_limit", type=float,
                     default=60.0)
    ben.add_argument("--lambdas", default=None)
    ben.add_argument("--from-config", dest="from_config", default=None,
                     help="rerun the configuration embedded in a report")
    ben.add_argument("--workers", type=int, default=None)
    ben.add_argument("--csv", default=None)
    ben.add_argument("--out", required=True)
    ben.set_defaults(fn=_cmd_bench)

    met = subs.add_parser("metrics", help="edge-recovery metrics")
    met.add_argument("--estimated", required=True)
    met.add_argument("--truth", required=True)
    met.add_argument("--louvain", action="store_true")
    met.add_argument("--out", required=True)
    met.set_defaults(fn=_cmd_metrics)

    fmri = subs.add_parser("fmri-analyze",
                           help="network analysis of ROI time series")
    fmri.add_argument("--series", required=True)
    fmri.add_argument("--labels", required=True)
    fmri.add_argument("--methods", default="drop")
    fmri.add_argument("--contaminations", default="clean")
    fmri.add_argument("--rate", type=float, default=0.1)
    fmri.add_argument("--seed", type=int, default=0)
    fmri.add_argument("--display-threshold", dest="display_threshold",
                      type=float, default=DISPLAY_THRESHOLD)
    fmri.add_argument("--no-standardize", dest="standardize",
                      action="store_false")
    _add_fit_flags(fmri)
    fmri.add_argument("--out-dir", dest="out_dir", required=True)
    fmri.set_defaults(fn=_cmd_fmri)

    return parser


def parse_and_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"dropggm: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))
