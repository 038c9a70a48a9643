"""Seeded Monte Carlo benchmark: generate, contaminate, fit, score, aggregate.

One ground-truth model is drawn per configuration; every replicate redraws
the data and contamination from its own disjoint random streams, so records
are reproducible independently of execution order or worker count.

Reports are emitted in two parts: a deterministic results file (bitwise
reproducible from its embedded configuration) and a separate timing sidecar
holding wall-clock measurements.
"""

from __future__ import annotations

import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .baselines import METHOD_NAMES, auto_fit
from .core import Dataset, Deadline, ExperimentConfig, FitTimeout, RngStream
from .metrics import EdgeMetrics, METRIC_FIELDS, edge_metrics
from .selection import SelectionError
from .simgen import ContaminationSpec, GENERATOR_CONSTANTS, GroundTruthModel, \
    contaminate, generate_graph, sample_gaussian

SCHEMA_VERSION = 1

# stream-id layout: 0 draws the graph, each replicate r owns ids
# REPLICATE_BASE + REPLICATE_STRIDE*r + {0: sampling, 1: contamination}
STREAM_GRAPH = 0
REPLICATE_BASE = 16
REPLICATE_STRIDE = 4


@dataclass
class ReplicateRecord:
    replicate_id: int
    method: str
    metrics: EdgeMetrics | None
    wall_time_s: float
    converged: bool
    timed_out: bool

    @property
    def success(self) -> bool:
        return self.metrics is not None


@dataclass
class BenchmarkReport:
    config: ExperimentConfig
    methods: list[str]
    records: list[ReplicateRecord]
    per_method: dict = field(default_factory=dict)


def sample_stream(seed: int, replicate: int) -> RngStream:
    return RngStream(seed, REPLICATE_BASE + REPLICATE_STRIDE * replicate)


def contamination_stream(seed: int, replicate: int) -> RngStream:
    return RngStream(seed, REPLICATE_BASE + REPLICATE_STRIDE * replicate + 1)


def _contamination_spec(cfg: ExperimentConfig) -> ContaminationSpec:
    return ContaminationSpec(scheme=cfg.contamination,
                             rate=cfg.contamination_rate)


def replicate_dataset(cfg: ExperimentConfig, model: GroundTruthModel,
                      replicate: int) -> Dataset:
    """The exact dataset (post contamination) a replicate fits on."""
    data = sample_gaussian(model, cfg.n, sample_stream(cfg.seed, replicate))
    data, _ = contaminate(data, _contamination_spec(cfg),
                          contamination_stream(cfg.seed, replicate),
                          sigma=model.sigma)
    return data


def _run_one(cfg: ExperimentConfig, model: GroundTruthModel, replicate: int,
             methods, registry) -> list[ReplicateRecord]:
    data = replicate_dataset(cfg, model, replicate)
    records = []
    for method in methods:
        fit_fn = registry[method]
        deadline = Deadline.after(cfg.time_limit_s)
        t0 = time.perf_counter()
        converged = False
        timed_out = False
        fit = None
        try:
            fit = fit_fn(data, cfg, deadline)
            converged = fit.converged
        except FitTimeout:
            timed_out = True
        except (SelectionError, np.linalg.LinAlgError, ValueError):
            pass  # recorded as a failed replicate, never raised
        wall = time.perf_counter() - t0
        metrics = edge_metrics(fit.a, model.a_star) \
            if (fit is not None and converged) else None
        records.append(ReplicateRecord(replicate, method, metrics, wall,
                                       converged, timed_out))
    return records


def _run_one_star(args):
    cfg_dict, replicate, methods = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    model = generate_graph(cfg.graph_type, cfg.p,
                           RngStream(cfg.seed, STREAM_GRAPH))
    return _run_one(cfg, model, replicate, methods, _default_registry())


def _default_registry() -> dict:
    return {name: _make_auto(name) for name in METHOD_NAMES}


def _make_auto(method: str):
    def fit_fn(data, cfg, deadline):
        return auto_fit(data, method, cfg, deadline)
    return fit_fn


def aggregate(records: list[ReplicateRecord], methods, replicates: int) -> dict:
    per_method = {}
    for method in methods:
        rows = [r for r in records if r.method == method]
        good = [r for r in rows if r.success]
        summary = {"success_rate": len(good) / replicates, "metrics": {}}
        for name in METRIC_FIELDS:
            vals = np.array([getattr(r.metrics, name) for r in good],
                            dtype=np.float64)
            if vals.size:
                se = float(vals.std(ddof=1) / np.sqrt(vals.size)) \
                    if vals.size > 1 else 0.0
                summary["metrics"][name] = {"mean": float(vals.mean()),
                                            "se": se}
            else:
                summary["metrics"][name] = {"mean": None, "se": None}
        per_method[method] = summary
    return per_method


def run_benchmark(cfg: ExperimentConfig, methods, registry=None,
                  workers: int = 1) -> BenchmarkReport:
    """Execute the full replicate-by-method grid for one configuration.

    Failures and timeouts become records, never exceptions. ``registry``
    maps method name to ``fn(data, cfg, deadline) -> FitResult`` and
    defaults to the built-in estimators; custom registries require
    ``workers=1`` because worker processes rebuild the default one.
    """
    methods = list(methods)
    unknown = [m for m in methods if registry is None and m not in METHOD_NAMES]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}")
    if registry is not None and workers != 1:
        raise ValueError("custom registries require workers=1")
    records: list[ReplicateRecord] = []
    if workers > 1:
        jobs = [(cfg.to_dict(), r, methods) for r in range(cfg.replicates)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_run_one_star, jobs):
                records.extend(batch)
    else:
        reg = registry if registry is not None else _default_registry()
        model = generate_graph(cfg.graph_type, cfg.p,
                               RngStream(cfg.seed, STREAM_GRAPH))
        for r in range(cfg.replicates):
            records.extend(_run_one(cfg, model, r, methods, reg))
    records.sort(key=lambda rec: (rec.replicate_id, rec.method))
    per_method = aggregate(records, methods, cfg.replicates)
    return BenchmarkReport(cfg, methods, records, per_method)


def report_to_dict(report: BenchmarkReport) -> dict:
    """Deterministic representation: no wall-clock fields."""
    return {
        "schema_version": SCHEMA_VERSION,
        "config": report.config.to_dict(),
        "methods": list(report.methods),
        "generator_constants": dict(GENERATOR_CONSTANTS),
        "environment": {"kernel": _kernels.KERNEL_NAME},
        "records": [
            {
                "replicate": r.replicate_id,
                "method": r.method,
                "converged": r.converged,
                "timed_out": r.timed_out,
                "metrics": r.metrics.to_dict() if r.metrics else None,
            }
            for r in report.records
        ],
        "per_method": report.per_method,
    }


def report_from_dict(d: dict) -> BenchmarkReport:
    records = [
        ReplicateRecord(
            rec["replicate"], rec["method"],
            EdgeMetrics(**rec["metrics"]) if rec["metrics"] else None,
            0.0, rec["converged"], rec["timed_out"])
        for rec in d["records"]
    ]
    return BenchmarkReport(ExperimentConfig.from_dict(d["config"]),
                           list(d["methods"]), records, d["per_method"])


def emit_report(report: BenchmarkReport, fmt: str = "json") -> bytes:
    """Serialize the deterministic part of a report as JSON or CSV."""
    if fmt == "json":
        text = json.dumps(report_to_dict(report), sort_keys=True, indent=1)
        return (text + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    buf.write("method,metric,mean,se,success_rate\n")
    for method in report.methods:
        summary = report.per_method[method]
        for name in METRIC_FIELDS:
            m = summary["metrics"][name]
            mean = "" if m["mean"] is None else repr(m["mean"])
            se = "" if m["se"] is None else repr(m["se"])
            buf.write(f"{method},{name},{mean},{se},"
                      f"{repr(summary['success_rate'])}\n")
    return buf.getvalue().encode()


def emit_timing(report: BenchmarkReport) -> bytes:
    """Wall-clock sidecar; intentionally separate from the reproducible
    report."""
    rows = [
        {"replicate": r.replicate_id, "method": r.method,
         "wall_time_s": r.wall_time_s}
        for r in report.records
    ]
    text = json.dumps({"schema_version": SCHEMA_VERSION, "timing": rows},
                      sort_keys=True, indent=1)
    return (text + "\n").encode()
