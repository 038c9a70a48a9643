"""Robust sparse precision-matrix estimation and benchmark toolkit."""

from ._kernels import COMPILED, KERNEL_NAME
from .baselines import BaselineSpec, auto_fit, fit_glasso, fit_mb, \
    fit_rank_glasso
from .bench import BenchmarkReport, ReplicateRecord, emit_report, \
    emit_timing, run_benchmark
from .core import Dataset, Deadline, ExperimentConfig, FitResult, \
    FitTimeout, RngStream, center_columns, empirical_covariance, \
    read_dataset_csv, write_dataset_csv
from .estimator import DropConfig, DropState, adaptive_weights, \
    coordinate_update, drop_objective, duality_probe, fit_drop, \
    fit_single_task_drop, node_mse, robust_init
from .metrics import CommunityAssignment, EdgeMetrics, degree_by_group, \
    edge_metrics, louvain, modularity
from .selection import FitSettings, SelectionError, SelectionTrace, \
    default_grid, ebic_score, select_lambda
from .simgen import ContaminationSpec, GroundTruthModel, contaminate, \
    generate_graph, sample_gaussian
from .transform import RankCorrelationMatrix, kendall_skeptic, \
    normal_quantile, npn_transform, spearman_skeptic

__version__ = "0.1.0"
