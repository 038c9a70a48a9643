"""Core value types, deterministic RNG streams, and dataset I/O.

Everything here is immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, asdict

import numpy as np

GRAPH_TYPES = ("band", "hub", "cluster", "random", "scalefree")
CONTAMINATION_SCHEMES = ("clean", "cauchy", "leverage")

#: absolute tolerance for symmetry checks; violations are programming errors
SYMMETRY_TOL = 1e-12


class FitTimeout(Exception):
    """Raised inside fit loops when a cooperative deadline expires."""


@dataclass(frozen=True)
class Deadline:
    """Wall-clock budget, polled between sweeps / outer passes.

    A fit that observes an expired deadline raises :class:`FitTimeout` at the
    next poll point, so overshoot is bounded by one sweep's duration.
    """

    t_end: float

    @classmethod
    def after(cls, seconds: float) -> "Deadline":
        return cls(time.monotonic() + float(seconds))

    def expired(self) -> bool:
        return time.monotonic() >= self.t_end

    def check(self) -> None:
        if self.expired():
            raise FitTimeout("time limit exceeded")


@dataclass(frozen=True)
class Dataset:
    """An n x p observation matrix; rows are samples, columns are variables."""

    values: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ValueError("dataset values must form a 2-d matrix")
        n, p = v.shape
        if n < 2 or p < 2:
            raise ValueError(f"dataset needs n >= 2 and p >= 2, got {n}x{p}")
        if not np.all(np.isfinite(v)):
            raise ValueError("dataset contains non-finite entries")
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != p:
                raise ValueError(
                    f"got {len(names)} column names for {p} columns"
                )
            object.__setattr__(self, "column_names", names)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "Dataset":
        return Dataset(values, self.column_names)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Distinct (seed, stream_id) pairs index independent Philox streams, so
    parallel replicates can draw without coordination while staying
    bit-reproducible across runs and platforms.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must fit in 64 unsigned bits")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, k: int) -> "RngStream":
        """Derived stream; k < 2**16 per level keeps ids collision-free."""
        if not (0 <= k < 2**16):
            raise ValueError("child index out of range")
        return RngStream(self.seed, (self.stream_id * 2**16 + k + 1) % 2**64)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulation scenario.

    ``lambda_grid=None`` requests the per-method data-driven default grid.
    """

    graph_type: str
    p: int
    n: int
    contamination: str = "clean"
    contamination_rate: float = 0.1
    replicates: int = 1
    seed: int = 0
    lambda_grid: tuple[float, ...] | None = None
    tol: float = 1e-4
    max_sweeps: int = 100
    gamma_ebic: float = 0.5
    time_limit_s: float = 60.0

    def __post_init__(self):
        if self.graph_type not in GRAPH_TYPES:
            raise ValueError(f"unknown graph type {self.graph_type!r}")
        if self.contamination not in CONTAMINATION_SCHEMES:
            raise ValueError(f"unknown contamination {self.contamination!r}")
        if self.p < 4 or self.n < 2:
            raise ValueError("need p >= 4 and n >= 2")
        if not (0.0 <= self.contamination_rate <= 1.0):
            raise ValueError("contamination_rate must lie in [0, 1]")
        if round(self.contamination_rate * self.n) < 0:
            raise ValueError("contaminated row count must be >= 0")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not (0.0 <= self.gamma_ebic <= 1.0):
            raise ValueError("gamma_ebic must lie in [0, 1]")
        if self.tol <= 0 or self.max_sweeps < 1 or self.time_limit_s <= 0:
            raise ValueError("tol, max_sweeps, time_limit_s must be positive")
        if self.lambda_grid is not None:
            grid = tuple(float(g) for g in self.lambda_grid)
            if len(grid) == 0:
                raise ValueError("lambda_grid must be nonempty when given")
            if any(g <= 0 for g in grid):
                raise ValueError("lambda_grid entries must be positive")
            if any(a <= b for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda_grid must be strictly decreasing")
            object.__setattr__(self, "lambda_grid", grid)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["lambda_grid"] is not None:
            d["lambda_grid"] = list(d["lambda_grid"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.get("lambda_grid") is not None:
            d["lambda_grid"] = tuple(d["lambda_grid"])
        return cls(**d)


@dataclass
class FitResult:
    """Outcome of fitting one estimator at one regularization level.

    ``k`` is None for support-only estimators (neighborhood selection).
    ``mse`` holds the nodewise mean squared errors at the solution, against
    the data (or second-moment matrix) the method actually consumed.
    """

    a: np.ndarray
    k: np.ndarray | None
    lam: float
    sweeps: int
    wall_time_s: float
    converged: bool
    mse: np.ndarray | None = None
    method: str = "drop"
    meta: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        p = self.a.shape[0]
        iu = np.triu_indices(p, 1)
        return int(np.count_nonzero(self.a[iu]))


def center_columns(d: Dataset) -> Dataset:
    """Subtract each column's empirical mean. Idempotent."""
    v = d.values - d.values.mean(axis=0, keepdims=True)
    return d.with_values(v)


def empirical_covariance(d: Dataset) -> np.ndarray:
    """S = X'X / n for column-centered data; symmetrized exactly."""
    x = d.values
    s = x.T @ x / d.n
    return (s + s.T) / 2.0


def check_precision_matrix(k: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    k = np.asarray(k)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("precision matrix must be square")
    if np.max(np.abs(k - k.T)) > tol:
        raise ValueError("precision matrix is not symmetric")
    if np.any(np.diag(k) <= 0):
        raise ValueError("precision matrix diagonal must be positive")


def check_adjacency(a: np.ndarray) -> None:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ValueError("adjacency diagonal must be zero")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")


def adjacency_from_precision(k: np.ndarray, threshold: float) -> np.ndarray:
    a = (np.abs(k) > threshold).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def _parse_float(token: str) -> float:
    # float() is locale-independent: decimal point only.
    return float(token)


def read_dataset_csv(path) -> Dataset:
    """Read a dataset from CSV; a non-numeric first row is taken as header."""
    with open(path, "r", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    names = None
    try:
        [_parse_float(t) for t in rows[0]]
    except ValueError:
        names = tuple(t.strip() for t in rows[0])
        rows = rows[1:]
    data = [[_parse_float(t) for t in r] for r in rows]
    return Dataset(np.array(data, dtype=np.float64), names)


def write_dataset_csv(d: Dataset, path) -> None:
    """Write a dataset as CSV; floats use shortest round-trip formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if d.column_names is not None:
            w.writerow(d.column_names)
        for row in d.values:
            w.writerow([repr(float(v)) for v in row])
