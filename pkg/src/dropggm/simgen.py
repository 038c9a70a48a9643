"""Ground-truth graph generation, Gaussian sampling, and row contamination.

The precision matrix is built from the adjacency as
K* = EDGE_WEIGHT * A + (|lambda_min(EDGE_WEIGHT * A)| + 0.1 + DIAG_U) * I,
which shifts the spectrum strictly above zero. All generator constants are
exported so output files can be self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, GRAPH_TYPES, RngStream

EDGE_WEIGHT = 0.3
DIAG_U = 0.1
RANDOM_EDGE_PROB = 0.1
CLUSTER_WITHIN_PROB = 0.3
HUB_GROUP_DIVISOR = 10
SCALEFREE_EDGES_PER_NODE = 1

GENERATOR_CONSTANTS = {
    "edge_weight": EDGE_WEIGHT,
    "diag_shift": 0.1 + DIAG_U,
    "random_edge_prob": RANDOM_EDGE_PROB,
    "cluster_within_prob": CLUSTER_WITHIN_PROB,
    "hub_group_divisor": HUB_GROUP_DIVISOR,
    "scalefree_edges_per_node": SCALEFREE_EDGES_PER_NODE,
}


@dataclass(frozen=True)
class GroundTruthModel:
    """True precision matrix, its support, and the implied covariance."""

    k_star: np.ndarray
    a_star: np.ndarray
    sigma: np.ndarray
    graph_type: str

    def __post_init__(self):
        for name in ("k_star", "a_star", "sigma"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class ContaminationSpec:
    scheme: str = "clean"
    rate: float = 0.1
    cauchy_scale: float = 5.0
    leverage_factor: float = 100.0

    def __post_init__(self):
        if self.scheme not in ("clean", "cauchy", "leverage"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (0.0 <= self.rate <= 0.5):
            raise ValueError("contamination rate must lie in [0, 0.5]")
        if self.cauchy_scale <= 0 or self.leverage_factor <= 0:
            raise ValueError("contamination scales must be positive")


def _groups(p: int) -> list[np.ndarray]:
    g = max(1, round(p / HUB_GROUP_DIVISOR))
    return np.array_split(np.arange(p), g)


def _band_adjacency(p: int) -> np.ndarray:
    a = np.zeros((p, p), dtype=np.int8)
    for i in range(p):
        for j in range(i + 1, min(i + 3, p)):
            a[i, j] = a[j, i] = 1
    return a


def _hub_adjacency(p: int) -> np.ndarray:
    a = np.zeros((p, p), dtype=np.int8)
    for grp in _groups(p):
        hub = grp[0]
        for v in grp[1:]:
            a[hub, v] = a[v, hub] = 1
    return a


def _cluster_adjacency(p: int, rng: np.random.Generator) -> np.ndarray:
    a = np.zeros((p, p), dtype=np.int8)
    for grp in _groups(p):
        for ii in range(len(grp)):
            for jj in range(ii + 1, len(grp)):
                if rng.random() < CLUSTER_WITHIN_PROB:
                    a[grp[ii], grp[jj]] = a[grp[jj], grp[ii]] = 1
    return a


def _random_adjacency(p: int, rng: np.random.Generator) -> np.ndarray:
    a = np.zeros((p, p), dtype=np.int8)
    for i in range(p):
        for j in range(i + 1, p):
            if rng.random() < RANDOM_EDGE_PROB:
                a[i, j] = a[j, i] = 1
    return a


def _scalefree_adjacency(p: int, rng: np.random.Generator) -> np.ndarray:
    # preferential attachment, one edge per incoming node (a tree)
    a = np.zeros((p, p), dtype=np.int8)
    # each edge contributes both endpoints, so sampling from this list is
    # degree-proportional; node 0 seeds the list to anchor the first pick
    endpoints = [0]
    for v in range(1, p):
        target = endpoints[rng.integers(0, len(endpoints))]
        a[v, target] = a[target, v] = 1
        endpoints.extend((v, target))
    return a


def precision_from_adjacency(a: np.ndarray) -> np.ndarray:
    """Positive definite K* from an adjacency via spectral shift."""
    base = EDGE_WEIGHT * a.astype(np.float64)
    lam_min = np.linalg.eigvalsh(base)[0]
    k = base + (abs(lam_min) + 0.1 + DIAG_U) * np.eye(a.shape[0])
    return (k + k.T) / 2.0


def generate_graph(graph_type: str, p: int, rng: RngStream) -> GroundTruthModel:
    """Draw the true structure and its precision/covariance pair."""
    if graph_type not in GRAPH_TYPES:
        raise ValueError(f"unknown graph type {graph_type!r}")
    if p < 4:
        raise ValueError("need p >= 4")
    gen = rng.generator()
    if graph_type == "band":
        a = _band_adjacency(p)
    elif graph_type == "hub":
        a = _hub_adjacency(p)
    elif graph_type == "cluster":
        a = _cluster_adjacency(p, gen)
    elif graph_type == "random":
        a = _random_adjacency(p, gen)
    else:
        a = _scalefree_adjacency(p, gen)
    k = precision_from_adjacency(a)
    # SPD solve for the covariance; also certifies positive definiteness
    chol = np.linalg.cholesky(k)
    inv_chol = np.linalg.solve(chol, np.eye(p))
    sigma = inv_chol.T @ inv_chol
    sigma = (sigma + sigma.T) / 2.0
    return GroundTruthModel(k, a, sigma, graph_type)


def sample_gaussian(model: GroundTruthModel, n: int, rng: RngStream) -> Dataset:
    """n i.i.d. rows from N(0, sigma) via the Cholesky factor."""
    try:
        chol = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError as e:
        raise ValueError("covariance is not positive definite") from e
    z = rng.generator().standard_normal((n, model.sigma.shape[0]))
    return Dataset(z @ chol.T)


def cauchy_perturbation(u, scale: float):
    """Inverse-CDF map from uniform draws to Cauchy(0, scale) noise."""
    return scale * np.tan(np.pi * (np.asarray(u) - 0.5))


def contaminate(d: Dataset, spec: ContaminationSpec, rng: RngStream,
                sigma: np.ndarray | None = None):
    """Replace round(rate * n) randomly chosen rows per the scheme.

    cauchy adds per-coordinate Cauchy(0, cauchy_scale) noise; leverage
    redraws rows from N(0, leverage_factor * sigma). ``sigma`` defaults to
    the empirical covariance of the centered data, so the scheme applies to
    datasets without a known truth. Returns the new dataset and the sorted
    contaminated row indices.
    """
    n = d.n
    n_bad = int(round(spec.rate * n))
    if n_bad > n:
        raise ValueError("contaminated row count exceeds n")
    if spec.scheme == "clean" or n_bad == 0:
        return d, np.array([], dtype=np.int64)
    gen = rng.generator()
    idx = np.sort(gen.choice(n, size=n_bad, replace=False))
    values = d.values.copy()
    if spec.scheme == "cauchy":
        u = gen.random((n_bad, d.p))
        values[idx] += cauchy_perturbation(u, spec.cauchy_scale)
    else:
        if sigma is None:
            centered = d.values - d.values.mean(axis=0, keepdims=True)
            sigma = centered.T @ centered / n
        chol = np.linalg.cholesky(spec.leverage_factor * sigma)
        z = gen.standard_normal((n_bad, d.p))
        values[idx] = z @ chol.T
    return d.with_values(values), idx
