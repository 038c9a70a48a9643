"""Edge-recovery scores and network-structure summaries.

Modularity follows the degree-corrected form over ordered node pairs,

    M = 1/(2|E|) * sum_ij (A_ij - d_i d_j / (2|E|)) * [g_i == g_j],

and communities come from a deterministic two-phase local-move/aggregate
(Louvain) iteration at resolution 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RngStream, check_adjacency

#: minimum modularity gain counted as a strict improvement
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class EdgeMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    mcc: float

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "mcc": self.mcc,
        }


METRIC_FIELDS = ("tp", "fp", "fn", "tn", "precision", "recall", "f1", "mcc")


@dataclass(frozen=True)
class CommunityAssignment:
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise ValueError("labels must be a vector")
        uniq = np.unique(lab)
        if lab.size and not np.array_equal(uniq, np.arange(uniq.size)):
            raise ValueError("labels must cover [0, #communities)")
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def edge_metrics(a_hat: np.ndarray, a_star: np.ndarray) -> EdgeMetrics:
    """Confusion counts and rates over unordered pairs i < j.

    Zero-denominator conventions: precision/recall/F1 are 0 when their
    denominators vanish; MCC is 0 when any marginal factor vanishes.
    """
    a_hat = np.asarray(a_hat)
    a_star = np.asarray(a_star)
    if a_hat.shape != a_star.shape:
        raise ValueError("adjacency shapes differ")
    iu = np.triu_indices(a_hat.shape[0], 1)
    est = a_hat[iu] != 0
    tru = a_star[iu] != 0
    tp = int(np.count_nonzero(est & tru))
    fp = int(np.count_nonzero(est & ~tru))
    fn = int(np.count_nonzero(~est & tru))
    tn = int(np.count_nonzero(~est & ~tru))
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * tp, 2 * tp + fp + fn)
    denom2 = float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / np.sqrt(denom2) if denom2 > 0 else 0.0
    return EdgeMetrics(tp, fp, fn, tn, precision, recall, f1, float(mcc))


def modularity(a: np.ndarray, c: CommunityAssignment) -> float:
    """Degree-corrected within-community edge fraction, in [-1, 1]."""
    check_adjacency(a)
    a = np.asarray(a, dtype=np.float64)
    two_m = a.sum()
    if two_m == 0:
        raise ValueError("modularity is undefined on an empty graph")
    labels = c.labels
    if labels.shape[0] != a.shape[0]:
        raise ValueError("label vector length does not match graph order")
    same = labels[:, None] == labels[None, :]
    deg = a.sum(axis=1)
    expected = np.outer(deg, deg) / two_m
    return float(np.sum((a - expected)[same]) / two_m)


def _local_move_phase(m: np.ndarray, labels: np.ndarray) -> bool:
    """One repeated node-scan pass; first strictly improving move is taken.

    m follows the convention m[i, i] = twice the node's self-loop weight, so
    strengths and totals aggregate consistently. Returns whether any node
    moved.
    """
    nn = m.shape[0]
    strength = m.sum(axis=1)
    two_m = m.sum()
    sigma_tot = np.zeros(nn)
    for v in range(nn):
        sigma_tot[labels[v]] += strength[v]
    moved_any = False
    improved = True
    while improved:
        improved = False
        for v in range(nn):
            cur = labels[v]
            # weights from v to each community, excluding the self term
            k_vc = np.zeros(nn)
            for u in range(nn):
                if u != v and m[v, u] != 0.0:
                    k_vc[labels[u]] += m[v, u]
            base = k_vc[cur] - strength[v] * (sigma_tot[cur] - strength[v]) / two_m
            candidates = sorted(set(
                labels[u] for u in range(nn) if u != v and m[v, u] != 0.0
            ))
            for cand in candidates:
                if cand == cur:
                    continue
                gain = (k_vc[cand]
                        - strength[v] * sigma_tot[cand] / two_m) - base
                if gain > _GAIN_EPS:
                    sigma_tot[cur] -= strength[v]
                    sigma_tot[cand] += strength[v]
                    labels[v] = cand
                    improved = True
                    moved_any = True
                    break
    return moved_any


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Canonical labels in first-occurrence order."""
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def louvain(a: np.ndarray, rng: RngStream | None = None) -> CommunityAssignment:
    """Two-phase community detection at resolution 1.

    Nodes are scanned in index order and the first strictly improving move
    is taken, so the result is deterministic for a given node order; the
    ``rng`` argument is accepted for interface symmetry and unused. The
    returned assignment never scores below the all-singletons partition.
    """
    check_adjacency(a)
    if a.sum() == 0:
        raise ValueError("community detection needs at least one edge")
    p = a.shape[0]
    m = np.asarray(a, dtype=np.float64).copy()
    node_labels = np.arange(p)  # original node -> current community
    prev_q = modularity(a, CommunityAssignment(_relabel(node_labels)))
    while True:
        level_labels = _relabel(node_labels)
        n_comm = int(level_labels.max()) + 1
        # aggregate current communities into super-nodes
        agg = np.zeros((n_comm, n_comm))
        for i in range(p):
            for j in range(p):
                agg[level_labels[i], level_labels[j]] += m[i, j]
        labels = np.arange(n_comm)
        moved = _local_move_phase(agg, labels)
        if not moved:
            break
        node_labels = labels[level_labels]
        q = modularity(a, CommunityAssignment(_relabel(node_labels)))
        if q < prev_q - _GAIN_EPS:
            raise AssertionError("modularity decreased across a pass")
        prev_q = q
    return CommunityAssignment(_relabel(node_labels))


def degree_by_group(a: np.ndarray, groups) -> dict:
    """Median, quartiles and mean of node degrees within each group label."""
    check_adjacency(a)
    groups = list(groups)
    if len(groups) != a.shape[0]:
        raise ValueError("group vector length does not match graph order")
    deg = np.asarray(a).sum(axis=1)
    out = {}
    for label in sorted(set(groups), key=str):
        sel = deg[[g == label for g in groups]]
        q1, med, q3 = np.percentile(sel, [25, 50, 75])
        out[label] = {
            "count": int(sel.size),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "mean": float(sel.mean()),
        }
    return out


def partial_correlations(k: np.ndarray) -> np.ndarray:
    """Partial correlation matrix -K_ij / sqrt(K_ii K_jj), unit diagonal."""
    d = np.sqrt(np.diag(k))
    pc = -k / np.outer(d, d)
    np.fill_diagonal(pc, 1.0)
    return pc
