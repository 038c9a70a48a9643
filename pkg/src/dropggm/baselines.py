"""Comparison estimators: graphical lasso, neighborhood selection, and
rank-transform variants, all run through the same score-based selector and
edge threshold as the robust estimator.

The graphical lasso follows the block coordinate dual: cycle over columns of
the working covariance W (= S + lam on the diagonal), solving each column's
l1 subproblem by coordinate descent. W stays positive definite throughout,
which is checked by factorization once per outer pass; the recovered
precision matrix is its inverse.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Dataset, Deadline, FitResult, adjacency_from_precision, \
    center_columns, empirical_covariance
from .selection import SelectionError, SelectionTrace, _select_over_grid, \
    default_grid, ebic_parts, select_lambda
from .transform import kendall_skeptic, npn_transform, spearman_skeptic

METHOD_NAMES = ("drop", "glasso", "mb", "npn_glasso", "kendall_glasso",
                "spearman_glasso")

#: eigenvalue floor applied to indefinite rank-correlation inputs
SKEPTIC_EIG_FLOOR = 1e-4

GLASSO_INNER_TOL = 1e-6
GLASSO_OUTER_TOL = 1e-4
EDGE_THRESHOLD = 1e-6


@dataclass(frozen=True)
class BaselineSpec:
    method: str
    lambda_grid: tuple[float, ...] | None = None
    selection: str = "ebic"

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.method!r}")
        if self.selection not in ("ebic", "fixed"):
            raise ValueError("selection must be 'ebic' or 'fixed'")
        if self.lambda_grid is not None:
            grid = tuple(float(g) for g in self.lambda_grid)
            if any(g <= 0 for g in grid) or \
                    any(a <= b for a, b in zip(grid, grid[1:])):
                raise ValueError("grid must be positive, strictly decreasing")
            object.__setattr__(self, "lambda_grid", grid)


def _moment_mse(k: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Nodewise MSEs implied by K against a second-moment matrix s ~ X'X/n."""
    quad = np.einsum("ij,ji->i", k @ s, k)
    return np.maximum(quad, 0.0) / np.diag(k) ** 2


def fit_glasso(s: np.ndarray, lam: float, tol: float = GLASSO_OUTER_TOL,
               inner_tol: float = GLASSO_INNER_TOL, max_outer: int = 100,
               deadline: Deadline | None = None) -> FitResult:
    """l1-penalized Gaussian likelihood solution for a covariance matrix.

    All entries are penalized, so the working covariance carries S_ii + lam
    on the diagonal. Non-convergence within ``max_outer`` passes is flagged
    on the result rather than raised.
    """
    t_start = time.perf_counter()
    s = np.asarray(s, dtype=np.float64)
    if np.max(np.abs(s - s.T)) > 1e-10:
        raise ValueError("covariance input must be symmetric")
    if np.any(np.diag(s) <= 0):
        raise ValueError("covariance diagonal must be positive")
    if lam <= 0:
        raise ValueError("lam must be positive")
    p = s.shape[0]
    w = s.copy()
    w[np.diag_indices(p)] += lam
    betas = np.zeros((p, p - 1))
    off = np.abs(s[np.triu_indices(p, 1)])
    scale = max(float(off.mean()) if off.size else 0.0, 1e-12)

    converged = False
    pd_ok = True
    outer = 0
    for outer in range(1, max_outer + 1):
        if deadline is not None:
            deadline.check()
        change = 0.0
        for j in range(p):
            idx = np.arange(p) != j
            q = np.ascontiguousarray(w[np.ix_(idx, idx)])
            b = np.ascontiguousarray(s[idx, j])
            beta = betas[j]
            _kernels.lasso_cd_gram(q, b, lam, beta, inner_tol, 1000)
            w12 = q @ beta
            change += float(np.abs(w[idx, j] - w12).sum())
            w[idx, j] = w12
            w[j, idx] = w12
        try:
            np.linalg.cholesky(w)
        except np.linalg.LinAlgError:
            pd_ok = False
            break
        n_off = p * (p - 1)
        if change / max(n_off, 1) < tol * scale:
            converged = True
            break

    k = np.empty((p, p))
    for j in range(p):
        idx = np.arange(p) != j
        kjj = 1.0 / (w[j, j] - float(w[idx, j] @ betas[j]))
        k[j, j] = kjj
        k[idx, j] = -betas[j] * kjj
    k = (k + k.T) / 2.0
    return FitResult(
        a=adjacency_from_precision(k, EDGE_THRESHOLD), k=k, lam=lam,
        sweeps=outer, wall_time_s=time.perf_counter() - t_start,
        converged=converged and pd_ok, mse=_moment_mse(k, s),
        method="glasso", meta={"pd_ok": pd_ok},
    )


def _refit_mse_one(gram, i, support, n):
    if support.size == 0:
        return gram[i, i] / n
    q = gram[np.ix_(support, support)]
    b = gram[support, i]
    coef, *_ = np.linalg.lstsq(q, b, rcond=None)
    return max(gram[i, i] - b @ coef, 0.0) / n


def _mb_node_path(gram, i, n, grid, deadline):
    """Lasso path for one node over the shared grid, warm-started coarse to
    fine. Returns per-lambda (beta, mse, support size, converged)."""
    p = gram.shape[0]
    idx = np.arange(p) != i
    q = np.ascontiguousarray(gram[np.ix_(idx, idx)])
    b = np.ascontiguousarray(gram[idx, i])
    beta = np.zeros(p - 1)
    out = []
    for lam in grid:
        if deadline is not None:
            deadline.check()
        iters = _kernels.lasso_cd_gram(q, b, n * lam / 2.0, beta, 1e-8, 1000)
        mse = float(gram[i, i] - 2.0 * beta @ b + beta @ q @ beta) / n
        out.append((beta.copy(), max(mse, 0.0), int(np.count_nonzero(beta)),
                    iters < 1000))
    return out


def fit_mb(d: Dataset, lam: float, deadline: Deadline | None = None,
           return_betas: bool = False):
    """Neighborhood selection at a single penalty level.

    Regresses every column on the rest with an l1 penalty and declares edge
    (i, j) only when both directions are nonzero (the AND rule).
    """
    d = center_columns(d)
    x = d.values
    gram = x.T @ x
    gram = (gram + gram.T) / 2.0
    p = d.p
    betas = np.zeros((p, p - 1))
    nonzero = np.zeros((p, p), dtype=bool)
    for i in range(p):
        path = _mb_node_path(gram, i, d.n, [lam], deadline)
        beta = path[0][0]
        betas[i] = beta
        cols = np.flatnonzero(np.arange(p) != i)
        nonzero[i, cols[beta != 0]] = True
    a = (nonzero & nonzero.T).astype(np.int8)
    np.fill_diagonal(a, 0)
    if return_betas:
        return a, betas
    return a


def mb_auto(d: Dataset, cfg, deadline: Deadline | None = None) -> FitResult:
    """Neighborhood selection with per-node score-based penalty choice.

    Each node picks its own penalty from the shared grid by minimizing
    n log(MSE_i) + k_i log n + 4 gamma k_i log p, the per-node analogue of
    the graph-level selector; the AND rule then combines the chosen
    supports.
    """
    t_start = time.perf_counter()
    dc = center_columns(d)
    x = dc.values
    n, p = x.shape
    gram = x.T @ x
    gram = (gram + gram.T) / 2.0
    if cfg.lambda_grid is not None:
        grid = list(cfg.lambda_grid)
    else:
        offdiag = np.abs(gram - np.diag(np.diag(gram)))
        lam_max = 2.0 * float(offdiag.max()) / n
        if lam_max <= 0:
            raise SelectionError("degenerate data: zero cross-products",
                                 SelectionTrace())
        grid = list(default_grid(lam_max))

    nonzero = np.zeros((p, p), dtype=bool)
    chosen = []
    all_converged = True
    for i in range(p):
        path = _mb_node_path(gram, i, n, grid, deadline)
        cols = np.flatnonzero(np.arange(p) != i)
        scores = []
        for beta, _, k_size, conv in path:
            # per-node regression criterion on the support's unpenalized
            # refit; summed over nodes it matches the graph-level selector
            sup = cols[beta != 0]
            mse = _refit_mse_one(gram, i, sup, n)
            if mse <= 0 or not conv:
                scores.append(np.inf)
            else:
                scores.append(n * np.log(mse) + k_size * np.log(n)
                              + 2.0 * cfg.gamma_ebic * k_size * np.log(p))
        best = int(np.argmin(scores))
        if not np.isfinite(scores[best]):
            all_converged = False
            continue
        chosen.append(grid[best])
        beta = path[best][0]
        cols = np.flatnonzero(np.arange(p) != i)
        nonzero[i, cols[beta != 0]] = True
    a = (nonzero & nonzero.T).astype(np.int8)
    np.fill_diagonal(a, 0)
    return FitResult(
        a=a, k=None, lam=float(np.median(chosen)) if chosen else 0.0,
        sweeps=len(grid), wall_time_s=time.perf_counter() - t_start,
        converged=all_converged, mse=None, method="mb",
        meta={"per_node_lambda": chosen},
    )


def eigenvalue_floor(r: np.ndarray, floor: float = SKEPTIC_EIG_FLOOR):
    """Clip the spectrum from below; returns (matrix, repaired flag)."""
    vals, vecs = np.linalg.eigh(r)
    if vals[0] > 0:
        return r, False
    fixed = vecs @ np.diag(np.maximum(vals, floor)) @ vecs.T
    return (fixed + fixed.T) / 2.0, True


def glasso_moment(d: Dataset, method: str):
    """Second-moment input consumed by each glasso-family method."""
    if method == "glasso":
        return empirical_covariance(center_columns(d)), False
    if method == "npn_glasso":
        return empirical_covariance(npn_transform(d)), False
    if method == "kendall_glasso":
        skeptic = kendall_skeptic(d)
    elif method == "spearman_glasso":
        skeptic = spearman_skeptic(d)
    else:
        raise ValueError(f"not a glasso-family method: {method!r}")
    return eigenvalue_floor(skeptic.entries)


def fit_rank_glasso(d: Dataset, kind: str, lam: float,
                    deadline: Deadline | None = None) -> FitResult:
    """Graphical lasso on a rank-based input: the normal-scores covariance
    or a (repaired) skeptic correlation matrix."""
    method = {"npn": "npn_glasso", "kendall": "kendall_glasso",
              "spearman": "spearman_glasso"}.get(kind)
    if method is None:
        raise ValueError(f"unknown kind {kind!r}")
    moment, repaired = glasso_moment(d, method)
    fit = fit_glasso(moment, lam, deadline=deadline)
    fit.method = method
    fit.meta["repaired"] = repaired
    return fit


def glasso_lambda_max(moment: np.ndarray) -> float:
    off = np.abs(moment - np.diag(np.diag(moment)))
    return float(off.max())


def auto_fit(d: Dataset, method: str, cfg,
             deadline: Deadline | None = None) -> FitResult:
    """Fit ``method`` with its penalty chosen by the shared selector.

    cfg supplies gamma_ebic, tol, max_sweeps and an optional explicit grid.
    """
    if method == "drop":
        fit, _ = select_lambda(d, cfg=cfg, deadline=deadline)
        return fit
    if method == "mb":
        return mb_auto(d, cfg, deadline)
    if method not in METHOD_NAMES:
        raise ValueError(f"unknown method {method!r}")
    moment, repaired = glasso_moment(d, method)
    if cfg.lambda_grid is not None:
        grid = list(cfg.lambda_grid)
    else:
        lam_max = glasso_lambda_max(moment)
        if lam_max <= 0:
            raise SelectionError("degenerate moment matrix",
                                 SelectionTrace())
        grid = list(default_grid(lam_max))

    def fit_at(lam, warm):
        fit = fit_glasso(moment, lam, deadline=deadline)
        fit.method = method
        fit.meta["repaired"] = repaired
        return fit

    fit, _ = _select_over_grid(fit_at, grid, d, cfg.gamma_ebic,
                               warm_start=False, gram=d.n * moment, n=d.n)
    return fit
