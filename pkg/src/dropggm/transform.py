"""Rank-based inverse normal scoring and latent rank-correlation estimators.

The scoring replaces each observation by the normal quantile of its midrank,
(rank - 0.5) / n, wiping out marginal distortions while preserving order.
The two skeptic estimators recover latent correlations through the sine maps
sin(pi/2 * tau) and 2 sin(pi/6 * eta) of Kendall and Spearman coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from . import _kernels
from .core import Dataset, center_columns

#: sample-size threshold below which Kendall's tau uses explicit pair counting
KENDALL_BRUTE_MAX_N = 2000

# Acklam's rational approximation to the standard normal quantile; one Newton
# step against the erfc-based CDF then lands well inside the 1e-9 contract.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class RankCorrelationMatrix:
    """Latent correlation estimate with unit diagonal, entries in [-1, 1].

    ``degenerate_columns`` lists constant columns whose off-diagonal entries
    were forced to zero.
    """

    entries: np.ndarray
    kind: str
    degenerate_columns: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("kendall", "spearman"):
            raise ValueError(f"unknown kind {self.kind!r}")


def _polyval(coeffs, x):
    out = np.full_like(x, coeffs[0])
    for c in coeffs[1:]:
        out = out * x + c
    return out


def normal_quantile(u):
    """Inverse standard normal CDF, accurate to better than 1e-9.

    Accepts a scalar or array with entries strictly inside (0, 1).
    """
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise ValueError("quantile argument must lie strictly in (0, 1)")
    scalar = u_arr.ndim == 0
    q = np.atleast_1d(u_arr).copy()
    x = np.empty_like(q)

    low = q < _P_LOW
    high = q > 1.0 - _P_LOW
    mid = ~(low | high)
    if np.any(mid):
        r = q[mid] - 0.5
        r2 = r * r
        x[mid] = r * _polyval(_A, r2) / (_polyval(_B, r2) * r2 + 1.0)
    if np.any(low):
        t = np.sqrt(-2.0 * np.log(q[low]))
        x[low] = _polyval(_C, t) / (_polyval(_D, t) * t + 1.0)
    if np.any(high):
        # 1 - q is exact for q >= 0.5 (Sterbenz), so the tail mirrors cleanly
        t = np.sqrt(-2.0 * np.log1p(-q[high]))
        x[high] = -(_polyval(_C, t) / (_polyval(_D, t) * t + 1.0))

    # Newton refinement; both residual forms equal CDF(x) - u, written
    # tail-wise so no cancellation occurs when u is close to 0 or 1.
    upper = q > 0.5
    err = np.where(
        upper,
        (1.0 - q) - 0.5 * special.erfc(x / np.sqrt(2.0)),
        0.5 * special.erfc(-x / np.sqrt(2.0)) - q,
    )
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    x = x - err / pdf

    return float(x[0]) if scalar else x.reshape(u_arr.shape)


def npn_transform(d: Dataset) -> Dataset:
    """Score every column by the normal quantile of (rank - 0.5)/n, then
    center columns. Ties receive average (mid) ranks.

    Raises on constant columns, where the scoring is undefined.
    """
    x = d.values
    n = d.n
    out = np.empty_like(x)
    for j in range(d.p):
        col = x[:, j]
        if col.max() == col.min():
            name = d.column_names[j] if d.column_names else str(j)
            raise ValueError(f"column {name!r} is constant; cannot rank-score")
        ranks = stats.rankdata(col, method="average")
        out[:, j] = normal_quantile((ranks - 0.5) / n)
    return center_columns(d.with_values(out))


def _degenerate_columns(x: np.ndarray) -> list[int]:
    return [j for j in range(x.shape[1])
            if x[:, j].max() == x[:, j].min()]


def kendall_tau(x: np.ndarray, y: np.ndarray) -> float:
    """Tau-b; explicit O(n^2) pair counting for n <= 2000, merge-sort
    counting (scipy) above. The two routes agree on overlap."""
    if x.shape[0] <= KENDALL_BRUTE_MAX_N:
        return float(_kernels.kendall_tau_brute(
            np.ascontiguousarray(x), np.ascontiguousarray(y)))
    return float(stats.kendalltau(x, y).statistic)


def kendall_skeptic(d: Dataset) -> RankCorrelationMatrix:
    """Latent correlation via sin(pi/2 * tau-b), unit diagonal."""
    x = d.values
    p = d.p
    degen = _degenerate_columns(x)
    if degen:
        warnings.warn(f"constant columns {degen}: correlations set to 0")
    tau = np.eye(p)
    for i in range(p - 1):
        for j in range(i + 1, p):
            if i in degen or j in degen:
                tau[i, j] = tau[j, i] = 0.0
            else:
                tau[i, j] = tau[j, i] = kendall_tau(x[:, i], x[:, j])
    entries = np.sin(0.5 * np.pi * tau)
    np.fill_diagonal(entries, 1.0)
    return RankCorrelationMatrix(entries, "kendall", tuple(degen))


def spearman_skeptic(d: Dataset) -> RankCorrelationMatrix:
    """Latent correlation via 2 sin(pi/6 * eta), eta the Spearman rank
    correlation on midranks."""
    x = d.values
    p = d.p
    degen = _degenerate_columns(x)
    if degen:
        warnings.warn(f"constant columns {degen}: correlations set to 0")
    ranked = np.column_stack([
        stats.rankdata(x[:, j], method="average") for j in range(p)
    ])
    keep = [j for j in range(p) if j not in degen]
    eta = np.zeros((p, p))
    if len(keep) >= 2:
        sub = np.corrcoef(ranked[:, keep], rowvar=False)
        eta[np.ix_(keep, keep)] = np.clip(sub, -1.0, 1.0)
    entries = 2.0 * np.sin(np.pi / 6.0 * eta)
    np.fill_diagonal(entries, 1.0)
    return RankCorrelationMatrix(entries, "spearman", tuple(degen))
