"""Propensity-score stratification.

Units are binned on the estimated instrument propensity score at
empirical quantiles ("equal-sized bins"); the bins become categorical
covariates for the interacted 2SLS. Bins that end up empty, single-armed,
or without first-stage variation are merged into their lower neighbor
(the first bin merges upward) until every stratum is usable, so a
requested count is an upper bound on the delivered count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .complier import PropensityFit, centered_interacted_2sls, fit_propensity
from .errors import UnpartitionableError
from .estimators import Dataset, interacted_2sls


@dataclass(frozen=True)
class StratumPartition:
    """A partition of units by propensity score.

    ``boundaries`` holds the k - 1 interior cutpoints; stratum j covers
    (boundaries[j-2], boundaries[j-1]] with the outer strata open toward
    0 and 1. ``labels`` assigns each unit a stratum in 1..k.
    ``merged_from`` records the originally requested stratum count.
    """

    k: int
    boundaries: np.ndarray
    labels: np.ndarray
    counts: np.ndarray
    merged_from: int


@dataclass(frozen=True)
class StratifiedResult:
    """LATE estimate and per-stratum conditional LATEs from one partition."""

    tau_star: float
    beta_star: np.ndarray
    partition: StratumPartition


def partition_by_propensity(ehat, k: int, z=None, d=None) -> StratumPartition:
    """Partition units into at most ``k`` propensity strata.

    Cutpoints are empirical quantiles of ``ehat`` at probabilities
    j / k, so ties share a stratum (units with equal scores are never
    split) and a unit exactly on a cutpoint joins the lower stratum.
    When ``z`` (and optionally ``d``) are given, a stratum is only valid
    if it contains both instrument arms (and a nonzero first-stage
    difference); invalid strata trigger merging.

    Raises UnpartitionableError when even the fully merged single
    stratum is invalid.
    """
    e = np.asarray(ehat, dtype=float).reshape(-1)
    n = e.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < 2 * k:
        raise ValueError(f"need at least 2k = {2 * k} units, got {n}")
    if not np.all(np.isfinite(e)) or e.min() < 0.0 or e.max() > 1.0:
        raise ValueError("propensity scores must be finite and within [0, 1]")
    z = None if z is None else np.asarray(z, dtype=float).reshape(-1)
    d = None if d is None else np.asarray(d, dtype=float).reshape(-1)

    cuts = np.quantile(e, np.arange(1, k) / k) if k > 1 else np.empty(0)
    bins = np.searchsorted(cuts, e, side="left")

    def valid(members: list[int]) -> bool:
        mask = np.isin(bins, members)
        if not mask.any():
            return False
        if z is not None:
            zs = z[mask]
            if zs.min() == zs.max():
                return False
            if d is not None:
                d_diff = d[mask & (z == 1.0)].mean() - d[mask & (z == 0.0)].mean()
                if d_diff == 0.0:
                    return False
        return True

    groups: list[list[int]] = [[j] for j in range(k)]
    while True:
        bad = next((g for g, members in enumerate(groups) if not valid(members)), None)
        if bad is None:
            break
        if len(groups) == 1:
            raise UnpartitionableError("no valid propensity stratification exists")
        if bad == 0:
            groups[1] = groups[0] + groups[1]
            del groups[0]
        else:
            groups[bad - 1] = groups[bad - 1] + groups[bad]
            del groups[bad]

    final_k = len(groups)
    labels = np.empty(n, dtype=int)
    for idx, members in enumerate(groups):
        labels[np.isin(bins, members)] = idx + 1
    boundaries = np.array([cuts[groups[g][-1]] for g in range(final_k - 1)])
    counts = np.bincount(labels, minlength=final_k + 1)[1:]
    return StratumPartition(
        k=final_k, boundaries=boundaries, labels=labels, counts=counts, merged_from=k
    )


def stratified_late(data: Dataset, prop: PropensityFit, k: int) -> StratifiedResult:
    """LATE and per-stratum effects from an interacted fit on stratum dummies.

    The overall estimate comes from the centered interacted 2SLS with the
    strata as covariates and a saturated propensity on the stratum labels
    for the complier means. The per-stratum effects come from the
    interacted fit on the full dummy basis without a constant.
    """
    partition = partition_by_propensity(prop.ehat, k, z=data.z, d=data.d)
    dummies = (partition.labels[:, None] == np.arange(1, partition.k + 1)).astype(float)

    x_hat = np.column_stack([np.ones(data.n), dummies[:, 1:]])
    data_hat = replace(data, x=x_hat, has_constant=True)
    saturated = fit_propensity(data_hat, "saturated")
    tau_star = centered_interacted_2sls(data_hat, saturated).value

    data_tilde = replace(data, x=dummies, has_constant=False)
    beta_star = interacted_2sls(data_tilde).beta
    return StratifiedResult(tau_star=tau_star, beta_star=beta_star, partition=partition)


def regressogram(data: Dataset, prop: PropensityFit, k: int) -> list[tuple[float, float, float]]:
    """Piecewise-constant approximation of the conditional LATE over the propensity.

    Returns one (interval_low, interval_high, estimate) triple per
    stratum, with the outer intervals extended to 0 and 1.
    """
    result = stratified_late(data, prop, k)
    bounds = result.partition.boundaries
    lows = np.concatenate([[0.0], bounds])
    highs = np.concatenate([bounds, [1.0]])
    return [
        (float(lo), float(hi), float(est))
        for lo, hi, est in zip(lows, highs, result.beta_star)
    ]
