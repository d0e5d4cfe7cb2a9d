"""Nonparametric bootstrap over arbitrary estimator pipelines.

Replicates are iid row-resamples with a private random stream keyed by
(seed, replicate), so output depends only on the inputs and never on
execution order. Replicates that fail an identification condition are
dropped and counted rather than retried; retrying would bias the
resampling law.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import IdentificationError, TooManyFailuresError
from .estimators import Dataset
from .streams import RESAMPLE, substream


@dataclass(frozen=True)
class BootstrapResult:
    """Point estimate with bootstrap spread and percentile interval.

    Percentile intervals may exclude the point estimate in finite
    samples; no ordering between them is asserted.
    """

    point: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    b_effective: int
    b_requested: int
    seed: int


def bootstrap(
    data: Dataset,
    pipeline: Callable[[Dataset], np.ndarray],
    b: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> BootstrapResult:
    """Bootstrap ``pipeline`` over row-resamples of ``data``.

    Parameters
    ----------
    data : Dataset
    pipeline : callable
        Maps a Dataset to a scalar or vector estimate. It must be pure
        with respect to its input and re-estimate everything it needs
        (propensity scores, complier means, partitions) so the interval
        reflects all estimation uncertainty.
    b : number of replicates, at least 10.
    alpha : two-sided level for the percentile interval.
    seed : base seed; replicate r draws from the stream (seed, r).

    Returns
    -------
    BootstrapResult

    Raises
    ------
    TooManyFailuresError
        If fewer than half the replicates survive identification checks.
    """
    if b < 10:
        raise ValueError("bootstrap needs b >= 10 replicates")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    point = np.atleast_1d(np.asarray(pipeline(data), dtype=float))

    draws = []
    failures = 0
    for r in range(b):
        rng = substream(seed, r, RESAMPLE)
        idx = rng.integers(0, data.n, size=data.n)
        sample = replace(data, y=data.y[idx], d=data.d[idx], z=data.z[idx], x=data.x[idx])
        try:
            est = np.atleast_1d(np.asarray(pipeline(sample), dtype=float))
        except IdentificationError:
            failures += 1
            continue
        draws.append(est)

    b_effective = len(draws)
    if b_effective < b / 2:
        raise TooManyFailuresError(
            f"only {b_effective} of {b} bootstrap replicates were identified"
        )
    stacked = np.vstack(draws)
    return BootstrapResult(
        point=point,
        se=stacked.std(axis=0, ddof=1),
        ci_lower=np.quantile(stacked, alpha / 2.0, axis=0),
        ci_upper=np.quantile(stacked, 1.0 - alpha / 2.0, axis=0),
        b_effective=b_effective,
        b_requested=b,
        seed=seed,
    )
