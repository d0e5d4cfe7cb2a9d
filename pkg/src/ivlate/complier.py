"""Instrument propensity scores, kappa weighting, and complier-centered estimation.

The kappa weights isolate the complier subpopulation using only the
instrument, the treatment, and the estimated instrument propensity
score. Complier covariate means feed the centered interacted 2SLS,
whose leading coefficient targets the local average treatment effect.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import linalg
from .errors import NoCompliersError, NoOverlapCellError
from .estimators import Dataset, ScalarEstimate, interacted_2sls

# Propensities are clipped into [CLIP, 1 - CLIP] to guard the kappa
# denominators; clip events are counted and surfaced as a warning.
CLIP = 1e-6

# Estimated complier share at or below this floor means the LATE is
# treated as unidentified in the sample at hand.
PC_FLOOR = 0.01

_ETA_BOUND = 30.0


@dataclass(frozen=True)
class PropensityFit:
    """Estimated instrument propensity scores e(X) = P(Z = 1 | X).

    ``model`` is one of "logistic", "saturated", "supplied".
    ``coefficients`` holds the logistic coefficients and is None
    otherwise. ``converged`` is False when the iterative fit hit its
    iteration cap; the last iterate is still returned so seeded
    pipelines proceed deterministically.
    """

    ehat: np.ndarray
    model: str
    coefficients: np.ndarray | None
    converged: bool
    n_clipped: int = 0


@dataclass(frozen=True)
class KappaWeights:
    """Kappa weights and their instrument-residual variant.

    kappa_i  = 1 - D_i (1 - Z_i) / (1 - e_i) - (1 - D_i) Z_i / e_i
    dkappa_i = (Z_i - e_i) / (e_i (1 - e_i))
    """

    kappa: np.ndarray
    dkappa: np.ndarray


@dataclass(frozen=True)
class ComplierMeans:
    """Kappa-weighted covariate means among compliers plus the complier share."""

    mu: np.ndarray
    pc_hat: float


def fit_propensity(data: Dataset, spec, max_iter: int = 100, tol: float = 1e-8) -> PropensityFit:
    """Estimate the instrument propensity score.

    Parameters
    ----------
    data : Dataset
    spec : {"logistic", "saturated"} or array-like
        "logistic" fits P(Z = 1 | X) by maximum likelihood via
        iteratively reweighted least squares on the covariate matrix.
        "saturated" uses within-cell means of Z over distinct covariate
        rows and requires both arms in every cell. An array supplies
        externally computed scores.
    max_iter, tol : IRLS iteration cap and relative deviance tolerance.

    Returns
    -------
    PropensityFit with every score strictly inside [CLIP, 1 - CLIP].
    """
    if isinstance(spec, str):
        if spec == "logistic":
            raw, coef, converged = _irls_logistic(data.z, data.x, max_iter, tol)
            model = "logistic"
        elif spec == "saturated":
            raw = _saturated_scores(data.z, data.x)
            coef, converged = None, True
            model = "saturated"
        else:
            raise ValueError(f"unknown propensity spec {spec!r}")
    else:
        raw = np.asarray(spec, dtype=float).reshape(-1)
        if raw.shape != (data.n,):
            raise ValueError("supplied propensity vector has the wrong length")
        if not np.all(np.isfinite(raw)) or raw.min() < 0.0 or raw.max() > 1.0:
            raise ValueError("supplied propensities must be finite and within [0, 1]")
        coef, converged = None, True
        model = "supplied"

    clipped = np.clip(raw, CLIP, 1.0 - CLIP)
    n_clipped = int(np.sum(clipped != raw))
    if n_clipped:
        warnings.warn(
            f"{n_clipped} propensity value(s) clipped into [{CLIP}, {1 - CLIP}]",
            RuntimeWarning,
            stacklevel=2,
        )
    if not converged:
        warnings.warn(
            f"logistic propensity fit did not converge within {max_iter} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    return PropensityFit(
        ehat=clipped, model=model, coefficients=coef, converged=converged, n_clipped=n_clipped
    )


def _irls_logistic(z, x, max_iter, tol):
    beta = np.zeros(x.shape[1])
    dev_prev = np.inf
    converged = False
    for _ in range(max_iter):
        eta = np.clip(x @ beta, -_ETA_BOUND, _ETA_BOUND)
        mu = expit(eta)
        w = mu * (1.0 - mu)
        working = eta + (z - mu) / w
        sw = np.sqrt(w)
        beta = linalg.least_squares(sw * working, sw[:, None] * x).coef[:, 0]
        eta = np.clip(x @ beta, -_ETA_BOUND, _ETA_BOUND)
        mu = expit(eta)
        dev = -2.0 * float(np.sum(z * np.log(mu) + (1.0 - z) * np.log1p(-mu)))
        if np.isfinite(dev_prev) and abs(dev - dev_prev) < tol * (abs(dev_prev) + 1e-300):
            converged = True
            break
        dev_prev = dev
    return expit(np.clip(x @ beta, -_ETA_BOUND, _ETA_BOUND)), beta, converged


def _saturated_scores(z, x):
    _, inverse = np.unique(x, axis=0, return_inverse=True)
    ehat = np.empty_like(z)
    for cell in range(inverse.max() + 1):
        mask = inverse == cell
        zc = z[mask]
        if zc.min() == zc.max():
            raise NoOverlapCellError(
                f"covariate cell {cell} contains a single instrument arm ({int(mask.sum())} units)"
            )
        ehat[mask] = zc.mean()
    return ehat


def kappa_weights(data: Dataset, prop: PropensityFit) -> KappaWeights:
    """Entrywise kappa and delta-kappa weights from estimated propensities."""
    e = prop.ehat
    kappa = 1.0 - data.d * (1.0 - data.z) / (1.0 - e) - (1.0 - data.d) * data.z / e
    dkappa = (data.z - e) / (e * (1.0 - e))
    return KappaWeights(kappa=kappa, dkappa=dkappa)


def complier_mean(data: Dataset, prop: PropensityFit, g_cols) -> ComplierMeans:
    """Kappa-weighted means of the selected covariate columns among compliers.

    Raises NoCompliersError when mean(kappa), the estimated complier
    share, does not exceed PC_FLOOR.
    """
    cols = list(g_cols)
    kappa = kappa_weights(data, prop).kappa
    pc_hat = float(kappa.mean())
    if pc_hat <= PC_FLOOR:
        raise NoCompliersError(f"estimated complier share {pc_hat:.4f} <= {PC_FLOOR}")
    if cols:
        mu = (kappa @ data.x[:, cols]) / kappa.sum()
    else:
        mu = np.empty(0)
    return ComplierMeans(mu=np.atleast_1d(mu), pc_hat=pc_hat)


def first_stage_complier_share(data: Dataset) -> np.ndarray:
    """Per-unit complier share implied by the interacted first stage.

    Fits lm(D ~ Z*X + X) and returns the coefficient block of Z*X applied
    to each covariate row, i.e. the fitted gap between the two instrument
    arms. With categorical covariates this is the exact within-cell
    first-stage difference.
    """
    zx = data.z[:, None] * data.x
    fit = linalg.least_squares(data.d, np.column_stack([zx, data.x]))
    return data.x @ fit.coef[: data.k, 0]


def centered_interacted_2sls(
    data: Dataset, prop: PropensityFit, centering: str = "first-stage"
) -> ScalarEstimate:
    """Interacted 2SLS on covariates centered at their complier means.

    The non-constant columns are shifted by estimated complier means and
    the first coefficient of the resulting interacted fit is the LATE
    estimate. ``centering`` selects the complier-mean estimator:

    * "first-stage": method-of-moments weights from the interacted first
      stage, mu_k = sum_i share_i x_ik / sum_i share_i. The default; its
      weights are smooth functions of the covariates, which keeps the
      estimate stable when some propensities are extreme.
    * "kappa": the kappa-weighted means from ``complier_mean``.

    Either way the complier share implied by the kappa weights must clear
    the identification floor.
    """
    if not data.has_constant:
        raise ValueError("centered_interacted_2sls requires a dataset with a constant column")
    means = complier_mean(data, prop, range(1, data.k))
    if centering == "kappa":
        mu = means.mu
    elif centering == "first-stage":
        share = first_stage_complier_share(data)
        total = share.sum()
        if total <= 0.0:
            raise NoCompliersError("first-stage complier share sums to a non-positive value")
        mu = (share @ data.x[:, 1:]) / total if data.k > 1 else np.empty(0)
    else:
        raise ValueError(f"unknown centering {centering!r}")
    x0 = data.x.copy()
    if data.k > 1:
        x0[:, 1:] -= mu
    fit = interacted_2sls(replace(data, x=x0))
    return ScalarEstimate(value=float(fit.beta[0]), label="xx")


def abadie_beta(data: Dataset, prop: PropensityFit) -> np.ndarray:
    """Weighting estimate of the complier projection coefficients.

    Sample analog of {E(X X' | complier)}^-1 P(complier)^-1 E(dkappa X Y),
    with the first factor a kappa-weighted Gram matrix and the complier
    probability estimated by mean(kappa).
    """
    weights = kappa_weights(data, prop)
    pc_hat = float(weights.kappa.mean())
    if pc_hat <= PC_FLOOR:
        raise NoCompliersError(f"estimated complier share {pc_hat:.4f} <= {PC_FLOOR}")
    gram = (data.x * weights.kappa[:, None]).T @ data.x / weights.kappa.sum()
    rhs = (data.x * (weights.dkappa * data.y)[:, None]).mean(axis=0) / pc_hat
    # Solving the square system through the pivoted-QR path keeps the
    # rank check consistent with every other fit.
    return linalg.least_squares(rhs, gram).coef[:, 0].copy()
