"""Simulation designs, exact population oracles, and the replication engine.

A design is described by a covariate law, an instrument propensity,
compliance-type probabilities, and potential-outcome means. Designs with
finite covariate support additionally carry their support cells, which
lets the oracle compute every population quantity by exact enumeration:
the complier effect and its projection coefficients, the implicit
weights of the additive-second-stage estimators, the first-stage
coefficient blocks, and the two bias terms of the interacted fit.
Continuous designs register closed-form truths instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from . import streams
from .complier import centered_interacted_2sls, fit_propensity
from .errors import (
    IdentificationError,
    InfiniteSupportError,
    InvalidSpecError,
)
from .estimators import (
    Dataset,
    additive_2sls,
    interacted_2sls,
    interacted_additive_2sls,
)
from .linalg import least_squares
from .stratify import stratified_late

# Compliance-type codes.
U_NEVER = 0
U_COMPLIER = 1
U_ALWAYS = 2

_TYPE_NAMES = ("never", "complier", "always")


@dataclass(frozen=True)
class DgpCell:
    """One support cell of a finite-support design.

    ``y0_mean`` and ``y1_mean`` give the potential-outcome means indexed
    by compliance type (never, complier, always).
    """

    x: tuple[float, ...]
    prob: float
    e: float
    p_always: float
    p_complier: float
    y0_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    y1_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DgpSpec:
    """Generative description of a simulation design.

    The callables are vectorized over rows of the covariate matrix.
    ``cells`` is set for finite-support designs and enables the exact
    oracle; continuous designs may register ``tau_c_value`` and
    ``beta_c_value`` as closed-form truths.
    """

    name: str
    k: int
    draw_covariates: Callable[[np.random.Generator, int], np.ndarray]
    propensity: Callable[[np.ndarray], np.ndarray]
    p_always: Callable[[np.ndarray], np.ndarray]
    p_complier: Callable[[np.ndarray], np.ndarray]
    y0_mean: Callable[[np.ndarray, np.ndarray], np.ndarray]
    y1_mean: Callable[[np.ndarray, np.ndarray], np.ndarray]
    noise_sd: float = 0.0
    cells: tuple[DgpCell, ...] | None = None
    tau_c_value: float | None = None
    beta_c_value: tuple[float, ...] | None = None


@dataclass(frozen=True)
class LatentTruth:
    """Per-unit latent quantities behind one generated sample."""

    u: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    tau: np.ndarray
    e: np.ndarray


@dataclass(frozen=True)
class OracleEstimands:
    """Exact population quantities of a finite-support design.

    Cell-indexed maps are keyed by the covariate tuple. ``plim_taa`` and
    ``plim_tia`` are the weighted averages of the conditional complier
    effects under the additive and interacted-additive weights; the
    ``*_projection`` values recompute the same limits from the population
    moment matrices and must agree whenever the instrument-interaction
    linearity condition holds.
    """

    tau_c: float
    tau_c_by_cell: dict[tuple[float, ...], float]
    beta_c: np.ndarray
    p_complier: float
    pi_by_cell: dict[tuple[float, ...], float]
    pi_tilde_coeffs: np.ndarray
    w_plus: dict[tuple[float, ...], float]
    w_times: dict[tuple[float, ...], float]
    w: dict[tuple[float, ...], float]
    b1: np.ndarray
    b2: np.ndarray
    plim_taa: float
    plim_tia: float
    c1: np.ndarray
    c0: np.ndarray
    c2: np.ndarray
    plim_beta_2sls: np.ndarray
    plim_taa_projection: float
    plim_tia_projection: float
    interacted_design_gram: np.ndarray


@dataclass(frozen=True)
class McSummary:
    """Bias and spread of estimators over replications of one design."""

    dgp: str
    n: int
    reps: int
    seed: int
    truth: dict[str, np.ndarray]
    bias: dict[str, np.ndarray]
    sd: dict[str, np.ndarray]
    failures: dict[str, int]
    estimates: dict[str, np.ndarray] | None = None


# ---------------------------------------------------------------------------
# Named designs
# ---------------------------------------------------------------------------


def dgp_a() -> DgpSpec:
    """Binary-covariate design with opposite-signed conditional effects.

    X = (1, X1) with X1 ~ Bernoulli(0.5); Z | X ~ Bernoulli(0.5 + 0.4 X1);
    P(always) = 0.1, P(complier | X) = 0.7 - 0.5 X1; Y(0) = 0 and
    Y(1) = -1 + 5 X1. The complier effect is 4 at X1 = 1 and -1 at
    X1 = 0, averaging to 1/9.
    """
    cells = (
        DgpCell(x=(1.0, 0.0), prob=0.5, e=0.5, p_always=0.1, p_complier=0.7,
                y1_mean=(-1.0, -1.0, -1.0)),
        DgpCell(x=(1.0, 1.0), prob=0.5, e=0.9, p_always=0.1, p_complier=0.2,
                y1_mean=(4.0, 4.0, 4.0)),
    )
    return from_cells("A", cells)


def dgp_b() -> DgpSpec:
    """Two standard-normal covariates with a logistic instrument propensity.

    X = (1, X1, X2) with X1, X2 iid N(0, 1); P(Z = 1 | X) =
    1 / (1 + exp(X1 + X2)); P(complier) = 0.7, P(always) = 0.2;
    Y(0) = 0 and Y(1) = X1^2 + X2^2, so the complier effect is 2 with
    projection coefficients (2, 0, 0).
    """

    def draw(rng, n):
        return np.column_stack([np.ones(n), rng.standard_normal((n, 2))])

    return DgpSpec(
        name="B",
        k=3,
        draw_covariates=draw,
        propensity=lambda x: expit(-(x[:, 1] + x[:, 2])),
        p_always=lambda x: np.full(x.shape[0], 0.2),
        p_complier=lambda x: np.full(x.shape[0], 0.7),
        y0_mean=lambda x, u: np.zeros(x.shape[0]),
        y1_mean=lambda x, u: x[:, 1] ** 2 + x[:, 2] ** 2,
        tau_c_value=2.0,
        beta_c_value=(2.0, 0.0, 0.0),
    )


def dgp_c() -> DgpSpec:
    """Uniform covariate equal to the instrument propensity, quadratic effect.

    X = (1, X1) with X1 ~ Uniform(0, 1); Z | X ~ Bernoulli(X1);
    P(complier) = 0.7, P(always) = 0.2; Y(0) = 0 and Y(1) = X1^2. The
    complier effect is 1/3 with projection coefficients (-1/6, 1).
    """

    def draw(rng, n):
        return np.column_stack([np.ones(n), rng.random(n)])

    return DgpSpec(
        name="C",
        k=2,
        draw_covariates=draw,
        propensity=lambda x: x[:, 1],
        p_always=lambda x: np.full(x.shape[0], 0.2),
        p_complier=lambda x: np.full(x.shape[0], 0.7),
        y0_mean=lambda x, u: np.zeros(x.shape[0]),
        y1_mean=lambda x, u: x[:, 1] ** 2,
        tau_c_value=1.0 / 3.0,
        beta_c_value=(-1.0 / 6.0, 1.0),
    )


def named_dgp(name: str) -> DgpSpec:
    """Look up a bundled design by name; "D" is the design of study C."""
    key = name.strip().upper()
    if key == "A":
        return dgp_a()
    if key == "B":
        return dgp_b()
    if key in ("C", "D"):
        return dgp_c()
    raise InvalidSpecError(f"unknown design name {name!r}")


def from_cells(name: str, cells, noise_sd: float = 0.0) -> DgpSpec:
    """Build a finite-support design from explicit support cells."""
    cells = tuple(cells)
    if not cells:
        raise InvalidSpecError("a finite-support design needs at least one cell")
    k = len(cells[0].x)
    xmat = np.array([c.x for c in cells], dtype=float)
    probs = np.array([c.prob for c in cells], dtype=float)
    e_arr = np.array([c.e for c in cells], dtype=float)
    pa_arr = np.array([c.p_always for c in cells], dtype=float)
    pc_arr = np.array([c.p_complier for c in cells], dtype=float)
    y0_arr = np.array([c.y0_mean for c in cells], dtype=float)
    y1_arr = np.array([c.y1_mean for c in cells], dtype=float)

    if xmat.shape[1] != k or any(len(c.x) != k for c in cells):
        raise InvalidSpecError("all cells must share the covariate dimension")
    if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-12:
        raise InvalidSpecError("cell probabilities must be nonnegative and sum to one")
    if np.any((e_arr <= 0.0) | (e_arr >= 1.0)):
        raise InvalidSpecError("cell propensities must lie strictly inside (0, 1)")
    if np.any(pa_arr < 0.0) or np.any(pc_arr < 0.0) or np.any(pa_arr + pc_arr > 1.0 + 1e-12):
        raise InvalidSpecError("compliance-type probabilities must be a sub-distribution")

    def cell_index(x: np.ndarray) -> np.ndarray:
        match = np.all(x[:, None, :] == xmat[None, :, :], axis=2)
        if not match.any(axis=1).all():
            raise InvalidSpecError("covariate row outside the declared support")
        return match.argmax(axis=1)

    return DgpSpec(
        name=name,
        k=k,
        draw_covariates=lambda rng, n: xmat[rng.choice(len(cells), size=n, p=probs)],
        propensity=lambda x: e_arr[cell_index(x)],
        p_always=lambda x: pa_arr[cell_index(x)],
        p_complier=lambda x: pc_arr[cell_index(x)],
        y0_mean=lambda x, u: y0_arr[cell_index(x), u],
        y1_mean=lambda x, u: y1_arr[cell_index(x), u],
        noise_sd=noise_sd,
        cells=cells,
    )


def spec_to_json(spec: DgpSpec) -> dict:
    """Serialize a design to a JSON-compatible document.

    Finite-support designs serialize their cells in full; bundled
    continuous designs serialize by name.
    """
    if spec.cells is not None:
        return {
            "name": spec.name,
            "noise_sd": spec.noise_sd,
            "cells": [
                {
                    "x": list(c.x),
                    "prob": c.prob,
                    "e": c.e,
                    "p_always": c.p_always,
                    "p_complier": c.p_complier,
                    "y0_mean": dict(zip(_TYPE_NAMES, c.y0_mean)),
                    "y1_mean": dict(zip(_TYPE_NAMES, c.y1_mean)),
                }
                for c in spec.cells
            ],
        }
    if spec.name.upper() in ("A", "B", "C", "D"):
        return {"name": spec.name}
    raise InvalidSpecError(
        f"design {spec.name!r} has continuous support and no bundled definition"
    )


def spec_from_json(doc: dict) -> DgpSpec:
    """Rebuild a design from the document produced by ``spec_to_json``."""
    if "cells" not in doc:
        return named_dgp(str(doc["name"]))
    cells = tuple(
        DgpCell(
            x=tuple(float(v) for v in c["x"]),
            prob=float(c["prob"]),
            e=float(c["e"]),
            p_always=float(c["p_always"]),
            p_complier=float(c["p_complier"]),
            y0_mean=tuple(float(c.get("y0_mean", {}).get(t, 0.0)) for t in _TYPE_NAMES),
            y1_mean=tuple(float(c.get("y1_mean", {}).get(t, 0.0)) for t in _TYPE_NAMES),
        )
        for c in doc["cells"]
    )
    return from_cells(str(doc.get("name", "custom")), cells, float(doc.get("noise_sd", 0.0)))


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def generate(spec: DgpSpec, n: int, seed: int, replicate: int = 0) -> tuple[Dataset, LatentTruth]:
    """Draw one sample of size ``n`` from the design.

    Covariates, instrument, compliance types, and outcome noise use
    separate substreams keyed by (seed, replicate, purpose), so the
    output is a pure function of (spec, n, seed, replicate).
    """
    if n < 1:
        raise InvalidSpecError("n must be at least 1")
    x = np.asarray(spec.draw_covariates(streams.substream(seed, replicate, streams.COVARIATES), n), dtype=float)
    if x.shape != (n, spec.k) or not np.all(np.isfinite(x)):
        raise InvalidSpecError("covariate sampler returned a malformed matrix")

    e = np.asarray(spec.propensity(x), dtype=float)
    pa = np.asarray(spec.p_always(x), dtype=float)
    pc = np.asarray(spec.p_complier(x), dtype=float)
    if np.any((e <= 0.0) | (e >= 1.0)):
        raise InvalidSpecError("propensity must lie strictly inside (0, 1) on the support")
    if np.any(pa < 0.0) or np.any(pc < 0.0) or np.any(pa + pc > 1.0 + 1e-12):
        raise InvalidSpecError("compliance-type probabilities must be a sub-distribution")

    z = (streams.substream(seed, replicate, streams.INSTRUMENT).random(n) < e).astype(float)
    r = streams.substream(seed, replicate, streams.COMPLIANCE).random(n)
    u = np.where(r < pa, U_ALWAYS, np.where(r < pa + pc, U_COMPLIER, U_NEVER)).astype(np.int8)
    d = ((u == U_ALWAYS) | ((u == U_COMPLIER) & (z == 1.0))).astype(float)

    y0 = np.asarray(spec.y0_mean(x, u), dtype=float)
    y1 = np.asarray(spec.y1_mean(x, u), dtype=float)
    if spec.noise_sd > 0.0:
        eps = streams.substream(seed, replicate, streams.NOISE).standard_normal((n, 2))
        y0 = y0 + spec.noise_sd * eps[:, 0]
        y1 = y1 + spec.noise_sd * eps[:, 1]
    y = d * y1 + (1.0 - d) * y0

    data = Dataset(y=y, d=d, z=z, x=x, has_constant=bool(np.all(x[:, 0] == 1.0)))
    latent = LatentTruth(u=u, y0=y0, y1=y1, tau=y1 - y0, e=e)
    return data, latent


# ---------------------------------------------------------------------------
# Exact population oracle
# ---------------------------------------------------------------------------


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a square population system through the rank-checked LS path."""
    return least_squares(b, a).coef[:, 0] if b.ndim == 1 else least_squares(b, a).coef


def oracle_estimands(spec: DgpSpec) -> OracleEstimands:
    """Compute all population quantities of a finite-support design exactly.

    Everything is an exact finite sum over support cells (and, for the
    regression limits, over the cell-by-instrument-by-type atoms), so
    results carry no Monte Carlo error.
    """
    if spec.cells is None:
        raise InfiniteSupportError(
            f"design {spec.name!r} has continuous covariate support; "
            "register closed-form truths instead"
        )
    cells = spec.cells
    k = spec.k
    xs = np.array([c.x for c in cells], dtype=float)
    p = np.array([c.prob for c in cells], dtype=float)
    e = np.array([c.e for c in cells], dtype=float)
    pa = np.array([c.p_always for c in cells], dtype=float)
    pc = np.array([c.p_complier for c in cells], dtype=float)
    pn = 1.0 - pa - pc
    y0m = np.array([c.y0_mean for c in cells], dtype=float)  # (m, type)
    y1m = np.array([c.y1_mean for c in cells], dtype=float)
    tau_cell = y1m[:, U_COMPLIER] - y0m[:, U_COMPLIER]

    p_c = float(p @ pc)
    if p_c <= 0.0:
        raise InvalidSpecError("the design admits no compliers")
    cell_given_c = p * pc / p_c
    tau_c = float(cell_given_c @ tau_cell)

    xxt = np.einsum("i,ij,il->jl", p, xs, xs)
    exx_c = np.einsum("i,ij,il->jl", cell_given_c, xs, xs)
    beta_c = _solve(exx_c, cell_given_c @ (xs * tau_cell[:, None]))

    # Implicit weights of the additive-second-stage limits.
    v = e * (1.0 - e)
    pi = pc
    a_tilde = _solve(
        np.einsum("i,ij,il->jl", p * v, xs, xs),
        (p * v * pi) @ xs,
    )
    pi_tilde = xs @ a_tilde
    w_plus_arr = v * pi / float(p @ (v * pi))
    w_times_arr = v * pi_tilde * pi / float(p @ (v * pi_tilde**2))
    w_arr = v * pi**2 / float(p @ (v * pi**2))
    plim_taa = float(p @ (w_plus_arr * tau_cell))
    plim_tia = float(p @ (w_times_arr * tau_cell))

    # Population moments over the (cell, z, type) atoms. Outcomes enter
    # every limit linearly, so type-conditional means suffice.
    p_d1_z1 = pa + pc          # P(D = 1 | Z = 1, cell)
    p_d1_z0 = pa               # P(D = 1 | Z = 0, cell)
    ey_z1 = pa * y1m[:, U_ALWAYS] + pc * y1m[:, U_COMPLIER] + pn * y0m[:, U_NEVER]
    ey_z0 = pa * y1m[:, U_ALWAYS] + pc * y0m[:, U_COMPLIER] + pn * y0m[:, U_NEVER]
    ey = e * ey_z1 + (1.0 - e) * ey_z0
    ed = pa + e * pc

    m_zx_zx = np.einsum("i,ij,il->jl", p * e, xs, xs)
    m_zx_dx = np.einsum("i,ij,il->jl", p * e * p_d1_z1, xs, xs)
    m_x_dx = np.einsum("i,ij,il->jl", p * ed, xs, xs)
    m_zx_y = (p * e * ey_z1) @ xs
    m_x_y = (p * ey) @ xs

    # Interacted fit: just-identified, instruments (Z X, X), regressors (D X, X).
    a_full = np.block([[m_zx_dx, m_zx_zx], [m_x_dx, xxt]])
    plim_beta_full = _solve(a_full, np.concatenate([m_zx_y, m_x_y]))
    plim_beta_2sls = plim_beta_full[:k]

    # Additive fit: instruments (Z, X), regressors (D, X).
    e_z = float(p @ e)
    e_zd = float(p @ (e * p_d1_z1))
    e_zx = (p * e) @ xs
    e_xd = (p * ed) @ xs
    e_zy = float(p @ (e * ey_z1))
    a_add = np.block([[np.array([[e_zd]]), e_zx[None, :]], [e_xd[:, None], xxt]])
    plim_taa_proj = float(_solve(a_add, np.concatenate([[e_zy], m_x_y]))[0])

    # Interacted-additive fit: overidentified, instruments (Z X, X),
    # regressors (D, X); limit via the projected moment matrices.
    m_ww = np.block([[m_zx_zx, m_zx_zx], [m_zx_zx, xxt]])
    e_zx_d = (p * e * p_d1_z1) @ xs
    m_wq = np.block([[e_zx_d[:, None], m_zx_zx], [e_xd[:, None], xxt]])
    m_wy = np.concatenate([m_zx_y, m_x_y])
    proj = _solve(m_ww, np.column_stack([m_wq, m_wy]))
    m_qq_hat = m_wq.T @ proj[:, :-1]
    m_qy_hat = m_wq.T @ proj[:, -1]
    plim_tia_proj = float(_solve(m_qq_hat, m_qy_hat)[0])

    # First-stage coefficient blocks and the two bias terms.
    c1c0 = _solve(m_ww.T, np.vstack([m_zx_dx, m_x_dx])).T
    c1 = c1c0[:, :k]
    c0 = c1c0[:, k:]
    c2 = _solve(xxt.T, m_zx_zx.T).T

    delta_cell = pc * y0m[:, U_COMPLIER] + pn * y0m[:, U_NEVER] + pa * (
        y1m[:, U_ALWAYS] - xs @ beta_c
    )
    g_delta = _solve(xxt, p @ (xs * delta_cell[:, None]))
    gap_z = e[:, None] * xs - xs @ c2.T
    gap_delta = delta_cell - xs @ g_delta
    b1 = c1 @ ((p * gap_delta) @ gap_z)
    eps_cell = tau_cell - xs @ beta_c
    b2 = c1 @ (np.eye(k) - c2) @ ((p * pc * e * eps_cell) @ xs)

    resid_gram = m_zx_zx - m_zx_zx @ c2.T - c2 @ m_zx_zx + c2 @ xxt @ c2.T
    design_gram = c1 @ resid_gram @ c1.T

    keys = [tuple(float(v) for v in c.x) for c in cells]
    return OracleEstimands(
        tau_c=tau_c,
        tau_c_by_cell=dict(zip(keys, tau_cell.tolist())),
        beta_c=beta_c,
        p_complier=p_c,
        pi_by_cell=dict(zip(keys, pi.tolist())),
        pi_tilde_coeffs=a_tilde,
        w_plus=dict(zip(keys, w_plus_arr.tolist())),
        w_times=dict(zip(keys, w_times_arr.tolist())),
        w=dict(zip(keys, w_arr.tolist())),
        b1=b1,
        b2=b2,
        plim_taa=plim_taa,
        plim_tia=plim_tia,
        c1=c1,
        c0=c0,
        c2=c2,
        plim_beta_2sls=plim_beta_2sls,
        plim_taa_projection=plim_taa_proj,
        plim_tia_projection=plim_tia_proj,
        interacted_design_gram=design_gram,
    )


# ---------------------------------------------------------------------------
# Estimator pipelines and the replication engine
# ---------------------------------------------------------------------------

_STRAT_TAG = re.compile(r"^strat-(\d+)$")


def pipeline_for(tag: str) -> tuple[Callable[[Dataset], np.ndarray], str]:
    """Resolve an estimator tag to (pipeline, truth kind).

    Tags: "++" (additive), "x+" (interacted-additive), "xx" (centered
    interacted with a logistic propensity refit), "beta" (interacted
    coefficient vector), "strat-K" (propensity stratification with K
    requested strata). Every pipeline re-estimates its propensity scores
    from the data it receives.
    """
    if tag == "++":
        return (lambda data: np.array([additive_2sls(data).value]), "tau_c")
    if tag == "x+":
        return (lambda data: np.array([interacted_additive_2sls(data).value]), "tau_c")
    if tag == "xx":

        def run_xx(data: Dataset) -> np.ndarray:
            prop = fit_propensity(data, "logistic")
            return np.array([centered_interacted_2sls(data, prop).value])

        return (run_xx, "tau_c")
    if tag == "beta":
        return (lambda data: interacted_2sls(data).beta, "beta_c")
    match = _STRAT_TAG.match(tag)
    if match:
        strata = int(match.group(1))
        if strata < 1:
            raise ValueError(f"stratum count in {tag!r} must be positive")

        def run_strat(data: Dataset) -> np.ndarray:
            prop = fit_propensity(data, "logistic")
            return np.array([stratified_late(data, prop, strata).tau_star])

        return (run_strat, "tau_c")
    raise ValueError(f"unknown estimator tag {tag!r}")


def study_truth(spec: DgpSpec, kind: str) -> np.ndarray:
    """True value of an estimand: oracle when enumerable, registered otherwise."""
    if kind == "tau_c":
        if spec.cells is not None:
            return np.array([oracle_estimands(spec).tau_c])
        if spec.tau_c_value is not None:
            return np.array([spec.tau_c_value])
    elif kind == "beta_c":
        if spec.cells is not None:
            return oracle_estimands(spec).beta_c
        if spec.beta_c_value is not None:
            return np.array(spec.beta_c_value, dtype=float)
    else:
        raise ValueError(f"unknown truth kind {kind!r}")
    raise InvalidSpecError(f"design {spec.name!r} registers no truth for {kind}")


def run_study(
    spec: DgpSpec,
    estimators: list[str],
    reps: int,
    n: int,
    seed: int,
    keep_estimates: bool = False,
) -> McSummary:
    """Replicate the design and summarize estimator bias and spread.

    Replicate r draws from the stream (seed, r); failures of in-sample
    identification are counted per estimator and excluded from the
    summaries. With ``keep_estimates`` the per-replicate estimates are
    retained for plotting or tail checks.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    resolved = {tag: pipeline_for(tag) for tag in estimators}
    truth = {tag: study_truth(spec, kind) for tag, (_, kind) in resolved.items()}

    draws: dict[str, list[np.ndarray]] = {tag: [] for tag in estimators}
    failures = {tag: 0 for tag in estimators}
    for r in range(reps):
        data, _ = generate(spec, n, seed, replicate=r)
        for tag, (fn, _) in resolved.items():
            try:
                draws[tag].append(np.atleast_1d(np.asarray(fn(data), dtype=float)))
            except IdentificationError:
                failures[tag] += 1

    bias: dict[str, np.ndarray] = {}
    sd: dict[str, np.ndarray] = {}
    kept: dict[str, np.ndarray] = {}
    for tag in estimators:
        stacked = np.vstack(draws[tag]) if draws[tag] else np.empty((0, truth[tag].size))
        kept[tag] = stacked
        if stacked.shape[0] == 0:
            bias[tag] = np.full(truth[tag].size, np.nan)
            sd[tag] = np.full(truth[tag].size, np.nan)
        else:
            bias[tag] = stacked.mean(axis=0) - truth[tag]
            sd[tag] = stacked.std(axis=0, ddof=1) if stacked.shape[0] > 1 else np.zeros(truth[tag].size)
    return McSummary(
        dgp=spec.name,
        n=n,
        reps=reps,
        seed=seed,
        truth=truth,
        bias=bias,
        sd=sd,
        failures=failures,
        estimates=kept if keep_estimates else None,
    )


def regressogram_deviation(
    spec: DgpSpec, n: int, reps: int, k: int, seed: int
) -> float:
    """Mean absolute deviation of stratum estimates from stratum-averaged effects.

    For each replicate, compares the per-stratum estimates against the
    average individual effect of the units in each stratum (for the
    bundled quadratic design, the stratum-averaged squared propensity).
    Identification failures are skipped.
    """
    deviations = []
    for r in range(reps):
        data, latent = generate(spec, n, seed, replicate=r)
        try:
            prop = fit_propensity(data, "logistic")
            result = stratified_late(data, prop, k)
        except IdentificationError:
            continue
        per_stratum = []
        for j in range(1, result.partition.k + 1):
            mask = result.partition.labels == j
            per_stratum.append(abs(result.beta_star[j - 1] - latent.tau[mask].mean()))
        deviations.append(float(np.mean(per_stratum)))
    if not deviations:
        raise IdentificationError("every replicate failed stratification")
    return float(np.mean(deviations))
