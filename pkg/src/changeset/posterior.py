"""Posterior machinery for sequential change-set detection.

For a node ``t`` of the evaluation grid, the posterior probability that no
change has occurred anywhere in ``[0, t]`` given the observations there is

    post(t) = 1 / (1 + odds_factor(t) * evidence(t)),

where ``odds_factor`` comes from the prior alone (see :mod:`.priors`) and
the *evidence integral*

    evidence(t) = E_xi[ 1{t in xi} * exp((mu1-mu0) |[0,t] \\ xi|)
                                   * (mu1/mu0)^{#observations in [0,t] ∩ xi} ]

averages the change-branch likelihood ratio over the prior.  Two
estimators are provided:

* exact tensor Gauss-Legendre quadrature for single-jump priors, with the
  integration domain partitioned at observed point coordinates so the
  count factor is constant per panel;
* a common-random-numbers Monte Carlo average over one set of prior draws
  shared by every node, which makes the estimated field coordinatewise
  nondecreasing *pathwise* — each term is nondecreasing in ``t`` for a
  fixed draw — so the detector's staircase structure is exact, not just in
  expectation.

All likelihood products are accumulated in log space or as fixed-order
sums of nonnegative monotone terms; the final posterior field is assembled
through monotone floating-point operations only, so a hazard that is
coordinatewise nonincreasing and an odds factor that is nondecreasing
yield a field whose nonpositive set is exactly a grid upper layer.

The gain rate observable at ``t`` is

    V(t) = -c1 + (c0 + c1 + k1 * hazard(t)) * post(t),

and its support-estimation variant (``mu0 = 0``) multiplies the posterior
by the indicator that ``[0, t]`` contains no observation, with the
evidence integral losing its count factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    GridSpec,
    LayerBatch,
    UpperLayer,
    area_in_rect,
    batch_point_membership,
    contains,
    contains_many,
)
from .priors import (
    DetectionParams,
    PriorModel,
    hazard_grid,
    log_odds_factor_grid,
    prob_no_jump_grid,
    sample_changeset_batch,
    weak_hazard,
)
from .simulate import PointPattern

# Linear-space term accumulation is used while exponents stay below these
# bounds (float32 under the first, float64 under the second); beyond that a
# constant log-shift keeps the partial sums finite.
_F32_EXP_BOUND = 80.0
_F64_EXP_BOUND = 600.0
_CHUNK = 1024


class QuadratureNonconvergenceError(RuntimeError):
    """Doubling the quadrature order moved the evidence integral too much."""


@dataclass(frozen=True)
class EvidenceEstimator:
    """How to evaluate the evidence integral.

    ``mode`` is ``"exact"`` (tensor quadrature, single-jump priors only) or
    ``"mc"`` (shared-draw Monte Carlo, any prior).  Monte Carlo estimators
    carry the prior draws, made once per observation and reused at every
    node.
    """

    mode: str
    quadrature_order: int = 16
    convergence_check: bool = True
    q_samples: int = 4096
    batch: Optional[LayerBatch] = None
    seed_label: str = ""

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be 'exact' or 'mc'")
        if self.mode == "mc" and (self.batch is None or self.q_samples < 1):
            raise ValueError("mc estimator needs a positive number of shared draws")
        if self.mode == "exact" and self.quadrature_order < 2:
            raise ValueError("quadrature order must be at least 2")

    @property
    def descriptor(self) -> str:
        return "exact-quadrature" if self.mode == "exact" else "common-random-numbers-MC"


def make_exact_estimator(order: int = 16, convergence_check: bool = True) -> EvidenceEstimator:
    return EvidenceEstimator(mode="exact", quadrature_order=order,
                             convergence_check=convergence_check)


def make_mc_estimator(prior: PriorModel, params: DetectionParams,
                      rng: np.random.Generator, q_samples: int = 4096,
                      seed_label: str = "") -> EvidenceEstimator:
    """Draw the shared prior sample for one observation."""
    batch = sample_changeset_batch(prior, GridSpec(params.r, 1), q_samples, rng)
    return EvidenceEstimator(mode="mc", q_samples=q_samples, batch=batch,
                             seed_label=seed_label)


# ---------------------------------------------------------------------------
# Likelihoods
# ---------------------------------------------------------------------------

def log_lik_given_changeset(pattern: PointPattern, xi: UpperLayer, t,
                            params: DetectionParams) -> float:
    """Log-likelihood of the pattern restricted to ``[0, t]`` given ``xi``:

    ``-mu0 |[0,t]| + N_t log mu0 - (mu1-mu0) |[0,t] ∩ xi|
    + N([0,t] ∩ xi) log(mu1/mu0)``.

    Observations outside ``[0, t]`` do not enter.  Requires ``mu0 > 0``.
    """
    if params.mu0 <= 0.0:
        raise ValueError("this likelihood form requires mu0 > 0")
    t1, t2 = float(t[0]), float(t[1])
    pts = pattern.points
    inside = (pts[:, 0] <= t1) & (pts[:, 1] <= t2) if pts.size else np.zeros(0, bool)
    n_t = int(np.count_nonzero(inside))
    if n_t:
        n_on = int(np.count_nonzero(contains_many(xi, pts[inside])))
    else:
        n_on = 0
    inter = area_in_rect(xi, (t1, t2))
    return (-params.mu0 * t1 * t2 + n_t * math.log(params.mu0)
            - params.delta * inter + n_on * math.log(params.mu1 / params.mu0))


def pattern_counts_grid(pattern: PointPattern, xs: np.ndarray,
                        ys: np.ndarray) -> np.ndarray:
    """Number of observations in ``[0, (x, y)]`` per node, shape (nx, ny)."""
    pts = pattern.points
    out = np.zeros((xs.size, ys.size), dtype=np.int64)
    for px, py in pts:
        out += np.outer(xs >= px, ys >= py)
    return out


# ---------------------------------------------------------------------------
# Evidence integral: exact quadrature (single-jump priors)
# ---------------------------------------------------------------------------

def _density_values(prior: PriorModel, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    if prior.kind == "single_jump_exp":
        g = prior.gamma
        return (g * g) * np.exp(-g * (y1 + y2))
    table = prior.density
    flat = np.vectorize(table.density_at)(y1, y2)
    return np.asarray(flat, dtype=float)


def _breaks(limit: float, coords: np.ndarray, extra: np.ndarray) -> np.ndarray:
    vals = [0.0, limit]
    vals.extend(float(c) for c in coords if 0.0 < c < limit)
    vals.extend(float(c) for c in extra if 0.0 < c < limit)
    return np.unique(np.asarray(vals))


def _exact_evidence(pattern: PointPattern, prior: PriorModel, t,
                    params: DetectionParams, order: int,
                    count_factor: bool) -> float:
    """Tensor Gauss-Legendre evaluation of the evidence integral.

    The generator position ``y`` ranges over ``[0, t]``; panels are cut at
    observed point coordinates (and density-table lines), so the count of
    observations northeast of ``y`` is constant per panel and only the
    smooth exponential-density part is integrated numerically.
    """
    t1, t2 = float(t[0]), float(t[1])
    if t1 <= 0.0 or t2 <= 0.0:
        return 0.0
    coef = params.delta if count_factor else params.mu1
    pts = pattern.points
    inside = (pts[:, 0] <= t1) & (pts[:, 1] <= t2) if pts.size else np.zeros(0, bool)
    pin = pts[inside] if pts.size else np.empty((0, 2))
    table_lines = (prior.density.grid.axis() if prior.kind == "single_jump_density"
                   else np.empty(0))
    bx = _breaks(t1, pin[:, 0] if count_factor else np.empty(0), table_lines)
    by = _breaks(t2, pin[:, 1] if count_factor else np.empty(0), table_lines)

    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (nodes + 1.0)

    # quadrature nodes per panel, flattened: (npanels_x * order,)
    def panel_nodes(breaks):
        lo, hi = breaks[:-1], breaks[1:]
        pts_ = lo[:, None] + (hi - lo)[:, None] * half[None, :]
        w_ = 0.5 * (hi - lo)[:, None] * weights[None, :]
        return pts_.ravel(), w_.ravel(), lo.size

    y1, w1, nxp = panel_nodes(bx)
    y2, w2, nyp = panel_nodes(by)
    expo = coef * (t1 * t2 - (t1 - y1)[:, None] * (t2 - y2)[None, :])
    vals = np.exp(expo) * _density_values(prior, y1[:, None], y2[None, :])
    panel = (w1[:, None] * vals * w2[None, :]).reshape(nxp, order, nyp, order)
    panel = panel.sum(axis=(1, 3))  # (nxp, nyp)

    if count_factor and pin.shape[0]:
        rho = params.mu1 / params.mu0
        right, top = bx[1:], by[1:]
        counts = ((pin[None, :, 0] >= right[:, None]).astype(np.int64)[:, None, :]
                  * (pin[None, :, 1] >= top[:, None]).astype(np.int64)[None, :, :]).sum(axis=2)
        panel = panel * np.power(rho, counts)
    return float(panel.sum())


def evidence_exact_single_jump(pattern: PointPattern, prior: PriorModel, t,
                               params: DetectionParams,
                               est: EvidenceEstimator) -> float:
    """Exact-quadrature evidence integral for a single-jump prior.

    With the convergence check enabled, the order is doubled and the
    refined value returned; a relative shift above 1e-8 raises
    :class:`QuadratureNonconvergenceError`.
    """
    if not prior.is_single_jump:
        raise ValueError("exact evidence requires a single-jump prior")
    q1 = _exact_evidence(pattern, prior, t, params, est.quadrature_order, True)
    if not est.convergence_check:
        return q1
    q2 = _exact_evidence(pattern, prior, t, params, 2 * est.quadrature_order, True)
    scale = max(abs(q1), abs(q2), 1e-300)
    if abs(q1 - q2) / scale > 1e-8:
        raise QuadratureNonconvergenceError(
            f"evidence at t={tuple(t)} moved {abs(q1 - q2) / scale:.2e} on order doubling")
    return q2


# ---------------------------------------------------------------------------
# Evidence integral: shared-draw Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _McEvidence:
    log_value: np.ndarray  # (nx, ny) log of the evidence estimate
    value: np.ndarray      # exp(log_value); may overflow to inf
    se: np.ndarray | None  # linear-scale standard error, None if not requested


def _mc_evidence_grid(pattern: PointPattern, batch: LayerBatch,
                      params: DetectionParams, xs: np.ndarray, ys: np.ndarray,
                      count_factor: bool, want_se: bool) -> _McEvidence:
    """Fused common-random-numbers evaluation on the ``xs × ys`` grid.

    Per draw and node the log term ``coef * |[0,t] \\ xi| + count * log rho``
    is assembled by one batched matrix product over staircase segments (and
    one pseudo-segment per observed point), exponentiated, gated by the
    node-membership indicator and mean-reduced in a fixed order.  Every
    operation is monotone in each grid coordinate, so the resulting field
    is exactly coordinatewise nondecreasing, draw by draw.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    m = batch.size
    coef = params.delta if count_factor else params.mu1
    pts = pattern.points if count_factor else np.empty((0, 2))
    npts = pts.shape[0]
    lnrho = math.log(params.mu1 / params.mu0) if (count_factor and params.mu0 > 0) else 0.0
    if count_factor and params.mu0 <= 0.0:
        raise ValueError("the count-factor evidence integral requires mu0 > 0")

    bound = coef * float(xs.max()) * float(ys.max()) + npts * max(lnrho, 0.0)
    shift = max(0.0, bound - _F64_EXP_BOUND)
    dtype = np.float32 if (shift == 0.0 and bound <= _F32_EXP_BOUND) else np.float64

    xs32 = xs.astype(dtype)
    ys32 = ys.astype(dtype)
    if npts:
        memb = batch_point_membership(batch, pts)
        step_x = (xs[None, :] >= pts[:, 0][:, None]).astype(dtype)  # (npts, nx)
        step_y = (ys[None, :] >= pts[:, 1][:, None]).astype(dtype)  # (npts, ny)

    S = batch.seg_start.shape[1]
    K = S + npts
    nx, ny = xs.size, ys.size
    total = np.zeros((nx, ny))
    total_sq = np.zeros((nx, ny)) if want_se else None

    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        cm = hi - lo
        start = batch.seg_start[lo:hi].astype(dtype)
        width = batch.seg_width[lo:hi].astype(dtype)
        floor = batch.seg_floor[lo:hi].astype(dtype)

        A = np.empty((cm, nx, K), dtype=dtype)
        np.clip(xs32[None, :, None] - start[:, None, :], 0.0,
                width[:, None, :], out=A[:, :, :S])
        A[:, :, :S] *= dtype(coef)
        B = np.empty((cm, K, ny), dtype=dtype)
        np.minimum(ys32[None, None, :], floor[:, :, None], out=B[:, :S, :])
        if npts:
            A[:, :, S:] = (lnrho * memb[lo:hi][:, None, :].astype(dtype)
                           * step_x.T[None, :, :])
            B[:, S:, :] = np.broadcast_to(step_y[None, :, :], (cm, npts, ny))

        E = A @ B
        if shift:
            E -= dtype(shift)
        terms = np.exp(E, out=E)
        covered = start[:, None, :] <= xs32[None, :, None]          # (cm, nx, S)
        profile = np.where(covered, floor[:, None, :], np.inf).min(axis=2)
        gate = profile[:, :, None] <= ys32[None, None, :]
        terms *= gate
        total += terms.sum(axis=0, dtype=np.float64)
        if want_se:
            total_sq += (terms.astype(np.float64) ** 2).sum(axis=0)

    value_scaled = total / m
    with np.errstate(divide="ignore"):
        log_value = np.log(value_scaled) + shift
    value = np.exp(log_value)
    se = None
    if want_se:
        var = np.maximum(total_sq - total ** 2 / m, 0.0) / max(m - 1, 1)
        se = np.sqrt(var / m) * math.exp(shift)
    return _McEvidence(log_value=log_value, value=value, se=se)


def evidence_montecarlo(pattern: PointPattern, prior: PriorModel, t,
                        params: DetectionParams,
                        est: EvidenceEstimator) -> float:
    """Shared-draw Monte Carlo evidence integral at a single point."""
    if est.mode != "mc":
        raise ValueError("estimator carries no shared draws")
    res = _mc_evidence_grid(pattern, est.batch, params,
                            np.array([float(t[0])]), np.array([float(t[1])]),
                            count_factor=True, want_se=False)
    return float(res.value[0, 0])


def evidence_montecarlo_se(pattern: PointPattern, prior: PriorModel, t,
                           params: DetectionParams,
                           est: EvidenceEstimator) -> tuple[float, float]:
    """Evidence estimate with its Monte Carlo standard error."""
    res = _mc_evidence_grid(pattern, est.batch, params,
                            np.array([float(t[0])]), np.array([float(t[1])]),
                            count_factor=True, want_se=True)
    return float(res.value[0, 0]), float(res.se[0, 0])


# ---------------------------------------------------------------------------
# Posterior and gain-rate fields
# ---------------------------------------------------------------------------

def _sigmoid_neg(s: np.ndarray) -> np.ndarray:
    """``1 / (1 + e^s)`` through strictly monotone float operations."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s > 0.0
    out[~pos] = 1.0 / (1.0 + np.exp(s[~pos]))
    out[pos] = 1.0 - 1.0 / (1.0 + np.exp(-s[pos]))
    return out


def posterior_no_change(pattern: PointPattern, prior: PriorModel, t,
                        params: DetectionParams,
                        est: EvidenceEstimator) -> float:
    """P(no change anywhere in ``[0, t]`` | observations in ``[0, t]``).

    Returns 0 where the prior itself forbids "no change" (zero mass on an
    empty ``[0, t]``), and 1 on the axes where the evidence vanishes.
    """
    from .priors import prob_no_jump
    t1 = np.asarray(float(t[0]))
    t2 = np.asarray(float(t[1]))
    if prob_no_jump(prior, t) <= 0.0:
        return 0.0
    if est.mode == "exact":
        q_val = evidence_exact_single_jump(pattern, prior, t, params, est)
        with np.errstate(divide="ignore"):
            log_ev = np.log(q_val)
    else:
        log_ev = _mc_evidence_grid(pattern, est.batch, params,
                                   np.atleast_1d(t1), np.atleast_1d(t2),
                                   count_factor=True, want_se=False).log_value[0, 0]
    s = float(log_odds_factor_grid(prior, t1, t2, params)) + float(log_ev)
    return float(_sigmoid_neg(np.asarray(s)))


def true_gain_rate(xi: UpperLayer, prior: PriorModel, t,
                   params: DetectionParams) -> float:
    """Gain rate using the unobservable truth: ``-c1`` on the change region,
    ``c0 + k1 * hazard`` off it.  Exposed for verification only."""
    lam = weak_hazard(prior, t)
    x = 0.0 if contains(xi, t) else 1.0
    return -params.c1 + (params.c0 + params.c1 + params.k1 * lam) * x


@dataclass(frozen=True)
class PosteriorField:
    """Gain-rate field on a grid, with posterior diagnostics.

    ``values[i, j]`` is the field at node ``(i*r/n, j*r/n)``.  On axis
    nodes the posterior is one by convention (both named priors put no
    generator mass on the axes), so the field equals ``c0 + k1 * hazard``
    there.
    """

    grid: GridSpec
    values: np.ndarray
    params: DetectionParams
    prior_id: str
    mc_meta: dict = field(default_factory=dict)
    posterior: np.ndarray | None = None
    posterior_se: np.ndarray | None = None
    hazard: np.ndarray | None = None
    log_evidence: np.ndarray | None = None
    evidence_se: np.ndarray | None = None
    support_mode: bool = False


def _assemble_field(grid: GridSpec, prior: PriorModel, params: DetectionParams,
                    log_ev: np.ndarray, ev_se, indicator,
                    est: EvidenceEstimator, seed_label: str,
                    support: bool) -> PosteriorField:
    axis = grid.axis()
    lam = hazard_grid(prior, axis[:, None], axis[None, :])
    pnj = prob_no_jump_grid(prior, axis[:, None], axis[None, :])
    log_odds = log_odds_factor_grid(prior, axis[:, None], axis[None, :], params)
    with np.errstate(invalid="ignore"):
        post = _sigmoid_neg(log_odds + log_ev)
    post = np.where(pnj > 0.0, post, 0.0)
    if indicator is not None:
        post = post * indicator
    weight = params.c0 + params.c1 + params.k1 * lam
    values = -params.c1 + weight * post

    post_se = None
    if ev_se is not None:
        # delta method: |d post / d evidence| = odds_factor * post^2
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.exp(log_odds + 2.0 * np.log(np.where(post > 0, post, 1.0)))
        post_se = np.where(post > 0, ev_se * factor, 0.0)
        if indicator is not None:
            post_se = post_se * indicator
    return PosteriorField(
        grid=grid, values=values, params=params, prior_id=prior.describe(),
        mc_meta={"estimator": est.descriptor, "q_samples": est.q_samples,
                 "quadrature_order": est.quadrature_order, "seed": seed_label},
        posterior=post, posterior_se=post_se, hazard=lam,
        log_evidence=log_ev, evidence_se=ev_se, support_mode=support,
    )


def compute_posterior_field(pattern: PointPattern, prior: PriorModel,
                            params: DetectionParams, grid: GridSpec,
                            est: EvidenceEstimator,
                            want_se: bool = True) -> PosteriorField:
    """Gain-rate field ``-c1 + (c0 + c1 + k1 hazard) * posterior`` at every
    grid node.  Deterministic given the pattern and the estimator."""
    if params.mu0 <= 0.0:
        raise ValueError("the main detection field requires mu1 > mu0 > 0; "
                         "use the support-estimation field for mu0 = 0")
    axis = grid.axis()
    if est.mode == "exact":
        log_ev = np.full((axis.size, axis.size), -np.inf)
        for i in range(1, axis.size):
            for j in range(1, axis.size):
                q_val = evidence_exact_single_jump(
                    pattern, prior, (axis[i], axis[j]), params, est)
                with np.errstate(divide="ignore"):
                    log_ev[i, j] = np.log(q_val)
        ev_se = np.zeros_like(log_ev) if want_se else None
    else:
        res = _mc_evidence_grid(pattern, est.batch, params, axis, axis,
                                count_factor=True, want_se=want_se)
        log_ev, ev_se = res.log_value, res.se
    return _assemble_field(grid, prior, params, log_ev, ev_se, None, est,
                           est.seed_label, support=False)


def compute_posterior_field_support(pattern: PointPattern, prior: PriorModel,
                                    params: DetectionParams, grid: GridSpec,
                                    est: EvidenceEstimator,
                                    want_se: bool = True) -> PosteriorField:
    """Support-estimation variant for ``mu0 = 0``.

    The posterior factor carries the indicator that ``[0, t]`` holds no
    observation (any observed point certifies the change), and the
    evidence integral drops its count factor.
    """
    if not params.support_mode:
        raise ValueError("support estimation requires mu0 = 0")
    axis = grid.axis()
    indicator = (pattern_counts_grid(pattern, axis, axis) == 0).astype(float)
    if est.mode == "exact":
        log_ev = np.full((axis.size, axis.size), -np.inf)
        for i in range(1, axis.size):
            for j in range(1, axis.size):
                q1 = _exact_evidence(pattern, prior, (axis[i], axis[j]), params,
                                     est.quadrature_order, False)
                if est.convergence_check:
                    q2 = _exact_evidence(pattern, prior, (axis[i], axis[j]), params,
                                         2 * est.quadrature_order, False)
                    if abs(q1 - q2) / max(abs(q1), abs(q2), 1e-300) > 1e-8:
                        raise QuadratureNonconvergenceError(
                            f"support evidence at node ({i},{j}) failed refinement")
                    q1 = q2
                with np.errstate(divide="ignore"):
                    log_ev[i, j] = np.log(q1)
        ev_se = np.zeros_like(log_ev) if want_se else None
    else:
        res = _mc_evidence_grid(pattern, est.batch, params, axis, axis,
                                count_factor=False, want_se=want_se)
        log_ev, ev_se = res.log_value, res.se
    return _assemble_field(grid, prior, params, log_ev, ev_se, indicator, est,
                           est.seed_label, support=True)


# ---------------------------------------------------------------------------
# Whole-pattern likelihood (decomposition diagnostics)
# ---------------------------------------------------------------------------

def log_pattern_likelihood(pattern: PointPattern, prior: PriorModel, t,
                           params: DetectionParams,
                           est: EvidenceEstimator) -> float:
    """Log-likelihood of the pattern restricted to ``[0, t]``:

    the no-change branch ``P(no generator) e^{-mu0|A|} mu0^{N}`` plus the
    change branch carried by the evidence integral.
    """
    from .priors import prob_no_jump
    t1, t2 = float(t[0]), float(t[1])
    pts = pattern.points
    n_t = int(np.count_nonzero((pts[:, 0] <= t1) & (pts[:, 1] <= t2))) if pts.size else 0
    base = -params.mu0 * t1 * t2 + n_t * math.log(params.mu0)
    if est.mode == "exact":
        q_val = evidence_exact_single_jump(pattern, prior, t, params, est)
    else:
        q_val = evidence_montecarlo(pattern, prior, t, params, est)
    pnj = prob_no_jump(prior, t)
    branch_no = math.log(pnj) if pnj > 0 else -math.inf
    with np.errstate(divide="ignore"):
        branch_yes = -params.delta * t1 * t2 + (math.log(q_val) if q_val > 0 else -math.inf)
    return base + float(np.logaddexp(branch_no, branch_yes))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def field_to_csv(fld: PosteriorField) -> str:
    """Rows ``t1,t2,value`` in row-major node order (t2 rows outermost)."""
    axis = fld.grid.axis()
    lines = ["t1,t2,V"]
    for j in range(fld.grid.n + 1):
        for i in range(fld.grid.n + 1):
            lines.append(f"{float(axis[i])!r},{float(axis[j])!r},{float(fld.values[i, j])!r}")
    return "\n".join(lines) + "\n"


def field_metadata(fld: PosteriorField) -> str:
    p = fld.params
    meta = {
        "estimator": fld.mc_meta.get("estimator", ""),
        "q_samples": fld.mc_meta.get("q_samples", ""),
        "quadrature_order": fld.mc_meta.get("quadrature_order", ""),
        "seed": fld.mc_meta.get("seed", ""),
        "prior": fld.prior_id,
        "mu0": repr(float(p.mu0)), "mu1": repr(float(p.mu1)),
        "c0": repr(float(p.c0)), "c1": repr(float(p.c1)),
        "k0": repr(float(p.k0)), "k1": repr(float(p.k1)),
        "r": repr(float(p.r)), "n": fld.grid.n,
        "support_mode": str(fld.support_mode).lower(),
    }
    return "".join(f"{k} = {v}\n" for k, v in meta.items())
