"""Brute-force verification oracles.

Everything here estimates posterior or compensator quantities straight
from the definitions: draw change-sets from the prior, weight them by the
conditional Poisson likelihood of the observed pattern, and average.  No
code is shared with the production posterior engine beyond the exact
staircase geometry, so agreement between the two is a genuine check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .geometry import (
    GridSpec,
    LayerBatch,
    batch_complement_areas,
    batch_generator_counts,
    batch_node_membership,
    batch_point_membership,
)
from .priors import (
    DetectionParams,
    PriorModel,
    compensator_integral,
    sample_changeset_batch,
)
from .simulate import PointPattern

# Importance weights degenerate when the effective sample size drops below
# this fraction of the nominal sample count.
ESS_WARN_FRACTION = 1.0 / 20.0


@dataclass(frozen=True)
class OracleEstimate:
    estimate: float
    se: float
    ess: float
    samples: int


@dataclass(frozen=True)
class CompensatorVerdict:
    mc_mean: float
    mc_se: float
    integral: float
    passed: bool

    def as_lines(self) -> list[str]:
        return [
            f"estimate = {self.mc_mean!r}",
            f"se = {self.mc_se!r}",
            f"reference = {self.integral!r}",
            f"pass = {'true' if self.passed else 'false'}",
        ]


def _pattern_log_weights(pattern: PointPattern, batch: LayerBatch,
                         params: DetectionParams, t1: np.ndarray,
                         t2: np.ndarray) -> np.ndarray:
    """Log-likelihood of the pattern restricted to ``[0, t]`` per layer.

    Uses the four-factor Poisson likelihood (off-region rate, off-region
    count, on-region rate, on-region count), which stays valid at
    ``mu0 = 0`` with the convention ``0 log 0 = 0``.  Shape ``(m, nx, ny)``.
    """
    comp = batch_complement_areas(batch, t1, t2)       # |[0,t] \ xi|
    inter = np.multiply.outer(t1, t2)[None, :, :] - comp
    pts = pattern.points
    if pts.shape[0]:
        in_layer = batch_point_membership(batch, pts)  # (m, k)
        in_x = pts[None, :, 0] <= t1[:, None]          # (nx, k)
        in_y = pts[None, :, 1] <= t2[:, None]          # (ny, k)
        # counts inside [0,t] split by layer membership
        on = np.einsum("mk,xk,yk->mxy", in_layer.astype(np.float64),
                       in_x.astype(np.float64), in_y.astype(np.float64))
        total = np.einsum("xk,yk->xy", in_x.astype(np.float64),
                          in_y.astype(np.float64))[None, :, :]
        off = total - on
    else:
        on = off = np.zeros_like(comp)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mu0 = np.log(params.mu0) if params.mu0 > 0.0 else -np.inf
        off_term = np.where(off > 0, off * log_mu0, 0.0)
    return -params.mu0 * comp + off_term - params.mu1 * inter + on * np.log(params.mu1)


def importance_posterior_lattice(pattern: PointPattern, prior: PriorModel,
                                 t1: np.ndarray, t2: np.ndarray,
                                 params: DetectionParams, m: int,
                                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Self-normalized importance-sampling posterior of "no change yet".

    One set of prior draws is shared by every node of the ``t1 × t2``
    lattice.  Returns arrays (estimate, se, ess) of shape ``(nx, ny)``.
    The standard error is the delta-method one for a self-normalized
    ratio; entries with all-zero weights come back NaN.
    """
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    batch = sample_changeset_batch(prior, GridSpec(params.r, 1), m, rng)
    logw = _pattern_log_weights(pattern, batch, params, t1, t2)
    no_change = ~batch_node_membership(batch, t1, t2)  # indicator t not in xi

    finite = np.isfinite(logw)
    shift = np.where(finite.any(axis=0), logw.max(axis=0, where=finite, initial=-np.inf), 0.0)
    w = np.where(finite, np.exp(logw - shift[None, :, :]), 0.0)
    wsum = w.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        wbar = w / wsum[None, :, :]
        est = (wbar * no_change).sum(axis=0)
        se = np.sqrt((wbar ** 2 * (no_change - est[None, :, :]) ** 2).sum(axis=0))
        ess = 1.0 / (wbar ** 2).sum(axis=0)
    dead = wsum <= 0.0
    est[dead] = np.nan
    se[dead] = np.nan
    ess[dead] = 0.0
    return est, se, ess


def is_posterior_oracle(pattern: PointPattern, prior: PriorModel, t,
                        params: DetectionParams, m: int,
                        rng: np.random.Generator) -> OracleEstimate:
    """Posterior P(no change at ``t`` | pattern in ``[0,t]``) by importance
    sampling from the prior, with a delta-method standard error."""
    if m < 100:
        raise ValueError("need at least 100 importance samples")
    est, se, ess = importance_posterior_lattice(
        pattern, prior, np.array([t[0]]), np.array([t[1]]), params, m, rng)
    ess_val = float(ess[0, 0])
    if ess_val < m * ESS_WARN_FRACTION:
        warnings.warn(
            f"importance weights are degenerate: ESS {ess_val:.1f} of {m}",
            RuntimeWarning, stacklevel=2)
    return OracleEstimate(float(est[0, 0]), float(se[0, 0]), ess_val, m)


def compensator_oracle(prior: PriorModel, t, reps: int,
                       rng: np.random.Generator) -> CompensatorVerdict:
    """Check E[#generators in [0,t]] against the hazard integral.

    The Monte Carlo side counts minimal points of fresh prior draws; the
    reference side integrates ``hazard × P(no generator yet)`` over
    ``[0, t]``.  Passes when they agree within three standard errors.
    """
    if reps < 1000:
        raise ValueError("need at least 1000 replications")
    window = GridSpec(max(float(t[0]), float(t[1]), 1e-9), 1)
    batch = sample_changeset_batch(prior, window, reps, rng)
    counts = batch_generator_counts(batch, np.array([float(t[0])]),
                                    np.array([float(t[1])]))[:, 0, 0]
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / np.sqrt(reps))
    ref = compensator_integral(prior, t)
    passed = abs(mean - ref) <= 3.0 * se if se > 0 else mean == ref
    return CompensatorVerdict(mean, se, ref, passed)


def discrete_bayes_oracle(pattern: PointPattern, prior: PriorModel, grid_k: int,
                          params: DetectionParams, m: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Grid-discretized Bayes posterior of "no change yet" per node.

    The window is cut into ``grid_k × grid_k`` cells; given a sampled
    change-set, each cell's count is Poisson with the rate picked by the
    cell center's membership.  Exact discrete-likelihood weighting over the
    sampled change-sets then gives the posterior at every cell-corner node,
    conditioning only on the cells inside ``[0, node]``.  Returns a
    ``(grid_k+1, grid_k+1)`` array.
    """
    if grid_k > 8:
        raise ValueError("discrete oracle is enumeration-scale: grid_k <= 8")
    r = params.r
    h = r / grid_k
    edges = np.arange(grid_k + 1) * h
    nodes = edges
    batch = sample_changeset_batch(prior, GridSpec(r, 1), m, rng)

    centers = (np.arange(grid_k) + 0.5) * h
    cpts = np.stack(np.meshgrid(centers, centers, indexing="ij"), axis=-1).reshape(-1, 2)
    member = batch_point_membership(batch, cpts).reshape(m, grid_k, grid_k)
    rate = params.mu0 + params.delta * member  # (m, k, k)

    counts, _, _ = np.histogram2d(pattern.points[:, 0], pattern.points[:, 1],
                                  bins=[edges, edges])
    area = h * h
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rate_area = np.log(rate * area)  # -inf on zero-rate cells
        cell_ll = np.where(
            counts[None, :, :] > 0,
            counts[None, :, :] * log_rate_area - gammaln(counts + 1.0)[None, :, :],
            0.0,
        ) - rate * area

    # cumulative log-likelihood of all cells inside [0, node]
    cum = np.zeros((m, grid_k + 1, grid_k + 1))
    cum[:, 1:, 1:] = np.cumsum(np.cumsum(cell_ll, axis=1), axis=2)
    no_change = ~batch_node_membership(batch, nodes, nodes)

    finite = np.isfinite(cum)
    shift = np.where(finite.any(axis=0), cum.max(axis=0, where=finite, initial=-np.inf), 0.0)
    w = np.where(finite, np.exp(cum - shift[None, :, :]), 0.0)
    wsum = w.sum(axis=0)
    with np.errstate(invalid="ignore"):
        post = (w * no_change).sum(axis=0) / wsum
    post[wsum <= 0.0] = np.nan
    return post
