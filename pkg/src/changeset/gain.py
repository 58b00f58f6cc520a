"""Gain evaluation and paired Monte Carlo comparison of detectors.

The gain of stopping with a (grid-resolved) lower layer ``B`` against the
true change region is

    c0 |B \\ xi| - c1 |B ∩ xi| + k0 + k1 * (generators of xi inside B),

with areas exact per cell and generators on the closed boundary of ``B``
counted as inside.  Expected gains are estimated by paired replications:
every detector scores the same (change-set, observation) stream, so
pairwise differences carry small standard errors.

Detector descriptors:

``"optimal"``        first-exit set of the posterior gain-rate field
``"no-info"``        deterministic baseline ignoring the observations
``"empty"``          stop immediately (gain is exactly ``k0``)
``("rect", i, j)``   fixed rectangle up to grid node ``(i, j)``
``"clairvoyant"``    outer grid closure of the true quiet region; uses the
                     unobservable truth, so it is a diagnostic upper bound
                     rather than a stopping set
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    GridSpec,
    LayerMask,
    UpperLayer,
    layer_cell_areas,
    mask_cells,
    generators_in_region,
    is_lower_layer_mask,
)
from .posterior import (
    EvidenceEstimator,
    PosteriorField,
    compute_posterior_field,
    make_mc_estimator,
)
from .priors import (
    FIRST_LINE_POISSON,
    DetectionParams,
    PriorModel,
    hazard_grid,
)
from .detector import StoppingSet, no_info_baseline, stopping_set_from_field
from .simulate import sample_changeset, sample_observation
from . import streams

DetectorKey = object  # str or ("rect", i, j)


def detector_label(key: DetectorKey) -> str:
    if isinstance(key, tuple) and key and key[0] == "rect":
        return f"rect[{key[1]},{key[2]}]"
    return str(key)


def default_competitors(grid: GridSpec) -> list[DetectorKey]:
    """Baseline, empty set and a 3x3 lattice of fixed rectangles."""
    quarter = [grid.n // 4, grid.n // 2, (3 * grid.n) // 4]
    rects = [("rect", i, j) for i in quarter for j in quarter]
    return ["no-info", "empty"] + rects


@dataclass(frozen=True)
class EstimatorSpec:
    """Recipe for building the per-observation evidence estimator."""

    mode: str = "mc"
    q_samples: int = 4096
    quadrature_order: int = 16
    convergence_check: bool = True

    def realize(self, prior: PriorModel, params: DetectionParams,
                rng: np.random.Generator, label: str = "") -> EvidenceEstimator:
        if self.mode == "mc":
            return make_mc_estimator(prior, params, rng, self.q_samples, label)
        from .posterior import make_exact_estimator
        return make_exact_estimator(self.quadrature_order, self.convergence_check)


def gain(B: StoppingSet | LayerMask, xi: UpperLayer, params: DetectionParams) -> float:
    """Exact gain of the region spanned by a lower-layer node mask."""
    mask = B.as_mask() if isinstance(B, StoppingSet) else B
    if not is_lower_layer_mask(mask.member):
        raise ValueError("gain needs a lower-layer mask")
    cells = mask_cells(mask)
    h2 = mask.grid.h * mask.grid.h
    total = float(cells.sum()) * h2
    inter = float(layer_cell_areas(xi, mask.grid)[cells].sum())
    n_gen = generators_in_region(xi, mask)
    return (params.c0 * (total - inter) - params.c1 * inter
            + params.k0 + params.k1 * n_gen)


def clairvoyant_mask(xi: UpperLayer, grid: GridSpec) -> LayerMask:
    """Outer grid closure of the complement of the change region.

    A node is kept unless the half-open cell below-left of it starts
    inside the region, i.e. unless the cell's lower-left corner is already
    covered.  The spanned cells are exactly those meeting the quiet
    region's closure, so the mask dominates every competitor pathwise: it
    captures the full quiet area (up to one cell band) and every generator
    sitting on the region's boundary.
    """
    axis = grid.axis()
    g = xi.generators
    if g.shape[0] == 0:
        member = np.ones((grid.n + 1, grid.n + 1), dtype=bool)
    else:
        covered = np.zeros((grid.n + 1, grid.n + 1), dtype=bool)
        for gx, gy in g:
            covered |= np.multiply.outer(axis >= gx, axis >= gy)
        member = np.ones_like(covered)
        member[1:, 1:] = ~covered[:-1, :-1]
    return LayerMask(grid=grid, member=member, kind="lower")


def rect_mask(grid: GridSpec, i: int, j: int) -> LayerMask:
    member = np.zeros((grid.n + 1, grid.n + 1), dtype=bool)
    member[: i + 1, : j + 1] = True
    return LayerMask(grid=grid, member=member, kind="lower")


def empty_mask(grid: GridSpec) -> LayerMask:
    return LayerMask(grid=grid, member=np.zeros((grid.n + 1, grid.n + 1), dtype=bool),
                     kind="lower")


# ---------------------------------------------------------------------------
# Field integrals used by the stopped-gain identity
# ---------------------------------------------------------------------------

def field_integral_over(field: PosteriorField, mask_member: np.ndarray) -> float:
    """Node-cell quadrature of the field over the masked region: each member
    cell contributes its corner average times the cell area."""
    v = field.values
    cellavg = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    cells = np.asarray(mask_member, dtype=bool)[1:, 1:]
    h2 = field.grid.h * field.grid.h
    return float(cellavg[cells].sum()) * h2


def hazard_cell_integrals(prior: PriorModel, grid: GridSpec,
                          order: int = 8) -> np.ndarray:
    """Gauss-Legendre integral of the hazard over every grid cell."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    axis = grid.axis()
    h = grid.h
    pts = axis[:-1, None] + h * 0.5 * (nodes[None, :] + 1.0)   # (n, order)
    w = 0.5 * h * weights
    lam = hazard_grid(prior, pts.ravel()[:, None], pts.ravel()[None, :])
    lam = lam.reshape(grid.n, order, grid.n, order)
    return np.einsum("iajb,a,b->ij", lam, w, w)


def _hazard_rect_integral(prior: PriorModel, lo: tuple, hi: tuple,
                          order: int = 8) -> float:
    if hi[0] <= lo[0] or hi[1] <= lo[1]:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(order)
    x = lo[0] + (hi[0] - lo[0]) * 0.5 * (nodes + 1.0)
    y = lo[1] + (hi[1] - lo[1]) * 0.5 * (nodes + 1.0)
    wx = 0.5 * (hi[0] - lo[0]) * weights
    wy = 0.5 * (hi[1] - lo[1]) * weights
    lam = hazard_grid(prior, x[:, None], y[None, :])
    return float(wx @ lam @ wy)


def hazard_integral_off_region(prior: PriorModel, grid: GridSpec,
                               cells: np.ndarray, xi: UpperLayer,
                               cell_lam: np.ndarray,
                               cell_inter: np.ndarray) -> float:
    """``∫ hazard`` over (masked cells) minus the change region, exactly.

    Constant hazard integrates against the exact off-region area; a
    single-jump region subtracts per-cell quadrature over the (rectangular)
    overlap with the quadrant northeast of the generator.
    """
    h2 = grid.h * grid.h
    if prior.kind == FIRST_LINE_POISSON:
        off_area = float(cells.sum()) * h2 - float(cell_inter[cells].sum())
        return prior.gamma * off_area
    total = float(cell_lam[cells].sum())
    g = xi.generators
    if g.shape[0] == 0:
        return total
    gx, gy = float(g[0, 0]), float(g[0, 1])
    if gx >= grid.r or gy >= grid.r:
        return total
    axis = grid.axis()
    touches = np.multiply.outer(axis[1:] > gx, axis[1:] > gy) & cells
    full = np.multiply.outer(axis[:-1] >= gx, axis[:-1] >= gy) & touches
    sub = float(cell_lam[full].sum())
    for i, j in np.argwhere(touches & ~full):
        sub += _hazard_rect_integral(
            prior, (max(axis[i], gx), max(axis[j], gy)),
            (axis[i + 1], axis[j + 1]))
    return total - sub


# ---------------------------------------------------------------------------
# Replication engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicationResults:
    detectors: list
    gains: np.ndarray               # (reps, D)
    v_integrals: Optional[np.ndarray]   # (reps,) over the optimal set
    martingales: Optional[np.ndarray]   # (reps,) stopped martingale values
    seed: int


def _static_masks(detectors: Sequence[DetectorKey], prior: PriorModel,
                  params: DetectionParams, grid: GridSpec) -> dict:
    out = {}
    for key in detectors:
        if key == "no-info":
            out[key] = no_info_baseline(prior, params, grid).member
        elif key == "empty":
            out[key] = empty_mask(grid).member
        elif isinstance(key, tuple) and key[0] == "rect":
            out[key] = rect_mask(grid, key[1], key[2]).member
    return out


def _run_range(prior: PriorModel, params: DetectionParams, grid: GridSpec,
               spec: EstimatorSpec, seed: int, rep_lo: int, rep_hi: int,
               detectors: Sequence[DetectorKey], projection: bool,
               projection_detector: DetectorKey):
    static = _static_masks(set(detectors) | ({projection_detector} if projection else set()),
                           prior, params, grid)
    needs_field = projection or any(k == "optimal" for k in detectors)
    cell_lam = (hazard_cell_integrals(prior, grid)
                if projection and prior.is_single_jump else None)
    window = grid
    D = len(detectors)
    gains = np.zeros((rep_hi - rep_lo, D))
    v_ints = np.zeros(rep_hi - rep_lo) if projection else None
    marts = np.zeros(rep_hi - rep_lo) if projection else None

    for row, rep in enumerate(range(rep_lo, rep_hi)):
        xi = sample_changeset(prior, window,
                              streams.replication_stream(seed, rep, streams.CHANGESET))
        pattern = sample_observation(
            xi, params, window, streams.replication_stream(seed, rep, streams.OBSERVATION))
        field = None
        rho = None
        if needs_field:
            est = spec.realize(prior, params,
                               streams.replication_stream(seed, rep, streams.QLAYERS),
                               label=f"{seed}/{rep}")
            field = compute_posterior_field(pattern, prior, params, grid, est,
                                            want_se=False)
            rho = stopping_set_from_field(field)

        cell_inter = layer_cell_areas(xi, grid)
        h2 = grid.h * grid.h

        def member_of(key):
            if key == "optimal":
                return rho.member
            if key == "clairvoyant":
                return clairvoyant_mask(xi, grid).member
            return static[key]

        for d, key in enumerate(detectors):
            member = member_of(key)
            cells = member[1:, 1:]
            total = float(cells.sum()) * h2
            inter = float(cell_inter[cells].sum())
            n_gen = generators_in_region(
                xi, LayerMask(grid=grid, member=member, kind="lower"))
            gains[row, d] = (params.c0 * (total - inter) - params.c1 * inter
                             + params.k0 + params.k1 * n_gen)

        if projection:
            member = member_of(projection_detector)
            v_ints[row] = field_integral_over(field, member)
            cells = member[1:, 1:]
            lam_int = hazard_integral_off_region(prior, grid, cells, xi,
                                                 cell_lam, cell_inter)
            n_gen = generators_in_region(
                xi, LayerMask(grid=grid, member=member, kind="lower"))
            marts[row] = n_gen - lam_int
    return gains, v_ints, marts


def run_replications(prior: PriorModel, params: DetectionParams, grid: GridSpec,
                     spec: EstimatorSpec, reps: int, seed: int,
                     detectors: Sequence[DetectorKey], projection: bool = False,
                     projection_detector: DetectorKey = "optimal",
                     threads: int = 1) -> ReplicationResults:
    """Paired replications of all detectors on common (change-set,
    observation) draws.  Replication ``i`` depends only on ``(seed, i)``,
    so results are byte-identical for any ``threads``."""
    detectors = list(detectors)
    if reps < 1:
        raise ValueError("need at least one replication")
    if threads <= 1 or reps < 4:
        gains, v_ints, marts = _run_range(prior, params, grid, spec, seed,
                                          0, reps, detectors, projection,
                                          projection_detector)
    else:
        bounds = np.linspace(0, reps, threads + 1).astype(int)
        jobs = [(prior, params, grid, spec, seed, int(lo), int(hi), detectors,
                 projection, projection_detector)
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_range_star, jobs))
        gains = np.concatenate([p[0] for p in parts], axis=0)
        v_ints = np.concatenate([p[1] for p in parts]) if projection else None
        marts = np.concatenate([p[2] for p in parts]) if projection else None
    return ReplicationResults(detectors=detectors, gains=gains,
                              v_integrals=v_ints, martingales=marts, seed=seed)


def _run_range_star(args):
    return _run_range(*args)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainReport:
    detectors: list
    means: np.ndarray
    ses: np.ndarray
    diff_means: np.ndarray  # (D, D): mean gain[a] - gain[b]
    diff_ses: np.ndarray    # (D, D): paired standard error of the difference
    reps: int
    seed: int

    def summary_lines(self) -> list[str]:
        lines = [f"replications = {self.reps}", f"seed = {self.seed}"]
        for d, key in enumerate(self.detectors):
            lines.append(
                f"gain[{detector_label(key)}] = {float(self.means[d])!r} "
                f"(se = {float(self.ses[d])!r})")
        return lines


def summarize_gains(res: ReplicationResults) -> GainReport:
    g = res.gains
    reps = g.shape[0]
    means = g.mean(axis=0)
    ses = g.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(g.shape[1])
    D = g.shape[1]
    dm = np.zeros((D, D))
    dse = np.zeros((D, D))
    for a in range(D):
        for b in range(D):
            diff = g[:, a] - g[:, b]
            dm[a, b] = diff.mean()
            dse[a, b] = diff.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
    return GainReport(detectors=res.detectors, means=means, ses=ses,
                      diff_means=dm, diff_ses=dse, reps=reps, seed=res.seed)


def expected_gain(detector: DetectorKey, prior: PriorModel,
                  params: DetectionParams, grid: GridSpec, spec: EstimatorSpec,
                  reps: int, seed: int, threads: int = 1) -> tuple[float, float]:
    """Mean gain of one detector with its Monte Carlo standard error."""
    res = run_replications(prior, params, grid, spec, reps, seed, [detector],
                           threads=threads)
    rep = summarize_gains(res)
    return float(rep.means[0]), float(rep.ses[0])


@dataclass(frozen=True)
class ProjectionVerdict:
    """Stopped-gain identity check.

    ``lhs`` is the mean realized gain of the stopping set, ``rhs`` the mean
    of ``k0 + ∫ field`` over it; the martingale column checks that
    ``#generators captured - ∫ hazard off the change region`` centers on
    zero over the same stopping sets.
    """

    lhs_mean: float
    rhs_mean: float
    diff_mean: float
    diff_se: float
    passed: bool
    mart_mean: float
    mart_se: float
    mart_passed: bool

    def as_lines(self) -> list[str]:
        return [
            f"stopped_gain_mean = {self.lhs_mean!r}",
            f"field_integral_mean = {self.rhs_mean!r}",
            f"difference = {self.diff_mean!r} (se = {self.diff_se!r})",
            f"identity_pass = {'true' if self.passed else 'false'}",
            f"martingale_mean = {self.mart_mean!r} (se = {self.mart_se!r})",
            f"martingale_pass = {'true' if self.mart_passed else 'false'}",
        ]


def projection_identity_check(prior: PriorModel, params: DetectionParams,
                              grid: GridSpec, spec: EstimatorSpec, reps: int,
                              seed: int, detector: DetectorKey = "optimal",
                              threads: int = 1,
                              results: Optional[ReplicationResults] = None) -> ProjectionVerdict:
    """Verify mean stopped gain against the field integral, three sigma.

    Both sides are computed per replication on the same stopping set
    (``detector`` picks it; deterministic sets qualify too), so the test
    statistic is the paired difference.  A precomputed
    :class:`ReplicationResults` with matching projection extras can be
    reused to avoid rerunning the replications.
    """
    if results is None:
        results = run_replications(prior, params, grid, spec, reps, seed,
                                   [detector], projection=True,
                                   projection_detector=detector, threads=threads)
    if detector not in results.detectors or results.v_integrals is None:
        raise ValueError("need projection extras for the requested detector")
    idx = results.detectors.index(detector)
    lhs = results.gains[:, idx]
    rhs = params.k0 + results.v_integrals
    diff = lhs - rhs
    n = diff.size
    diff_se = float(diff.std(ddof=1) / math.sqrt(n))
    mart = results.martingales
    mart_se = float(mart.std(ddof=1) / math.sqrt(n))
    return ProjectionVerdict(
        lhs_mean=float(lhs.mean()), rhs_mean=float(rhs.mean()),
        diff_mean=float(diff.mean()), diff_se=diff_se,
        passed=abs(diff.mean()) <= 3.0 * diff_se,
        mart_mean=float(mart.mean()), mart_se=mart_se,
        mart_passed=abs(mart.mean()) <= 3.0 * mart_se,
    )
