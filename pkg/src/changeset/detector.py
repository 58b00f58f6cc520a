"""First-exit stopping sets and change-set estimates on the grid.

A node belongs to the stopping set when the gain-rate field is strictly
positive at every node strictly below it (in the two-branch sense of
:func:`..geometry.strictly_below`, so axis nodes are constrained only
along their axis and the origin is constrained by itself).  Ties at
exactly zero therefore terminate the set: a nonpositive node excludes
everything strictly beyond it.

That strictness is what makes the construction sequential: membership of
the upper-right corner of a grid cell is decided by field values at nodes
no later than the cell's lower-left corner, so the region spanned by the
member cells is adapted to the observations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import GridSpec, LayerMask, is_lower_layer_mask, is_upper_layer_mask
from .posterior import PosteriorField
from .priors import (
    FIRST_LINE_POISSON,
    DetectionParams,
    PriorModel,
    hazard_grid,
    prob_no_jump_grid,
)


@dataclass(frozen=True)
class StoppingSet:
    """Closed lower layer of grid nodes where observation may continue."""

    grid: GridSpec
    member: np.ndarray  # (n+1, n+1) bool
    source: str = ""

    def as_mask(self) -> LayerMask:
        return LayerMask(grid=self.grid, member=self.member, kind="lower")

    @property
    def node_count(self) -> int:
        return int(self.member.sum())


@dataclass(frozen=True)
class ChangeEstimate:
    """Upper layer of grid nodes estimating the change region."""

    grid: GridSpec
    member: np.ndarray

    def as_mask(self) -> LayerMask:
        return LayerMask(grid=self.grid, member=self.member, kind="upper")


def _first_exit_mask(positive: np.ndarray) -> np.ndarray:
    """Nodes whose strictly-below predecessors are all positive.

    ``positive[i, j]`` says whether the field is > 0 at node ``(i, j)``.
    Interior node ``(i, j)`` needs every node with both indices strictly
    smaller to be positive; an axis node needs only its own axis strictly
    before it; the origin needs itself.
    """
    n1 = positive.shape[0]
    member = np.empty_like(positive)
    # cumulative AND over the closed prefix rectangle
    cum = np.logical_and.accumulate(np.logical_and.accumulate(positive, axis=0), axis=1)
    member[1:, 1:] = cum[:-1, :-1]
    row = np.logical_and.accumulate(positive[:, 0])
    col = np.logical_and.accumulate(positive[0, :])
    member[1:, 0] = row[:-1]
    member[0, 1:] = col[:-1]
    member[0, 0] = positive[0, 0]
    return member


def stopping_set_from_field(field: PosteriorField) -> StoppingSet:
    """First-exit stopping set of a gain-rate field."""
    if not np.all(np.isfinite(field.values)):
        raise ValueError("field values must be finite")
    member = _first_exit_mask(field.values > 0.0)
    return StoppingSet(grid=field.grid, member=member,
                       source=f"first-exit[{field.mc_meta.get('estimator', '')}]")


def estimate_changeset(rho: StoppingSet) -> ChangeEstimate:
    """Grid closure of the window minus the stopping set.

    Nodes represent half-open cells ``[x, x+h) × [y, y+h)``, so the
    closure keeps every node outside the stopping set and always includes
    the top and right window edges (never covered by member cells).
    """
    if not is_lower_layer_mask(rho.member):
        raise ValueError("stopping set mask violates the lower-layer invariant")
    member = ~rho.member
    member[-1, :] = True
    member[:, -1] = True
    est = ChangeEstimate(grid=rho.grid, member=member)
    if not is_upper_layer_mask(member):
        raise AssertionError("change estimate failed the upper-layer invariant")
    return est


def no_info_baseline(prior: PriorModel, params: DetectionParams,
                     grid: GridSpec) -> StoppingSet:
    """Deterministic stopping set when the observations are ignored.

    Continue while ``P(no generator yet) > c1 / (c0 + c1 + k1 hazard)``
    strictly below the node.  For the Poisson first line this region has
    the closed form ``t1 t2 <= (ln(c0 + c1 + k1 gamma) - ln c1) / gamma``,
    which is used verbatim so grid membership matches the hyperbola
    exactly.
    """
    axis = grid.axis()
    if prior.kind == FIRST_LINE_POISSON:
        g = prior.gamma
        theta = (np.log(params.c0 + params.c1 + params.k1 * g) - np.log(params.c1)) / g
        member = np.multiply.outer(axis, axis) <= theta
        return StoppingSet(grid=grid, member=member, source="no-info-baseline")
    lam = hazard_grid(prior, axis[:, None], axis[None, :])
    pnj = prob_no_jump_grid(prior, axis[:, None], axis[None, :])
    rate = -params.c1 + (params.c0 + params.c1 + params.k1 * lam) * pnj
    member = _first_exit_mask(rate > 0.0)
    return StoppingSet(grid=grid, member=member, source="no-info-baseline")


@dataclass(frozen=True)
class MonotoneVerdict:
    passed: bool
    violation: Optional[dict] = None


def monotone_check(field: PosteriorField) -> MonotoneVerdict:
    """Check that the nonpositive set of the field is a grid upper layer.

    Equivalent to: along every grid step up or right, a nonpositive value
    never turns positive.  Reports the first violating adjacent pair in a
    fixed scan order (x-steps, then y-steps).
    """
    v = field.values
    axis = field.grid.axis()
    for ax in (0, 1):
        lo = v.take(range(0, v.shape[ax] - 1), axis=ax)
        hi = v.take(range(1, v.shape[ax]), axis=ax)
        bad = (lo <= 0.0) & (hi > 0.0)
        if bad.any():
            i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
            s = [i, j]
            t = [i, j]
            t[ax] += 1
            return MonotoneVerdict(False, {
                "node_from": (float(axis[s[0]]), float(axis[s[1]])),
                "node_to": (float(axis[t[0]]), float(axis[t[1]])),
                "value_from": float(v[s[0], s[1]]),
                "value_to": float(v[t[0], t[1]]),
            })
    return MonotoneVerdict(True, None)
