"""Sampling of the observed point process given a change-set.

Given the change region, observations form a Poisson process with
intensity ``mu0`` off the region and ``mu1`` on it.  Sampling uses the
superposition construction: a homogeneous ``mu0`` background over the
whole window plus an independent ``mu1 - mu0`` layer thinned to the
region.  Conditionally on the region that is exactly the target law, with
no rejection loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec, UpperLayer, contains_many
from .priors import DetectionParams, PriorModel, sample_changeset


@dataclass(frozen=True)
class PointPattern:
    """Observed event locations inside the window (no ordering implied)."""

    points: np.ndarray  # (k, 2) float
    window: GridSpec

    def __post_init__(self):
        p = self.points
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValueError("points must be a (k, 2) array")
        if p.size and (p.min() < 0.0 or p.max() > self.window.r):
            raise ValueError("points must lie inside the window")

    @property
    def count(self) -> int:
        return self.points.shape[0]


def sample_observation(xi: UpperLayer, params: DetectionParams, window: GridSpec,
                       rng: np.random.Generator) -> PointPattern:
    """Draw the observation pattern conditional on the change-set ``xi``.

    Draw order is fixed (background count, background points, extra count,
    extra points) so a given stream reproduces the pattern byte-for-byte.
    A zero ``mu0`` skips the background layer entirely.
    """
    r = window.r
    parts = []
    if params.mu0 > 0.0:
        n0 = rng.poisson(params.mu0 * r * r)
        parts.append(rng.random((n0, 2)) * r)
    n1 = rng.poisson(params.delta * r * r)
    extra = rng.random((n1, 2)) * r
    # thinning: the boosted layer survives only on the (closed) change region
    parts.append(extra[contains_many(xi, extra)])
    pts = np.concatenate(parts, axis=0) if parts else np.empty((0, 2))
    return PointPattern(points=pts, window=window)


def count_in_rect(pattern: PointPattern, lo, hi) -> int:
    """Points in the half-open rectangle ``(lo, hi]``.

    A zero coordinate of ``lo`` closes that side, so points sitting on the
    window's lower-left axes are counted when the rectangle starts there.
    """
    if not (lo[0] <= hi[0] and lo[1] <= hi[1]):
        raise ValueError("need lo <= hi componentwise")
    p = pattern.points
    if p.shape[0] == 0:
        return 0
    in_x = (p[:, 0] > lo[0]) | ((lo[0] == 0.0) & (p[:, 0] == 0.0))
    in_y = (p[:, 1] > lo[1]) | ((lo[1] == 0.0) & (p[:, 1] == 0.0))
    return int(np.count_nonzero(in_x & (p[:, 0] <= hi[0]) & in_y & (p[:, 1] <= hi[1])))


def sample_pair(prior: PriorModel, params: DetectionParams, window: GridSpec,
                rng: np.random.Generator) -> tuple[UpperLayer, PointPattern]:
    """Draw (change-set, observation) jointly; both are returned so gains
    can later be scored against the truth."""
    xi_rng, obs_rng = rng.spawn(2)
    xi = sample_changeset(prior, window, xi_rng)
    pattern = sample_observation(xi, params, window, obs_rng)
    return xi, pattern


# ---------------------------------------------------------------------------
# Serialization: "x,y" per line, header optional on load.
# ---------------------------------------------------------------------------

def points_to_csv(points: np.ndarray) -> str:
    lines = [f"{float(x)!r},{float(y)!r}"
             for x, y in np.asarray(points, dtype=float).reshape(-1, 2)]
    return "\n".join(lines) + ("\n" if lines else "")


def points_from_csv(text: str) -> np.ndarray:
    rows = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.split(",")
        try:
            rows.append((float(a), float(b)))
        except ValueError:
            continue  # header line
    return np.asarray(rows, dtype=float).reshape(-1, 2)
