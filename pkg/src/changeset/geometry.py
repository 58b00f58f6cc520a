"""Staircase geometry on the nonnegative quadrant.

The change-set model lives on the componentwise partial order of the plane:
an *upper layer* is a set closed under moving up/right (a northeast
staircase region), a *lower layer* is closed under moving down/left.  Every
upper layer handled here is generated by a finite antichain of points, so
membership, staircase profiles and exact Lebesgue areas of intersections
with rectangles all reduce to small sweeps over the generator list.

Conventions, fixed once for the whole package:

* upper layers are closed (generators belong to the layer); area
  computations ignore boundaries, which are null sets;
* generators are kept sorted by first coordinate, which pins the sweep
  order and makes every area bit-reproducible;
* a grid with ``n`` cells per side on the window ``[0, r]^2`` has nodes
  ``(i*r/n, j*r/n)`` and node masks are indexed ``member[i, j]`` with ``i``
  the first (horizontal) coordinate; the region represented by a lower
  layer node mask is the union of the closed cells whose upper-right
  corner node is in the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Point2 = tuple[float, float]


def as_point(p) -> Point2:
    """Validate and coerce a 2-sequence into a point of the quadrant."""
    t1, t2 = float(p[0]), float(p[1])
    if not (np.isfinite(t1) and np.isfinite(t2)):
        raise ValueError(f"point coordinates must be finite, got {p!r}")
    if t1 < 0.0 or t2 < 0.0:
        raise ValueError(f"point coordinates must be >= 0, got {p!r}")
    return (t1, t2)


def leq(s, t) -> bool:
    """Componentwise partial order: s <= t in both coordinates."""
    return s[0] <= t[0] and s[1] <= t[1]


def strictly_below(s, t) -> bool:
    """Strict two-branch relation used by first-exit stopping rules.

    Per coordinate: if ``t_i > 0`` then ``s_i < t_i`` is required, while if
    ``t_i = 0`` then ``s_i = 0`` is required.  Note that the origin (and
    more generally any point on an axis) relates to itself in the zero
    coordinates.
    """
    for i in (0, 1):
        if t[i] > 0.0:
            if not s[i] < t[i]:
                return False
        elif s[i] != 0.0:
            return False
    return True


@dataclass(frozen=True)
class UpperLayer:
    """Closed upper layer generated by a finite antichain.

    ``generators`` is a float array of shape ``(k, 2)`` holding pairwise
    incomparable points sorted by first coordinate (hence strictly
    decreasing second coordinate).  The empty array denotes the empty set.
    """

    generators: np.ndarray

    @classmethod
    def empty(cls) -> "UpperLayer":
        return cls(np.empty((0, 2), dtype=float))

    @property
    def is_empty(self) -> bool:
        return self.generators.shape[0] == 0


def normalize(points) -> UpperLayer:
    """Reduce a point list to the minimal antichain generating its upper set.

    Dominated points (those >= another point in both coordinates) are
    dropped; the survivors are returned sorted by first coordinate.
    Idempotent, and the membership function is unchanged.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return UpperLayer.empty()
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0):
        raise ValueError("generators must be finite and >= 0")
    # Sort by (x, y); a point is minimal iff its y is strictly below the
    # running y-minimum of everything to its left.
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    keep = []
    best_y = np.inf
    for x, y in pts:
        if y < best_y:
            keep.append((x, y))
            best_y = y
    return UpperLayer(np.asarray(keep, dtype=float).reshape(-1, 2))


def contains(layer: UpperLayer, t) -> bool:
    """Membership in the closed upper layer: some generator is <= t."""
    g = layer.generators
    if g.shape[0] == 0:
        return False
    return bool(np.any((g[:, 0] <= t[0]) & (g[:, 1] <= t[1])))


def contains_many(layer: UpperLayer, points: np.ndarray) -> np.ndarray:
    """Vectorized membership for an ``(m, 2)`` array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    g = layer.generators
    if g.shape[0] == 0:
        return np.zeros(pts.shape[0], dtype=bool)
    le = (g[None, :, 0] <= pts[:, 0, None]) & (g[None, :, 1] <= pts[:, 1, None])
    return le.any(axis=1)


def area_in_rect(layer: UpperLayer, t) -> float:
    """Exact area of ``[0, t] ∩ layer``.

    The intersection is a union of rectangles anchored at the generators;
    sweeping them in increasing first coordinate makes the second
    coordinates strictly decreasing, so the union area telescopes into one
    pass.  The complement area inside the rectangle is ``t1*t2 - result``.
    """
    t1, t2 = as_point(t)
    g = layer.generators
    if g.shape[0] == 0 or t1 <= 0.0 or t2 <= 0.0:
        return 0.0
    area = 0.0
    y_prev = t2
    for gx, gy in g:
        if gx >= t1:
            break  # generators sorted by first coordinate
        if gy >= y_prev:
            continue
        area += (t1 - gx) * (y_prev - gy)
        y_prev = gy
        if y_prev <= 0.0:
            break
    return area


def node_layer_areas(layer: UpperLayer, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """``area_in_rect`` evaluated on the grid ``xs × ys`` in one sweep.

    Returns an array ``F`` with ``F[i, j] = |[0,(xs[i],ys[j])] ∩ layer|``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    F = np.zeros((xs.size, ys.size))
    g = layer.generators
    if g.shape[0] == 0:
        return F
    y_prev = np.inf
    for gx, gy in g:
        if gy >= y_prev:
            continue
        wx = np.maximum(xs - gx, 0.0)
        wy = np.minimum(ys, y_prev) - np.minimum(ys, gy)
        F += np.outer(wx, wy)
        y_prev = gy
    return F


@dataclass(frozen=True)
class GridSpec:
    """Square evaluation grid: window ``[0, r]^2`` with ``n`` cells per side."""

    r: float
    n: int

    def __post_init__(self):
        if not (self.r > 0.0 and np.isfinite(self.r)):
            raise ValueError("grid window side r must be positive and finite")
        if self.n < 1:
            raise ValueError("grid must have at least one cell per side")

    @property
    def h(self) -> float:
        return self.r / self.n

    def axis(self) -> np.ndarray:
        """Node coordinates ``i*r/n`` for ``i = 0..n``."""
        return (np.arange(self.n + 1, dtype=float) * self.r) / self.n


@dataclass(frozen=True)
class LayerMask:
    """Boolean node mask on a grid, flagged as a lower or upper layer."""

    grid: GridSpec
    member: np.ndarray
    kind: str = "lower"

    def __post_init__(self):
        m = self.member
        want = (self.grid.n + 1, self.grid.n + 1)
        if m.shape != want or m.dtype != np.bool_:
            raise ValueError(f"member must be a bool array of shape {want}")
        if self.kind not in ("lower", "upper"):
            raise ValueError("kind must be 'lower' or 'upper'")


def is_lower_layer_mask(member: np.ndarray) -> bool:
    """True iff membership propagates down/left on the grid."""
    m = np.asarray(member, dtype=bool)
    ok_x = not np.any(m[1:, :] & ~m[:-1, :])
    ok_y = not np.any(m[:, 1:] & ~m[:, :-1])
    return ok_x and ok_y


def is_upper_layer_mask(member: np.ndarray) -> bool:
    """True iff membership propagates up/right on the grid."""
    m = np.asarray(member, dtype=bool)
    ok_x = not np.any(m[:-1, :] & ~m[1:, :])
    ok_y = not np.any(m[:, :-1] & ~m[:, 1:])
    return ok_x and ok_y


def mask_cells(mask: LayerMask | np.ndarray) -> np.ndarray:
    """Cell membership ``(n, n)`` of a lower-layer node mask.

    A closed cell belongs to the represented region iff its upper-right
    corner node is a member (equivalent, for a lower layer, to all four
    corners being members).
    """
    member = mask.member if isinstance(mask, LayerMask) else mask
    return np.asarray(member, dtype=bool)[1:, 1:]


def region_area(mask: LayerMask) -> float:
    """Area of the region represented by a lower-layer node mask."""
    h = mask.grid.h
    return float(mask_cells(mask).sum()) * h * h


def layer_cell_areas(layer: UpperLayer, grid: GridSpec) -> np.ndarray:
    """Exact ``|cell ∩ layer|`` for every grid cell, shape ``(n, n)``."""
    axis = grid.axis()
    F = node_layer_areas(layer, axis, axis)
    return F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]


def layer_area_general(layer: UpperLayer, mask: LayerMask) -> float:
    """Exact area of ``region(mask) ∩ layer`` for a lower-layer node mask.

    Each grid cell of the masked region is intersected with the staircase
    exactly, so the result is exact whether or not the staircase edges
    align with the grid.  Rejects masks violating the lower-layer
    invariant.
    """
    if mask.kind != "lower" or not is_lower_layer_mask(mask.member):
        raise ValueError("mask must satisfy the lower-layer invariant")
    cells = mask_cells(mask)
    if not cells.any():
        return 0.0
    return float(layer_cell_areas(layer, mask.grid)[cells].sum())


def generators_in_region(layer: UpperLayer, mask: LayerMask) -> int:
    """Number of generators inside the closed region of a lower-layer mask.

    Generators sitting exactly on the region's boundary count as inside
    (the region is a union of closed cells).
    """
    cells = mask_cells(mask)
    n, h = mask.grid.n, mask.grid.h
    axis = mask.grid.axis()
    count = 0
    for gx, gy in layer.generators:
        if gx > mask.grid.r or gy > mask.grid.r:
            continue
        i_cand = {min(max(int(np.floor(gx / h)) + d, 0), n - 1) for d in (-1, 0, 1)}
        j_cand = {min(max(int(np.floor(gy / h)) + d, 0), n - 1) for d in (-1, 0, 1)}
        hit = any(
            cells[i, j]
            and axis[i] <= gx <= axis[i + 1]
            and axis[j] <= gy <= axis[j + 1]
            for i in i_cand
            for j in j_cand
        )
        count += bool(hit)
    return count


# ---------------------------------------------------------------------------
# Batched layers: segment tables shared by the Monte Carlo engines.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerBatch:
    """Staircase profiles of many upper layers in padded array form.

    Row ``i`` of each table describes layer ``i`` as a piecewise constant
    profile ``phi(x) = min{ g2 : generator (g1, g2) with g1 <= x }`` (and
    ``+inf`` left of every generator).  Segment ``k`` starts at
    ``seg_start[i, k]``, has width ``seg_width[i, k]`` and profile value
    ``seg_floor[i, k]``; padding rows use ``start = +inf, width = 0``.
    Redundant segments (from dominated sample points) are harmless: every
    consumer sums ``length × value`` over segments.

    ``gen_x/gen_y/gen_mask`` retain the raw sample points with a flag for
    the minimal (antichain) ones, and ``n_window_generators`` counts the
    minimal points per layer.
    """

    seg_start: np.ndarray   # (m, S)
    seg_width: np.ndarray   # (m, S)
    seg_floor: np.ndarray   # (m, S)
    gen_x: np.ndarray       # (m, P) padded with +inf
    gen_y: np.ndarray       # (m, P) padded with +inf
    gen_mask: np.ndarray    # (m, P) bool, True where minimal
    n_window_generators: np.ndarray  # (m,)

    @property
    def size(self) -> int:
        return self.seg_start.shape[0]


def build_layer_batch(points_x: np.ndarray, points_y: np.ndarray,
                      counts: np.ndarray) -> LayerBatch:
    """Assemble a :class:`LayerBatch` from per-layer point samples.

    ``points_x``/``points_y`` hold the concatenated sample points of all
    layers, ``counts[i]`` points per layer, in layer order.
    """
    counts = np.asarray(counts, dtype=np.int64)
    m = counts.size
    P = max(int(counts.max()) if m else 0, 1)
    xs = np.full((m, P), np.inf)
    ys = np.full((m, P), np.inf)
    if counts.sum() > 0:
        layer_of = np.repeat(np.arange(m), counts)
        key = np.lexsort((points_y, points_x, layer_of))
        px = np.asarray(points_x, dtype=float)[key]
        py = np.asarray(points_y, dtype=float)[key]
        lid = layer_of[key]
        starts = np.cumsum(counts) - counts
        pos = np.arange(counts.sum()) - starts[lid]
        xs[lid, pos] = px
        ys[lid, pos] = py
    running = np.minimum.accumulate(ys, axis=1)
    prev = np.concatenate([np.full((m, 1), np.inf), running[:, :-1]], axis=1)
    minimal = (ys < prev) & np.isfinite(ys)

    # Segments: a leading [0, x_1) strip at +inf, then one per sample point
    # (dominated points yield zero-effect splits).
    seg_start = np.concatenate([np.zeros((m, 1)), xs], axis=1)
    nxt = np.concatenate([xs, np.full((m, 1), np.inf)], axis=1)
    with np.errstate(invalid="ignore"):
        seg_width = nxt - seg_start
    seg_width[~np.isfinite(seg_start)] = 0.0
    seg_start[~np.isfinite(seg_start)] = np.inf
    seg_floor = np.concatenate([np.full((m, 1), np.inf), running], axis=1)
    return LayerBatch(
        seg_start=seg_start, seg_width=seg_width, seg_floor=seg_floor,
        gen_x=xs, gen_y=ys, gen_mask=minimal,
        n_window_generators=minimal.sum(axis=1),
    )


def batch_from_layers(layers: list[UpperLayer]) -> LayerBatch:
    """Build a batch from explicit :class:`UpperLayer` values."""
    counts = np.array([la.generators.shape[0] for la in layers], dtype=np.int64)
    if counts.sum():
        allg = np.concatenate([la.generators for la in layers if la.generators.size],
                              axis=0)
        px, py = allg[:, 0], allg[:, 1]
    else:
        px = py = np.empty(0)
    return build_layer_batch(px, py, counts)


def batch_layer(batch: LayerBatch, i: int) -> UpperLayer:
    """Materialize layer ``i`` of a batch as an :class:`UpperLayer`."""
    sel = batch.gen_mask[i]
    pts = np.stack([batch.gen_x[i][sel], batch.gen_y[i][sel]], axis=1)
    return normalize(pts)


def batch_profiles(batch: LayerBatch, xs: np.ndarray) -> np.ndarray:
    """Staircase height ``phi(x)`` per layer at each abscissa, ``(m, nx)``."""
    xs = np.asarray(xs, dtype=float)
    covered = batch.seg_start[:, :, None] <= xs[None, None, :]
    vals = np.where(covered, batch.seg_floor[:, :, None], np.inf)
    return vals.min(axis=1)


def batch_complement_areas(batch: LayerBatch, xs: np.ndarray,
                           ys: np.ndarray) -> np.ndarray:
    """``|[0,(x,y)] \\ layer|`` for every layer and grid node, ``(m, nx, ny)``.

    Computed as a fixed-order sum of ``clip(x - start, 0, width) * min(y,
    floor)`` over segments, so each entry is exact staircase geometry and
    the array is componentwise nondecreasing in ``(x, y)`` even in floating
    point.
    """
    lengths = batch_segment_lengths(batch, xs)
    floors = batch_segment_floors(batch, ys)
    return lengths.transpose(0, 2, 1) @ floors


def batch_segment_lengths(batch: LayerBatch, xs: np.ndarray) -> np.ndarray:
    """Covered length of ``[0, x]`` per segment: ``(m, S, nx)``."""
    xs = np.asarray(xs, dtype=float)
    rel = xs[None, None, :] - batch.seg_start[:, :, None]
    return np.clip(rel, 0.0, batch.seg_width[:, :, None])


def batch_segment_floors(batch: LayerBatch, ys: np.ndarray) -> np.ndarray:
    """Profile height clipped at ``y`` per segment: ``(m, S, ny)``."""
    ys = np.asarray(ys, dtype=float)
    return np.minimum(ys[None, None, :], batch.seg_floor[:, :, None])


def batch_node_membership(batch: LayerBatch, xs: np.ndarray,
                          ys: np.ndarray) -> np.ndarray:
    """Closed-layer membership of every grid node, ``(m, nx, ny)`` bool."""
    prof = batch_profiles(batch, xs)
    return prof[:, :, None] <= np.asarray(ys, dtype=float)[None, None, :]


def batch_point_membership(batch: LayerBatch, points: np.ndarray) -> np.ndarray:
    """Closed-layer membership of arbitrary points, ``(m, npts)`` bool."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return np.zeros((batch.size, 0), dtype=bool)
    prof = batch_profiles(batch, pts[:, 0])
    return prof <= pts[None, :, 1]


def batch_generator_counts(batch: LayerBatch, xs: np.ndarray,
                           ys: np.ndarray) -> np.ndarray:
    """Number of minimal points in ``[0,(x,y)]`` per layer, ``(m, nx, ny)``."""
    inx = (batch.gen_x[:, :, None] <= np.asarray(xs)[None, None, :]) & batch.gen_mask[:, :, None]
    iny = batch.gen_y[:, :, None] <= np.asarray(ys)[None, None, :]
    return np.einsum("mpx,mpy->mxy", inx.astype(np.int64), iny.astype(np.int64))


# ---------------------------------------------------------------------------
# Mask serialization: CSV of 0/1 and PGM (P2, maxval 1), identical ordering.
# ---------------------------------------------------------------------------

def mask_to_csv(mask: LayerMask) -> str:
    """Row-major 0/1 CSV; the first row is the ``t2 = 0`` axis."""
    rows = []
    for j in range(mask.grid.n + 1):
        rows.append(",".join("1" if v else "0" for v in mask.member[:, j]))
    return "\n".join(rows) + "\n"


def mask_from_csv(text: str, grid: GridSpec, kind: str = "lower") -> LayerMask:
    rows = [r for r in text.strip().splitlines() if r.strip()]
    arr = np.array([[c == "1" for c in row.split(",")] for row in rows], dtype=bool)
    return LayerMask(grid=grid, member=arr.T.copy(), kind=kind)


def mask_to_pgm(mask: LayerMask) -> str:
    """Plain PGM (P2) with maxval 1, raster rows in CSV order."""
    n1 = mask.grid.n + 1
    lines = ["P2", f"{n1} {n1}", "1"]
    for j in range(n1):
        lines.append(" ".join("1" if v else "0" for v in mask.member[:, j]))
    return "\n".join(lines) + "\n"
