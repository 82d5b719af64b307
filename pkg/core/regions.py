"""Regions of the complement: unions of dilated Whitney boxes and simple domains.

A :class:`Region` is a finite union of closed axis-aligned boxes read with
interior semantics: a point belongs to the region when it is interior to
the union, so shared faces between boxes do not count as boundary.  In the
plane the boundary is extracted exactly by a slab sweep.

:class:`PolygonDomain` and :class:`ComplementDomain` expose the same
domain interface (``contains``, ``boundary_distance``, ``nearest_boundary``,
``boundary``) so walk-on-spheres and per-subdomain estimators accept any
of them.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from core.ambient import AmbientSet, CurveSet, PolygonSet, make_polygon_set
from core.errors import InputError, UnsupportedDimensionError
from core.segments import SegmentSoup

log = logging.getLogger(__name__)


def merge_intervals(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Union of closed intervals [a_i, b_i] as sorted disjoint intervals.

    Touching intervals merge, so the result describes the interior of the union.
    """
    if len(a) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    run = np.maximum.accumulate(b)
    start = np.concatenate([[True], a[1:] > run[:-1]])
    first = np.flatnonzero(start)
    return a[first], np.maximum.reduceat(b, first)


def _in_intervals(y: np.ndarray, mlo: np.ndarray, mhi: np.ndarray) -> np.ndarray:
    if len(mlo) == 0:
        return np.zeros(len(y), dtype=bool)
    i = np.searchsorted(mlo, y, side="right") - 1
    return (i >= 0) & (y < mhi[np.maximum(i, 0)])


def _symmetric_difference(alo, ahi, blo, bhi) -> Tuple[np.ndarray, np.ndarray]:
    cuts = np.unique(np.concatenate([alo, ahi, blo, bhi]))
    if len(cuts) < 2:
        return np.zeros(0), np.zeros(0)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    odd = _in_intervals(mids, alo, ahi) != _in_intervals(mids, blo, bhi)
    return merge_intervals(cuts[:-1][odd], cuts[1:][odd])


class Region:
    """Interior of a union of closed boxes ``[lo_i, hi_i]`` in R^(n+1)."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray, cube_ids: Optional[np.ndarray] = None,
                 tau: Optional[float] = None, label: str = ""):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise InputError("region boxes need matching (m, d) corner arrays")
        if np.any(hi <= lo):
            raise InputError("region boxes must have positive side lengths", label=label)
        self.lo, self.hi = lo, hi
        self.cube_ids = cube_ids
        self.tau = tau
        self.label = label
        self._groups: Optional[List[Tuple[np.ndarray, cKDTree, np.ndarray]]] = None
        self._boundary: Optional[SegmentSoup] = None

    @classmethod
    def from_whitney(cls, W, idx: Sequence[int], tau: float, label: str = "") -> "Region":
        idx = np.unique(np.asarray(idx, dtype=np.int64))
        lo, hi = W.dilated(idx, tau)
        return cls(lo.reshape(-1, 2), hi.reshape(-1, 2), cube_ids=idx, tau=tau, label=label)

    @classmethod
    def empty(cls, dim: int = 2, label: str = "") -> "Region":
        return cls(np.zeros((0, dim)), np.zeros((0, dim)), cube_ids=np.zeros(0, dtype=np.int64), label=label)

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def dim(self) -> int:
        return self.lo.shape[1]

    @property
    def n(self) -> int:
        return self.dim - 1

    def is_empty(self) -> bool:
        return len(self) == 0

    def bbox(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.is_empty():
            raise InputError("empty region has no bounding box", label=self.label)
        return self.lo.min(axis=0), self.hi.max(axis=0)

    @property
    def min_side(self) -> float:
        return float(np.min(self.hi - self.lo)) if len(self) else 0.0

    @property
    def scale(self) -> float:
        if self.is_empty():
            return 1.0
        lo, hi = self.bbox()
        return float(np.max(hi - lo))

    def union(self, other: "Region", label: str = "") -> "Region":
        ids = None
        if self.cube_ids is not None and other.cube_ids is not None and self.tau == other.tau:
            ids = np.union1d(self.cube_ids, other.cube_ids)
        return Region(np.vstack([self.lo, other.lo]), np.vstack([self.hi, other.hi]),
                      cube_ids=ids, tau=self.tau if self.tau == other.tau else None,
                      label=label or self.label)

    # ------------------------------------------------------------------
    # membership
    # ------------------------------------------------------------------
    def _size_groups(self):
        """Boxes grouped by side vector; each group gets a Chebyshev k-d tree."""
        if self._groups is None:
            sides = self.hi - self.lo
            # equal sides up to rounding share a group
            keys, inverse = np.unique(np.round(np.log2(sides), 12), axis=0, return_inverse=True)
            inverse = np.ravel(inverse)
            self._groups = []
            for g in range(len(keys)):
                members = np.flatnonzero(inverse == g)
                centers = 0.5 * (self.lo[members] + self.hi[members])
                # scale coordinates so the closed box is the unit max-norm ball
                half = 0.5 * sides[members].max(axis=0)
                self._groups.append((half, cKDTree(centers / half), members))
        return self._groups

    def coverage_count(self, points: np.ndarray) -> np.ndarray:
        """Number of closed boxes containing each point."""
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        count = np.zeros(len(p), dtype=np.int64)
        if self.is_empty():
            return count
        for half, tree, _ in self._size_groups():
            count += np.asarray(tree.query_ball_point(p / half, 1.0 + 1e-12, p=np.inf, return_length=True))
        return count

    def containing_boxes(self, points: np.ndarray) -> List[np.ndarray]:
        """Box indices whose closed box holds each point."""
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        hits: List[List[int]] = [[] for _ in range(len(p))]
        if self.is_empty():
            return [np.zeros(0, dtype=np.int64) for _ in p]
        for half, tree, members in self._size_groups():
            for i, found in enumerate(tree.query_ball_point(p / half, 1.0 + 1e-12, p=np.inf)):
                hits[i].extend(members[found])
        return [np.sort(np.asarray(h, dtype=np.int64)) for h in hits]

    def contains_closed(self, points: np.ndarray) -> np.ndarray:
        return self.coverage_count(points) > 0

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Interior-of-union membership.

        A point is interior iff every diagonal offset at a scale far below
        the smallest box side lies in the closed union.
        """
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.is_empty():
            return np.zeros(len(p), dtype=bool)
        eps = 1e-9 * self.min_side
        inside = np.ones(len(p), dtype=bool)
        for signs in itertools.product((-1.0, 1.0), repeat=self.dim):
            todo = np.flatnonzero(inside)
            if len(todo) == 0:
                break
            inside[todo] = self.contains_closed(p[todo] + eps * np.asarray(signs))
        return inside

    # ------------------------------------------------------------------
    # planar sweep
    # ------------------------------------------------------------------
    def _require_planar(self, what: str):
        if self.dim != 2:
            raise UnsupportedDimensionError(f"{what} is implemented for planar regions only", dim=self.dim)

    def _slabs(self):
        xs = np.unique(np.concatenate([self.lo[:, 0], self.hi[:, 0]]))
        for a, b in zip(xs[:-1], xs[1:]):
            active = (self.lo[:, 0] <= a) & (self.hi[:, 0] >= b)
            mlo, mhi = merge_intervals(self.lo[active, 1], self.hi[active, 1])
            yield a, b, mlo, mhi

    def area(self) -> float:
        """Exact area of the union."""
        self._require_planar("area")
        if self.is_empty():
            return 0.0
        return float(sum((b - a) * np.sum(mhi - mlo) for a, b, mlo, mhi in self._slabs()))

    def boundary(self) -> SegmentSoup:
        """Exact boundary of the union as horizontal and vertical segments."""
        self._require_planar("boundary extraction")
        if self._boundary is not None:
            return self._boundary
        if self.is_empty():
            self._boundary = SegmentSoup.empty()
            return self._boundary
        starts, ends = [], []
        prev_x, prev_lo, prev_hi = None, np.zeros(0), np.zeros(0)
        for a, b, mlo, mhi in self._slabs():
            # slabs are contiguous, so coverage changes only at x = a
            self._vertical(a, prev_lo, prev_hi, mlo, mhi, starts, ends)
            for y in np.concatenate([mlo, mhi]):
                starts.append((a, y))
                ends.append((b, y))
            prev_x, prev_lo, prev_hi = b, mlo, mhi
        self._vertical(prev_x, prev_lo, prev_hi, np.zeros(0), np.zeros(0), starts, ends)
        self._boundary = SegmentSoup.from_segments(np.array(starts).reshape(-1, 2), np.array(ends).reshape(-1, 2))
        log.debug("region %s: %d boxes, %d boundary segments", self.label, len(self), len(self._boundary))
        return self._boundary

    @staticmethod
    def _vertical(x, alo, ahi, blo, bhi, starts, ends):
        dlo, dhi = _symmetric_difference(alo, ahi, blo, bhi)
        for y0, y1 in zip(dlo, dhi):
            starts.append((x, y0))
            ends.append((x, y1))

    @property
    def perimeter(self) -> float:
        return self.boundary().total_length

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        return self.boundary().distance(points)

    def nearest_boundary(self, points: np.ndarray) -> np.ndarray:
        return self.boundary().nearest(points)[0]

    # ------------------------------------------------------------------
    # connectivity
    # ------------------------------------------------------------------
    def overlap_pairs(self, tol: float = 1e-12) -> np.ndarray:
        """Pairs of boxes whose union has connected interior (overlap or a shared face piece)."""
        if len(self) < 2:
            return np.zeros((0, 2), dtype=np.int64)
        groups = self._size_groups()
        pairs = []
        for (ha, _, ma), (hb, _, mb) in itertools.combinations_with_replacement(groups, 2):
            ca = 0.5 * (self.lo[ma] + self.hi[ma])
            cb = 0.5 * (self.lo[mb] + self.hi[mb])
            reach = float(np.max(ha + hb)) * (1 + 1e-9)
            hits = cKDTree(ca).sparse_distance_matrix(cKDTree(cb), reach, p=np.inf, output_type="ndarray")
            i, j = ma[hits["i"]], mb[hits["j"]]
            keep = i != j
            pairs.append(np.column_stack([np.minimum(i, j), np.maximum(i, j)])[keep])
        pairs = np.unique(np.concatenate(pairs).astype(np.int64), axis=0) if pairs else np.zeros((0, 2), np.int64)
        if len(pairs) == 0:
            return pairs
        span = np.minimum(self.hi[pairs[:, 0]], self.hi[pairs[:, 1]]) - np.maximum(self.lo[pairs[:, 0]], self.lo[pairs[:, 1]])
        scale = tol * max(1.0, float(np.max(np.abs(self.hi))))
        # every axis must meet; at most one axis may meet in a single point
        meet = np.all(span >= -scale, axis=1) & (np.sum(span > scale, axis=1) >= self.dim - 1)
        return pairs[meet]

    def components(self) -> Tuple[int, np.ndarray]:
        """Connected components of the interior: (count, label per box)."""
        if self.is_empty():
            return 0, np.zeros(0, dtype=np.int64)
        pairs = self.overlap_pairs()
        m = len(self)
        adj = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
        count, labels = connected_components(adj, directed=False)
        return int(count), labels

    def is_connected(self) -> bool:
        return self.components()[0] <= 1

    # ------------------------------------------------------------------
    # dumps
    # ------------------------------------------------------------------
    def records(self) -> List[Dict[str, float]]:
        return [{"region": self.label, "x0": float(a[0]), "y0": float(a[1]), "x1": float(b[0]), "y1": float(b[1])}
                for a, b in zip(self.lo, self.hi)]

    def boundary_records(self) -> List[Dict[str, float]]:
        soup = self.boundary()
        ends = soup.ends()
        return [{"region": self.label, "x0": float(a[0]), "y0": float(a[1]), "x1": float(b[0]), "y1": float(b[1])}
                for a, b in zip(soup.starts, ends)]


@dataclass
class RegionBoundary:
    """Boundary polygon set of a planar region with its length measure sigma*."""

    soup: SegmentSoup
    label: str = ""

    @property
    def length(self) -> float:
        return self.soup.total_length

    def measure(self, centers: np.ndarray, radii) -> np.ndarray:
        return self.soup.ball_length(centers, radii)

    def samples(self, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
        return self.soup.midpoint_samples(spacing)

    def adr_ratios(self, radii: Sequence[float], spacing: float) -> np.ndarray:
        """sigma*(B(x, r)) / r at boundary midpoints x for every r (shape (len(radii), nodes))."""
        pts, _ = self.samples(spacing)
        return np.array([self.measure(pts, r) / r for r in radii])


def region_boundary(region: Region) -> RegionBoundary:
    if region.n >= 2:
        raise UnsupportedDimensionError("exact boundaries exist only for planar regions (n = 1)", n=region.n)
    return RegionBoundary(region.boundary(), label=region.label)


# ----------------------------------------------------------------------
# domains with the same interface
# ----------------------------------------------------------------------
class PolygonDomain:
    """Interior of a simple polygon."""

    def __init__(self, polygon: PolygonSet, label: str = "polygon"):
        self.polygon = polygon
        self.label = label

    @classmethod
    def from_vertices(cls, vertices, label: str = "polygon") -> "PolygonDomain":
        return cls(make_polygon_set(vertices), label=label)

    @property
    def scale(self) -> float:
        return self.polygon.scale

    def contains(self, points):
        return self.polygon.side(points) == 1

    def boundary_distance(self, points):
        return self.polygon.distance(points)

    def nearest_boundary(self, points):
        return self.polygon.nearest(points)

    def boundary(self) -> SegmentSoup:
        return self.polygon.soup

    def bbox(self):
        return self.polygon.vertices.min(axis=0), self.polygon.vertices.max(axis=0)

    def area(self) -> float:
        v = self.polygon.vertices
        w = np.roll(v, -1, axis=0)
        return float(0.5 * np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


class DiskDomain:
    """Open disk B(center, radius)."""

    def __init__(self, center=(0.0, 0.0), radius: float = 1.0, label: str = "disk"):
        if radius <= 0:
            raise InputError("disk radius must be positive", radius=radius)
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.radius = float(radius)
        self.label = label

    @property
    def scale(self) -> float:
        return 2.0 * self.radius

    def _offsets(self, points):
        rel = np.asarray(points, dtype=float).reshape(-1, 2) - self.center
        return rel, np.hypot(rel[:, 0], rel[:, 1])

    def contains(self, points):
        return self._offsets(points)[1] < self.radius

    def boundary_distance(self, points):
        return np.abs(self.radius - self._offsets(points)[1])

    def nearest_boundary(self, points):
        rel, r = self._offsets(points)
        unit = np.where(r[:, None] > 0, rel / np.maximum(r, 1e-300)[:, None], np.array([1.0, 0.0]))
        return self.center + self.radius * unit


class ComplementDomain:
    """A complementary component of E (``side`` plus/minus) or the whole complement (``any``)."""

    def __init__(self, set_: AmbientSet, side: str = "any", label: str = ""):
        if side != "any" and not set_.has_sides():
            raise InputError(f"side '{side}' is undefined for '{set_.kind}' sets")
        self.set = set_
        self.side = side
        self.label = label or f"{set_.kind}:{side}"

    @property
    def scale(self) -> float:
        return self.set.scale

    def contains(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.side == "any":
            return self.set.distance(p) > self.set.tolerance
        return self.set.side(p) == (1 if self.side == "plus" else -1)

    def boundary_distance(self, points):
        return self.set.distance(points)

    def nearest_boundary(self, points):
        return self.set.nearest(points)

    def boundary(self) -> SegmentSoup:
        if isinstance(self.set, CurveSet):
            return self.set.soup
        raise InputError(f"'{self.set.kind}' sets have no segment boundary")
