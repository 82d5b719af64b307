"""Model rough sets in the plane and their geometric oracles.

Every set exposes a distance oracle, a box-distance oracle (used by the
Whitney decomposition), a surface-measure oracle ``measure(x, r)`` for
``sigma(Delta(x, r))`` and a nearest-point oracle.  Curves (graphs, flat
lines, polygons) are exact through :class:`~core.segments.SegmentSoup`;
the four-corners set uses a level-by-level branch-and-bound over its
replication tree.
"""

import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from core.errors import CorkscrewError, DegenerateSetError, InputError, BudgetEscalation
from core.segments import SegmentSoup, box_box_distance, point_box_distance, points_in_polygon, segments_intersect

log = logging.getLogger(__name__)

SIDES = ("plus", "minus", "any")
MAX_FOUR_CORNERS_LEVEL = 12


@dataclass(frozen=True)
class AdrEstimate:
    c_lower: float
    c_upper: float
    scale_range: Tuple[float, float]
    sample_count: int

    @property
    def ratio(self) -> float:
        return self.c_upper / self.c_lower


class AmbientSet(ABC):
    """A closed set E in the plane (boundary dimension n = 1)."""

    kind: str = ""
    n: int = 1

    def __init__(self, diam: float, lipschitz_M: Optional[float] = None):
        self.diam = float(diam)
        self.lipschitz_M = lipschitz_M

    @property
    def scale(self) -> float:
        return self.diam if np.isfinite(self.diam) else 1.0

    @property
    def tolerance(self) -> float:
        return 1e-12 * self.scale

    @property
    @abstractmethod
    def corkscrew_constant(self) -> float:
        ...

    @abstractmethod
    def distance(self, points: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def box_distance(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def nearest(self, points: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def measure(self, centers: np.ndarray, radii) -> np.ndarray:
        """sigma(Delta(x, r)) for each center/radius pair."""

    @abstractmethod
    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Random points of E (within the unit sampling window for unbounded sets)."""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        ...

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.distance(points) <= self.tolerance

    def side(self, points: np.ndarray) -> np.ndarray:
        """+1 / -1 for the two complementary components, 0 on E."""
        raise InputError(f"'{self.kind}' sets have no distinguished complementary sides")

    def has_sides(self) -> bool:
        return False

    def geometry_hash(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ----------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------
class CurveSet(AmbientSet):
    """A piecewise-linear curve with a global parameter (abscissa or arclength)."""

    def __init__(self, soup: SegmentSoup, param_lo: float, param_hi: float,
                 diam: float, lipschitz_M: Optional[float] = None):
        super().__init__(diam, lipschitz_M)
        self.soup = soup
        self.param_lo = param_lo
        self.param_hi = param_hi

    @property
    def corkscrew_constant(self) -> float:
        return 2.0 * np.sqrt(1.0 + (self.lipschitz_M or 0.0) ** 2)

    def distance(self, points):
        return self.soup.distance(points)

    def box_distance(self, lo, hi):
        return self.soup.box_distance(lo, hi)

    def nearest(self, points):
        return self.soup.nearest(points)[0]

    def nearest_param(self, points) -> np.ndarray:
        return self.soup.nearest(points)[1]

    def measure(self, centers, radii):
        return self.soup.ball_length(centers, radii)

    def arc(self, t0: float, t1: float) -> SegmentSoup:
        """The piece of E with parameter in [t0, t1]."""
        return self.soup.restrict(t0, t1)

    def arc_length(self, t0: float, t1: float) -> float:
        return self.arc(t0, t1).total_length

    @abstractmethod
    def point_at(self, t) -> np.ndarray:
        ...

    def sampling_window(self) -> Tuple[float, float]:
        if np.isfinite(self.param_lo) and np.isfinite(self.param_hi):
            return self.param_lo, self.param_hi
        return -1.0, 1.0

    def sample_points(self, count, rng):
        lo, hi = self.sampling_window()
        return self.point_at(rng.uniform(lo, hi, size=count))

    def quadrature(self, t0: float, t1: float, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
        """Midpoint nodes and arclength weights on the arc [t0, t1]."""
        return self.arc(t0, t1).midpoint_samples(spacing)


class GraphSet(CurveSet):
    """Graph of a piecewise-linear psi, extended constantly past its breakpoints."""

    kind = "graph"

    def __init__(self, xs: np.ndarray, ys: np.ndarray, kind: str = "graph"):
        self.kind = kind
        self.xs = xs
        self.ys = ys
        starts, vecs, lengths, origins, slopes = [], [], [], [], []
        starts.append([xs[0], ys[0]]); vecs.append([-1.0, 0.0]); lengths.append(np.inf)
        origins.append(xs[0]); slopes.append(-1.0)
        for i in range(len(xs) - 1):
            dx = xs[i + 1] - xs[i]
            starts.append([xs[i], ys[i]]); vecs.append([1.0, (ys[i + 1] - ys[i]) / dx])
            lengths.append(dx); origins.append(xs[i]); slopes.append(1.0)
        starts.append([xs[-1], ys[-1]]); vecs.append([1.0, 0.0]); lengths.append(np.inf)
        origins.append(xs[-1]); slopes.append(1.0)
        soup = SegmentSoup(np.array(starts, float), np.array(vecs, float), np.array(lengths, float),
                           np.array(origins, float), np.array(slopes, float))
        slopes_psi = np.diff(ys) / np.diff(xs) if len(xs) > 1 else np.zeros(0)
        M = float(np.max(np.abs(slopes_psi))) if len(slopes_psi) else 0.0
        super().__init__(soup, -np.inf, np.inf, np.inf, M)

    def psi(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    def point_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([t, self.psi(t)], axis=-1)

    def side(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        gap = p[:, 1] - self.psi(p[:, 0])
        out = np.sign(gap).astype(int)
        out[self.distance(p) <= self.tolerance] = 0
        return out

    def has_sides(self):
        return True

    def describe(self):
        return {"kind": self.kind, "breakpoints": [[float(x), float(y)] for x, y in zip(self.xs, self.ys)]}


class PolygonSet(CurveSet):
    """Boundary of a simple polygon; "plus" is the bounded component."""

    kind = "polygon"

    def __init__(self, vertices: np.ndarray):
        self.vertices = vertices
        nxt = np.roll(vertices, -1, axis=0)
        soup = SegmentSoup.from_segments(vertices, nxt)
        self.perimeter = soup.total_length
        self._cum = np.concatenate([[0.0], np.cumsum(np.hypot(*(nxt - vertices).T))])
        diff = vertices[:, None, :] - vertices[None, :, :]
        diam = float(np.max(np.hypot(diff[..., 0], diff[..., 1])))
        edge = nxt - vertices
        prev = np.roll(edge, 1, axis=0)
        cross = prev[:, 0] * edge[:, 1] - prev[:, 1] * edge[:, 0]
        turn = np.abs(np.arctan2(cross, np.einsum("ij,ij->i", prev, edge)))
        # local graph slope at the sharpest vertex
        M = float(np.tan(min(np.max(turn) / 2.0, np.pi / 2 - 1e-3)))
        super().__init__(soup, 0.0, self.perimeter, diam, M)

    @property
    def corkscrew_constant(self) -> float:
        return 8.0 * np.sqrt(1.0 + self.lipschitz_M ** 2)

    def point_at(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.perimeter)
        closed = np.vstack([self.vertices, self.vertices[:1]])
        return np.stack([np.interp(t, self._cum, closed[:, 0]), np.interp(t, self._cum, closed[:, 1])], axis=-1)

    def side(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.where(points_in_polygon(p, self.vertices), 1, -1)
        out[self.distance(p) <= self.tolerance] = 0
        return out

    def has_sides(self):
        return True

    def describe(self):
        return {"kind": self.kind, "vertices": self.vertices.tolist()}


# ----------------------------------------------------------------------
# four-corners Cantor set
# ----------------------------------------------------------------------
_CHILD_OFFSETS = np.array([[0.0, 0.0], [0.75, 0.0], [0.0, 0.75], [0.75, 0.75]])


class FourCornersSet(AmbientSet):
    """Generation-``level`` four-corners set: 4^level closed squares of side 4^-level."""

    kind = "four_corners"

    def __init__(self, level: int):
        super().__init__(np.sqrt(2.0))
        self.level = level
        self.side_length = 4.0 ** (-level)
        corners = np.zeros((1, 2))
        for m in range(level):
            corners = (corners[:, None, :] + _CHILD_OFFSETS[None, :, :] * 4.0 ** (-m)).reshape(-1, 2)
        self.squares = corners

    @property
    def corkscrew_constant(self) -> float:
        return 16.0

    @staticmethod
    def node_corners(corners: np.ndarray, m: int) -> np.ndarray:
        return (corners[:, None, :] + _CHILD_OFFSETS[None, :, :] * 4.0 ** (-m)).reshape(-1, 2)

    def _frontier(self, qlo: np.ndarray, qhi: np.ndarray, start: Optional[np.ndarray] = None, start_level: int = 0):
        """Branch and bound to the leaf squares nearest each query box.

        The search runs inside the node ``start`` of level ``start_level``
        (the whole set by default).  Returns the surviving (query index,
        leaf corner) pairs and the exact leaf distances.  The four corners
        of every node box lie in E, which gives the pruning upper bound.
        """
        nq = len(qlo)
        qidx = np.arange(nq)
        corners = np.zeros((nq, 2)) if start is None else np.tile(np.asarray(start, float).reshape(1, 2), (nq, 1))
        upper = np.full(nq, np.inf)
        for m in range(start_level, self.level + 1):
            side = 4.0 ** (-m)
            lb = box_box_distance(qlo[qidx], qhi[qidx], corners, corners + side)
            if m == self.level:
                return qidx, corners, lb
            box_pts = corners[:, None, :] + np.array([[0, 0], [side, 0], [0, side], [side, side]])[None]
            ub = point_box_distance(box_pts, qlo[qidx][:, None, :], qhi[qidx][:, None, :]).min(axis=1)
            np.minimum.at(upper, qidx, ub)
            keep = lb <= upper[qidx] + 1e-15
            qidx, corners = qidx[keep], corners[keep]
            corners = self.node_corners(corners, m)
            qidx = np.repeat(qidx, 4)
        raise AssertionError("unreachable")

    def box_distance(self, lo, hi, chunk: int = 4096):
        lo = np.asarray(lo, dtype=float).reshape(-1, 2)
        hi = np.asarray(hi, dtype=float).reshape(-1, 2)
        out = np.full(len(lo), np.inf)
        for i in range(0, len(lo), chunk):
            qidx, _, d = self._frontier(lo[i:i + chunk], hi[i:i + chunk])
            sub = np.full(min(chunk, len(lo) - i), np.inf)
            np.minimum.at(sub, qidx, d)
            out[i:i + chunk] = sub
        return out

    def box_distance_within(self, lo, hi, corner: np.ndarray, side: float) -> np.ndarray:
        """Distance from boxes to the part of E inside the node box (corner, side)."""
        lo = np.asarray(lo, dtype=float).reshape(-1, 2)
        hi = np.asarray(hi, dtype=float).reshape(-1, 2)
        level = int(round(-np.log(side) / np.log(4.0)))
        qidx, _, d = self._frontier(lo, hi, start=corner, start_level=level)
        out = np.full(len(lo), np.inf)
        np.minimum.at(out, qidx, d)
        return out

    def locate(self, points: np.ndarray, m: int) -> np.ndarray:
        """Base-4 index of the level-m node box containing each point (-1 if none)."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        j = np.zeros(len(p), dtype=np.int64)
        corner = np.zeros((len(p), 2))
        ok = np.all((p >= 0) & (p <= 1), axis=1)
        for i in range(m):
            side = 4.0 ** (-i)
            rel = (p - corner) / side
            bits = (rel >= 0.75 - 1e-12).astype(np.int64)
            ok &= np.all((rel <= 0.25 + 1e-12) | (bits == 1), axis=1)
            j = 4 * j + bits[:, 0] + 2 * bits[:, 1]
            corner = corner + 0.75 * side * bits
        return np.where(ok, j, -1)

    def distance(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return self.box_distance(p, p)

    def nearest(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        qidx, corners, d = self._frontier(p, p)
        order = np.lexsort((d, qidx))
        _, first = np.unique(qidx[order], return_index=True)
        pick = order[first]
        return np.clip(p[qidx[pick]], corners[pick], corners[pick] + self.side_length)

    def measure(self, centers, radii, subcells: int = 16):
        """Normalized area measure of the squares inside B(x, r), exhaustive down the tree."""
        c = np.asarray(centers, dtype=float).reshape(-1, 2)
        r = np.broadcast_to(np.asarray(radii, dtype=float), (len(c),))
        total = np.zeros(len(c))
        qidx = np.arange(len(c))
        corners = np.zeros((len(c), 2))
        for m in range(self.level + 1):
            side = 4.0 ** (-m)
            mass = 4.0 ** (-m)
            lb = point_box_distance(c[qidx], corners, corners + side)
            far = np.maximum(np.abs(c[qidx] - corners), np.abs(c[qidx] - corners - side))
            full = np.hypot(far[:, 0], far[:, 1]) <= r[qidx]
            np.add.at(total, qidx[full], mass)
            partial = (~full) & (lb <= r[qidx])
            qidx, corners = qidx[partial], corners[partial]
            if m == self.level:
                break
            corners = self.node_corners(corners, m)
            qidx = np.repeat(qidx, 4)
        # partial leaves: midpoint rule on a subcell grid
        g = (np.arange(subcells) + 0.5) / subcells * self.side_length
        gx, gy = np.meshgrid(g, g, indexing="ij")
        offs = np.column_stack([gx.ravel(), gy.ravel()])
        for i in range(0, len(qidx), 2048):
            qi = qidx[i:i + 2048]
            nodes = corners[i:i + 2048][:, None, :] + offs[None, :, :]
            d = np.hypot(*(nodes - c[qi][:, None, :]).transpose(2, 0, 1))
            frac = np.mean(d <= r[qi][:, None], axis=1)
            np.add.at(total, qi, frac * 4.0 ** (-self.level))
        return total

    def sample_points(self, count, rng):
        pick = rng.integers(0, len(self.squares), size=count)
        return self.squares[pick] + rng.uniform(0.0, self.side_length, size=(count, 2))

    def describe(self):
        return {"kind": self.kind, "level": self.level}


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------
def make_graph_set(breakpoints: Sequence[Sequence[float]], kind: str = "graph") -> GraphSet:
    pts = np.asarray(breakpoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
        raise InputError("graph breakpoints must be a non-empty sequence of (abscissa, ordinate)")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise InputError("graph breakpoints must be strictly increasing in abscissa",
                         abscissae=pts[:, 0].tolist())
    if not np.all(np.isfinite(pts)):
        raise InputError("graph breakpoints must be finite")
    return GraphSet(pts[:, 0].copy(), pts[:, 1].copy(), kind=kind)


def make_flat_set() -> GraphSet:
    return make_graph_set([(0.0, 0.0)], kind="flat")


def make_four_corners(level: int) -> FourCornersSet:
    if not isinstance(level, (int, np.integer)) or level < 1:
        raise InputError("four-corners level must be a positive integer", level=level)
    if level > MAX_FOUR_CORNERS_LEVEL:
        raise InputError(f"four-corners level {level} exceeds the guard {MAX_FOUR_CORNERS_LEVEL}")
    return FourCornersSet(int(level))


def make_polygon_set(vertices: Sequence[Sequence[float]]) -> PolygonSet:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise InputError("polygon vertices must be (x, y) pairs")
    if len(v) > 1 and np.allclose(v[0], v[-1]):
        v = v[:-1]
    if len(v) < 3:
        raise InputError("a polygon needs at least 3 vertices", count=len(v))
    a, b = v, np.roll(v, -1, axis=0)
    if np.any(np.hypot(*(b - a).T) == 0):
        raise InputError("polygon has repeated consecutive vertices")
    nv = len(v)
    for i in range(nv):
        for j in range(i + 1, nv):
            if j == i + 1 or (i == 0 and j == nv - 1):
                continue
            if segments_intersect(a[i], b[i], a[j], b[j]):
                raise InputError("polygon is self-intersecting", edges=(i, j))
    area = 0.5 * np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1])
    if area < 0:
        v = v[::-1].copy()
    return PolygonSet(v)


def set_from_config(spec: Dict[str, Any]) -> AmbientSet:
    """Rebuild a set from its ``describe()`` block."""
    kind = spec.get("kind")
    if kind == "flat":
        return make_flat_set()
    if kind == "graph":
        return make_graph_set(spec["breakpoints"])
    if kind == "polygon":
        return make_polygon_set(spec["vertices"])
    if kind == "four_corners":
        return make_four_corners(int(spec["level"]))
    raise InputError(f"unknown set kind '{kind}'")


# ----------------------------------------------------------------------
# measured constants
# ----------------------------------------------------------------------
def estimate_adr(set_: AmbientSet, r_min: float, r_max: float, samples: int, seed: int = 0) -> AdrEstimate:
    if not 0 < r_min < r_max or r_max >= set_.diam or samples < 1:
        raise InputError("estimate_adr needs 0 < r_min < r_max < diam(E) and samples >= 1",
                         r_min=r_min, r_max=r_max, samples=samples)
    rng = np.random.default_rng(seed)
    x = set_.sample_points(samples, rng)
    r = np.exp(rng.uniform(np.log(r_min), np.log(r_max), size=samples))
    # the extreme scales are always probed
    r[0], r[-1] = r_min, r_max
    ratio = set_.measure(x, r) / r ** set_.n
    if not np.any(ratio > 0):
        raise DegenerateSetError("set has zero measure on every sampled ball", kind=set_.kind)
    log.debug("ADR %s: %d balls, ratio range [%.4g, %.4g]", set_.kind, samples, ratio.min(), ratio.max())
    return AdrEstimate(float(ratio.min()), float(ratio.max()), (r_min, r_max), samples)


def _side_ok(set_: AmbientSet, pts: np.ndarray, side: str) -> np.ndarray:
    if side == "any":
        return np.ones(len(pts), dtype=bool)
    want = 1 if side == "plus" else -1
    return set_.side(pts) == want


def corkscrew(set_: AmbientSet, x, r: float, side: str = "any", resolution: int = 24) -> np.ndarray:
    """A point X with B(X, r/C) inside B(x, r) minus E, C the set's published constant."""
    if side not in SIDES:
        raise InputError(f"side must be one of {SIDES}", side=side)
    if not 0 < r or (np.isfinite(set_.diam) and r >= set_.diam):
        raise InputError("corkscrew radius must satisfy 0 < r < diam(E)", r=r)
    if side != "any" and not set_.has_sides():
        raise InputError(f"side '{side}' is undefined for '{set_.kind}' sets")
    x = np.asarray(x, dtype=float).reshape(2)
    C = set_.corkscrew_constant

    def room(pts):
        return np.minimum(set_.distance(pts), r - np.hypot(*(pts - x).T))

    if isinstance(set_, GraphSet) and side in ("plus", "minus"):
        sign = 1.0 if side == "plus" else -1.0
        X = np.array([x[0], set_.psi(x[0]) + sign * r / 2.0])
        if np.hypot(*(X - x)) < r and room(X[None])[0] >= r / C:
            return X

    def search(res):
        res = int(res)
        rad = (np.arange(1, res + 1) / (res + 1)) * r
        ang = np.linspace(0.0, 2 * np.pi, 2 * res, endpoint=False)
        R, A = np.meshgrid(rad, ang, indexing="ij")
        pts = x + np.column_stack([(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()])
        pts = pts[_side_ok(set_, pts, side)]
        if len(pts) == 0:
            raise CorkscrewError("no candidate on the requested side", best_constant=np.inf, side=side)
        score = room(pts)
        best = int(np.argmax(score))
        if score[best] >= r / C:
            return pts[best]
        raise CorkscrewError(f"no corkscrew at constant {C:.3g}",
                             best_constant=float(r / max(score[best], 1e-300)), x=x.tolist(), r=r)

    return BudgetEscalation(resolution, factor=2.0, max_attempts=3, retry_on=(CorkscrewError,)).run(search)


def measured_corkscrew_constant(set_: AmbientSet, x, r: float, X) -> float:
    X = np.asarray(X, dtype=float).reshape(1, 2)
    room = min(float(set_.distance(X)[0]), r - float(np.hypot(*(X[0] - np.asarray(x, float)))))
    return float(r / room) if room > 0 else np.inf
