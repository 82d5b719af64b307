"""Christ-David dyadic cubes on the model sets.

Curves use dyadic intervals of their global parameter pushed onto E, the
four-corners set uses its replication quadtree (generation ``2m`` is the
level-``m`` squares, generation ``2m+1`` repeats them), and point-sampled
sets get the greedy-net construction of :func:`build_net_grid`.  Cubes are
addressed by ``(k, j)`` and membership is half-open in the parameter.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from core.ambient import AmbientSet, CurveSet, FourCornersSet, PolygonSet
from core.errors import InputError
from core.segments import SegmentSoup, point_box_distance

log = logging.getLogger(__name__)

CubeId = Tuple[int, int]
MAX_GENERATIONS = 24


@dataclass
class DyadicCube:
    k: int
    j: int
    center: np.ndarray
    length: float
    radius: float = 0.0
    measure: float = 0.0
    interval: Optional[Tuple[float, float]] = None    # curve parameter range [t0, t1)
    box: Optional[Tuple[np.ndarray, float]] = None    # four-corners node (corner, side)
    members: Optional[np.ndarray] = None              # net grids: sample indices
    bbox_lo: Optional[np.ndarray] = None
    bbox_hi: Optional[np.ndarray] = None
    parent: Optional[CubeId] = None
    children: List[CubeId] = field(default_factory=list)
    ball_constant: float = 0.0

    @property
    def id(self) -> CubeId:
        return (self.k, self.j)


@dataclass
class BoundarySamples:
    """Quadrature nodes on E tagged with the leaf cube containing them."""

    points: np.ndarray
    weights: np.ndarray
    leaf: List[CubeId]
    params: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.weights)


class DyadicGrid:
    """The cube hierarchy D(E) between generations k_min and k_max."""

    def __init__(self, set_: AmbientSet, k_min: int, k_max: int, kind: str, param_scale: float = 1.0):
        self.set = set_
        self.k_min = k_min
        self.k_max = k_max
        self.kind = kind
        self.param_scale = param_scale
        self.cubes: Dict[CubeId, DyadicCube] = {}
        self.generations: Dict[int, List[CubeId]] = {}
        self._trees: Dict[int, cKDTree] = {}
        self.sample_points: Optional[np.ndarray] = None
        self.sample_weights: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # navigation
    # ------------------------------------------------------------------
    def __getitem__(self, qid: CubeId) -> DyadicCube:
        try:
            return self.cubes[qid]
        except KeyError:
            raise InputError(f"cube {qid} is not in the grid") from None

    def __contains__(self, qid) -> bool:
        return qid in self.cubes

    def __len__(self) -> int:
        return len(self.cubes)

    def generation(self, k: int) -> List[CubeId]:
        return self.generations.get(k, [])

    @property
    def roots(self) -> List[CubeId]:
        return self.generation(self.k_min)

    @property
    def top_cube(self) -> Optional[CubeId]:
        """Q0 = E when the set is bounded and covered by a single root."""
        return self.roots[0] if len(self.roots) == 1 else None

    def parent(self, qid: CubeId) -> DyadicCube:
        q = self[qid]
        if q.parent is None:
            raise InputError(f"cube {qid} is at the top generation and has no parent")
        return self.cubes[q.parent]

    def children(self, qid: CubeId) -> List[DyadicCube]:
        return [self.cubes[c] for c in self[qid].children]

    def descendants(self, qid: CubeId, depth: Optional[int] = None) -> List[DyadicCube]:
        """Q and all cubes below it (down to k_max or ``depth`` generations), breadth first."""
        stop = self.k_max if depth is None else min(self.k_max, qid[0] + depth)
        out, layer = [], [qid]
        while layer:
            out.extend(self.cubes[c] for c in layer)
            if layer[0][0] >= stop:
                break
            layer = [c for p in layer for c in self.cubes[p].children]
        return out

    def ancestors(self, qid: CubeId, stop: Optional[CubeId] = None) -> List[CubeId]:
        """Chain from ``qid`` up to ``stop`` (inclusive) or the root."""
        chain = [qid]
        while chain[-1] != stop and self.cubes[chain[-1]].parent is not None:
            chain.append(self.cubes[chain[-1]].parent)
        if stop is not None and chain[-1] != stop:
            return []
        return chain

    def is_descendant(self, qid: CubeId, of: CubeId) -> bool:
        if qid[0] < of[0]:
            return False
        while qid[0] > of[0]:
            qid = self.cubes[qid].parent
            if qid is None:
                return False
        return qid == of

    def ancestor_at(self, qid: CubeId, k: int) -> Optional[CubeId]:
        while qid is not None and qid[0] > k:
            qid = self.cubes[qid].parent
        return qid if qid is not None and qid[0] == k else None

    def centers(self, k: int) -> np.ndarray:
        return np.array([self.cubes[c].center for c in self.generation(k)]).reshape(-1, 2)

    def tree(self, k: int) -> cKDTree:
        if k not in self._trees:
            self._trees[k] = cKDTree(self.centers(k))
        return self._trees[k]

    # ------------------------------------------------------------------
    # geometry of cubes
    # ------------------------------------------------------------------
    def cube_ball(self, qid: CubeId) -> Tuple[np.ndarray, float, float]:
        """(x_Q, r_Q, C) with Delta(x_Q, 2 r_Q) in Q and Q in Delta(x_Q, C r_Q)."""
        q = self[qid]
        return q.center, q.radius, q.ball_constant

    @property
    def ball_constant(self) -> float:
        return max((q.ball_constant for q in self.cubes.values()), default=0.0)

    def cube_soup(self, qid: CubeId) -> SegmentSoup:
        q = self[qid]
        return self.set.arc(*q.interval)

    def distance_to_cube(self, qid: CubeId, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Exact dist(I, Q) for boxes [lo, hi]."""
        q = self[qid]
        lo = np.asarray(lo, float).reshape(-1, 2)
        hi = np.asarray(hi, float).reshape(-1, 2)
        if q.interval is not None:
            return self.cube_soup(qid).box_distance(lo, hi)
        if q.box is not None:
            return self.set.box_distance_within(lo, hi, q.box[0], q.box[1])
        pts = self.sample_points[q.members]
        return point_box_distance(pts[None, :, :], lo[:, None, :], hi[:, None, :]).min(axis=1)

    def distance_outside(self, qid: CubeId, points: np.ndarray) -> np.ndarray:
        """dist(X, E minus Q)."""
        q = self[qid]
        if q.interval is not None:
            return self.set.soup.exclude(*q.interval).distance(points)
        if q.box is not None:
            # level-m boxes are separated by gaps of at least 2 * side
            corner, side = q.box
            return point_box_distance(np.asarray(points, float), corner, corner + side) + 2.0 * side
        others = np.setdiff1d(np.arange(len(self.sample_points)), q.members)
        if len(others) == 0:
            return np.full(len(points), np.inf)
        return cKDTree(self.sample_points[others]).query(np.asarray(points, float))[0]

    def locate(self, points: np.ndarray, k: int) -> List[Optional[CubeId]]:
        """Cube of generation k containing each point of E (None when outside the grid)."""
        pts = np.asarray(points, float).reshape(-1, 2)
        if isinstance(self.set, CurveSet):
            t = self.set.nearest_param(pts) / self.param_scale
            j = np.floor(t * 2.0 ** k).astype(np.int64)
            return [(k, int(jj)) if (k, int(jj)) in self.cubes else None for jj in j]
        if self.kind == "box":
            js = self.set.locate(pts, k // 2)
            return [(k, int(jj)) if jj >= 0 and (k, int(jj)) in self.cubes else None for jj in js]
        _, idx = self.tree(k).query(pts)
        gen = self.generation(k)
        return [gen[i] for i in idx]

    # ------------------------------------------------------------------
    # quadrature on E
    # ------------------------------------------------------------------
    def boundary_samples(self, qid: CubeId, per_leaf: int = 4, leaf_k: Optional[int] = None) -> BoundarySamples:
        """Nodes on Q tagged with their generation-``leaf_k`` cube (default k_max)."""
        leaf_k = self.k_max if leaf_k is None else leaf_k
        leaves = [c for c in self.descendants(qid) if c.k == leaf_k]
        pts, wts, tags, params = [], [], [], []
        for c in leaves:
            if c.interval is not None:
                t0, t1 = c.interval
                edges = np.linspace(t0, t1, per_leaf + 1)
                mids = 0.5 * (edges[:-1] + edges[1:])
                w = np.array([self.set.arc_length(a, b) for a, b in zip(edges[:-1], edges[1:])])
                pts.append(self.set.point_at(mids))
                params.append(mids)
            elif c.box is not None:
                corner, side = c.box
                sq = self.set.squares
                inside = np.all((sq >= corner - 1e-15) & (sq < corner + side - 1e-15), axis=1)
                pts.append(sq[inside] + self.set.side_length / 2.0)
                w = np.full(int(inside.sum()), 4.0 ** (-self.set.level))
            else:
                pts.append(self.sample_points[c.members])
                w = self.sample_weights[c.members]
            wts.append(w)
            tags.extend([c.id] * len(w))
        return BoundarySamples(
            np.concatenate(pts) if pts else np.zeros((0, 2)),
            np.concatenate(wts) if wts else np.zeros(0),
            tags,
            np.concatenate(params) if params else None,
        )

    def records(self) -> List[Dict[str, float]]:
        """One row per cube (k, j, x_Q, r_Q, parent), ordered by (k, j)."""
        rows = []
        for qid in sorted(self.cubes):
            q = self.cubes[qid]
            rows.append({
                "k": q.k, "j": q.j,
                "x": float(q.center[0]), "y": float(q.center[1]),
                "r": float(q.radius),
                "parent_j": "" if q.parent is None else q.parent[1],
            })
        return rows

    def check_nesting(self) -> bool:
        """Children partition the parent (parameter intervals / member sets)."""
        for q in self.cubes.values():
            if not q.children or q.k >= self.k_max:
                continue
            kids = [self.cubes[c] for c in q.children]
            if q.interval is not None:
                edges = sorted(k.interval for k in kids)
                if not np.isclose(edges[0][0], q.interval[0]) or not np.isclose(edges[-1][1], q.interval[1]):
                    return False
                if any(not np.isclose(a[1], b[0]) for a, b in zip(edges[:-1], edges[1:])):
                    return False
            elif q.members is not None:
                merged = np.sort(np.concatenate([k.members for k in kids]))
                if not np.array_equal(merged, np.sort(q.members)):
                    return False
            if not np.isclose(sum(k.measure for k in kids), q.measure, rtol=1e-9):
                return False
        return True


# ----------------------------------------------------------------------
# builders
# ----------------------------------------------------------------------
def _check_range(k_min: int, k_max: int):
    if k_max < k_min:
        raise InputError("k_max must be at least k_min", k_min=k_min, k_max=k_max)
    if k_max - k_min > MAX_GENERATIONS:
        raise InputError(f"at most {MAX_GENERATIONS} generations per grid", k_min=k_min, k_max=k_max)


def build_grid(set_: AmbientSet, k_min: int, k_max: int,
               window: Optional[Tuple[float, float]] = None) -> DyadicGrid:
    """Build D(E) for generations k_min..k_max.

    ``window`` is the parameter range covered for unbounded curves.
    """
    _check_range(k_min, k_max)
    if isinstance(set_, FourCornersSet):
        grid = _build_four_corners(set_, k_min, k_max)
    elif isinstance(set_, CurveSet):
        grid = _build_curve(set_, k_min, k_max, window)
    else:
        raise InputError(f"no exact grid for '{set_.kind}' sets; use build_net_grid")
    log.info("dyadic grid on %s: generations %d..%d, %d cubes",
             set_.kind, grid.k_min, grid.k_max, len(grid))
    return grid


def _build_curve(set_: CurveSet, k_min: int, k_max: int, window) -> DyadicGrid:
    if isinstance(set_, PolygonSet):
        k_top = int(np.ceil(-np.log2(set_.perimeter)))
        if k_min < k_top:
            raise InputError("k_min is coarser than the polygon's top cube", k_min=k_min, k_top=k_top)
        # normalized parameter: the whole boundary is exactly the dyadic interval [0, 2^-k_top)
        scale = set_.perimeter * 2.0 ** k_top
        lo_u, hi_u = 0.0, 2.0 ** (-k_top)
    else:
        scale = 1.0
        if window is None:
            window = set_.sampling_window()
        lo_u, hi_u = float(window[0]), float(window[1])
        if not lo_u < hi_u:
            raise InputError("grid parameter window must have lo < hi", window=window)
    grid = DyadicGrid(set_, k_min, k_max, "interval", param_scale=scale)

    for k in range(k_min, k_max + 1):
        h = 2.0 ** (-k)
        if k == k_min:
            js = np.arange(int(np.floor(lo_u / h)), int(np.ceil(hi_u / h)))
        else:
            js = np.array([2 * pj + d for pj in (q[1] for q in grid.generation(k - 1)) for d in (0, 1)], dtype=np.int64)
        ids = []
        for j in js:
            t0, t1 = j * h * scale, (j + 1) * h * scale
            arc = set_.arc(t0, t1)
            mid = set_.point_at(0.5 * (t0 + t1))
            ends = np.vstack([arc.starts, arc.ends()])
            q = DyadicCube(k, int(j), np.asarray(mid, float), h, interval=(t0, t1),
                           measure=arc.total_length, bbox_lo=ends.min(axis=0), bbox_hi=ends.max(axis=0))
            if k > k_min:
                q.parent = (k - 1, int(j) // 2)
                grid.cubes[q.parent].children.append(q.id)
            grid.cubes[q.id] = q
            ids.append(q.id)
        grid.generations[k] = ids
        _assign_curve_balls(grid, ids)
        log.debug("generation %d: %d cubes", k, len(ids))
    return grid


def _assign_curve_balls(grid: DyadicGrid, ids: Sequence[CubeId]):
    set_ = grid.set
    for qid in ids:
        q = grid.cubes[qid]
        outside = set_.soup.exclude(*q.interval).distance(q.center[None])[0]
        q.radius = min(q.length / 4.0, outside / 2.0)
        arc = grid.cube_soup(qid)
        ends = np.vstack([arc.starts, arc.ends()])
        reach = float(np.max(np.hypot(*(ends - q.center).T)))
        q.ball_constant = reach / q.radius if q.radius > 0 else np.inf


def _build_four_corners(set_: FourCornersSet, k_min: int, k_max: int) -> DyadicGrid:
    if k_min < 0:
        raise InputError("four-corners grids start at generation 0", k_min=k_min)
    if k_max > 2 * set_.level:
        log.warning("k_max %d capped at 2*level = %d", k_max, 2 * set_.level)
        k_max = 2 * set_.level
        _check_range(k_min, k_max)
    grid = DyadicGrid(set_, k_min, k_max, "box")
    leaf_half = set_.side_length / 2.0

    # level-m node corners in base-4 digit order, j = digits read as a base-4 number
    corners = {0: np.zeros((1, 2))}
    for m in range(1, k_max // 2 + 1):
        corners[m] = FourCornersSet.node_corners(corners[m - 1], m - 1)

    for k in range(k_min, k_max + 1):
        m = k // 2
        side = 4.0 ** (-m)
        ids = []
        for j, corner in enumerate(corners[m]):
            q = DyadicCube(k, j, corner + leaf_half, 2.0 ** (-k), box=(corner, side),
                           measure=4.0 ** (-m), bbox_lo=corner.copy(), bbox_hi=corner + side)
            # boxes are 2*side apart, so dist(x_Q, E minus Q) >= 2*side > length/2
            q.radius = q.length / 4.0
            far = np.maximum(np.abs(corner - q.center), np.abs(corner + side - q.center))
            q.ball_constant = float(np.hypot(*far)) / q.radius
            if k > k_min:
                q.parent = (k - 1, j) if k % 2 == 1 else (k - 1, j // 4)
                grid.cubes[q.parent].children.append(q.id)
            grid.cubes[q.id] = q
            ids.append(q.id)
        grid.generations[k] = ids
    return grid


def build_net_grid(points: np.ndarray, weights: np.ndarray, k_min: int, k_max: int,
                   set_: Optional[AmbientSet] = None) -> DyadicGrid:
    """Greedy 2^-k nets, nested across generations, with nearest-net-point cells.

    Points are processed in lexicographic order; ties in the nearest net
    point go to the lexicographically smallest one.
    """
    _check_range(k_min, k_max)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(pts) == 0 or len(w) != len(pts):
        raise InputError("net grids need a non-empty point set with one weight per point")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts, w = pts[order], w[order]
    tree = cKDTree(pts)

    nets: Dict[int, np.ndarray] = {}
    chosen = np.zeros(len(pts), dtype=bool)
    for k in range(k_min, k_max + 1):
        h = 2.0 ** (-k)
        covered = np.zeros(len(pts), dtype=bool)
        for i in np.flatnonzero(chosen):
            covered[tree.query_ball_point(pts[i], h * (1 - 1e-12))] = True
        for i in range(len(pts)):
            if not covered[i]:
                chosen[i] = True
                covered[tree.query_ball_point(pts[i], h * (1 - 1e-12))] = True
        nets[k] = np.flatnonzero(chosen)

    def assign(query: np.ndarray, net_idx: np.ndarray) -> np.ndarray:
        d = np.hypot(*(query[:, None, :] - pts[net_idx][None, :, :]).transpose(2, 0, 1))
        dmin = d.min(axis=1, keepdims=True)
        # first (smallest index, hence lexicographically smallest) minimizer
        return np.argmax(d <= dmin * (1 + 1e-12) + 1e-300, axis=1)

    grid = DyadicGrid(set_, k_min, k_max, "points")
    grid.sample_points, grid.sample_weights = pts, w
    owner = {k_max: assign(pts, nets[k_max])}
    parent_of = {}
    for k in range(k_max, k_min, -1):
        parent_of[k] = assign(pts[nets[k]], nets[k - 1])
        owner[k - 1] = parent_of[k][owner[k]]

    for k in range(k_min, k_max + 1):
        ids = []
        for j, idx in enumerate(nets[k]):
            members = np.flatnonzero(owner[k] == j)
            if len(members) == 0:
                continue
            mp = pts[members]
            q = DyadicCube(k, j, pts[idx].copy(), 2.0 ** (-k), members=members,
                           measure=float(w[members].sum()), bbox_lo=mp.min(axis=0), bbox_hi=mp.max(axis=0))
            if k > k_min:
                q.parent = (k - 1, int(parent_of[k][j]))
                grid.cubes[q.parent].children.append(q.id)
            grid.cubes[q.id] = q
            ids.append(q.id)
        grid.generations[k] = ids
        for qid in ids:
            q = grid.cubes[qid]
            outside = grid.distance_outside(qid, q.center[None])[0]
            q.radius = min(q.length / 4.0, outside / 2.0)
            reach = float(np.max(np.hypot(*(pts[q.members] - q.center).T)))
            q.ball_constant = reach / q.radius if q.radius > 0 else np.inf
    log.info("net grid: %d points, generations %d..%d, %d cubes", len(pts), k_min, k_max, len(grid))
    return grid


# ----------------------------------------------------------------------
# measured grid regularity
# ----------------------------------------------------------------------
def thin_boundary_ratio(grid: DyadicGrid, qid: CubeId, rho: float, resolution: int = 4096) -> float:
    """sigma{x in Q : dist(x, E minus Q) <= rho l(Q)} / sigma(Q)."""
    if not 0 < rho < 1:
        raise InputError("thin-boundary parameter must lie in (0, 1)", rho=rho)
    q = grid[qid]
    if q.box is not None:
        # other boxes are at least 2 * side away, and rho * l(Q) < 2 * side
        return 0.0
    if q.interval is not None:
        nodes, wts = grid.cube_soup(qid).midpoint_samples(q.length / resolution)
    else:
        nodes, wts = grid.sample_points[q.members], grid.sample_weights[q.members]
    if wts.sum() <= 0:
        return 0.0
    near = grid.distance_outside(qid, nodes) <= rho * q.length
    return float(wts[near].sum() / wts.sum())


def thin_boundary_exponent(grid: DyadicGrid, cubes: Sequence[CubeId],
                           rhos: Sequence[float] = tuple(2.0 ** -np.arange(1, 7))) -> Tuple[float, float]:
    """Fitted gamma and R^2 of log(mean ratio) against log(rho)."""
    rhos = np.asarray(rhos, dtype=float)
    mean = np.array([np.mean([thin_boundary_ratio(grid, q, r) for q in cubes]) for r in rhos])
    ok = mean > 0
    if ok.sum() < 2:
        return float("inf"), 1.0
    x, y = np.log(rhos[ok]), np.log(mean[ok])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def dyadic_maximal(grid: DyadicGrid, samples: BoundarySamples, f: np.ndarray,
                   q0: CubeId, p: float = 1.0) -> np.ndarray:
    """M^D_{Q0,p} f at every sample: sup over cubes Q0 >= Q containing x of (avg_Q |f|^p)^(1/p).

    One bottom-up sweep accumulates the integrals, one top-down sweep
    propagates running maxima.  The sample's own value stands in for the
    cubes below the finest generation.
    """
    if p <= 0:
        raise InputError("maximal function exponent must be positive", p=p)
    if len(samples) == 0:
        raise InputError("dyadic maximal function of an empty sample set")
    vals = np.abs(np.asarray(f, dtype=float)) ** p
    integral: Dict[CubeId, float] = {}
    mass: Dict[CubeId, float] = {}
    for tag, v, wt in zip(samples.leaf, vals, samples.weights):
        integral[tag] = integral.get(tag, 0.0) + v * wt
        mass[tag] = mass.get(tag, 0.0) + wt
    layer = sorted(integral)
    while layer and layer[0][0] > q0[0]:
        up = {}
        for c in layer:
            par = grid.cubes[c].parent
            integral[par] = integral.get(par, 0.0) + integral[c]
            mass[par] = mass.get(par, 0.0) + mass[c]
            up[par] = True
        layer = sorted(up)
    best: Dict[CubeId, float] = {}
    for qcube in grid.descendants(q0):
        c = qcube.id
        if c not in mass:
            continue
        avg = integral[c] / mass[c] if mass[c] > 0 else 0.0
        best[c] = max(avg, best.get(qcube.parent, 0.0) if c != q0 else 0.0)
    out = np.maximum(np.array([best[t] for t in samples.leaf]), vals)
    return out ** (1.0 / p)
