"""Whitney decomposition of the complement of E inside a window.

Stein selection keeps the maximal dyadic boxes with diam(Q) <= dist(Q, E);
each selected box is then cut into 8 x 8 pieces, which gives every emitted
cube the display ``4 diam(I) <= dist(4I, E) <= dist(I, E) <= 40 diam(I)``.
Cubes live in flat numpy arrays addressed by position; ``(k, ix, iy)``
keys map back to positions.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from core.ambient import AmbientSet
from core.dyadic_grid import CubeId, DyadicCube, DyadicGrid
from core.errors import CoverageError, InputError
from core.segments import box_box_distance
from core.worker_pool import chunked

log = logging.getLogger(__name__)

TAU_0 = 2.0 ** -4
SUBDIVISION = 8
MAX_DEPTH = 24


@dataclass(frozen=True)
class Window:
    lo: Tuple[float, float]
    hi: Tuple[float, float]

    def __post_init__(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise InputError("window must satisfy lo < hi in both coordinates", lo=self.lo, hi=self.hi)

    @property
    def extent(self) -> float:
        return max(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1])

    @property
    def area(self) -> float:
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, 2)
        return np.all((p >= np.array(self.lo)) & (p <= np.array(self.hi)), axis=1)

    def meets(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Boxes with interiors meeting the window interior."""
        return np.all((lo < np.array(self.hi)) & (hi > np.array(self.lo)), axis=-1)


def dilate(lo: np.ndarray, hi: np.ndarray, tau: float, tau_max: float = TAU_0) -> Tuple[np.ndarray, np.ndarray]:
    """Concentric dilate (1 + tau) I."""
    if not 0 < tau <= tau_max:
        raise InputError(f"dilation parameter must satisfy 0 < tau <= {tau_max}", tau=tau)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    grow = 0.5 * tau * (hi - lo)
    return lo - grow, hi + grow


def scale_box(lo: np.ndarray, hi: np.ndarray, factor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Concentric box with side multiplied by ``factor`` (no range check)."""
    c = 0.5 * (np.asarray(lo, float) + np.asarray(hi, float))
    half = 0.5 * factor * (np.asarray(hi, float) - np.asarray(lo, float))
    return c - half, c + half


class WhitneyDecomposition:
    """Window-truncated Whitney cubes with a key index, a k-d tree and lazy adjacency."""

    def __init__(self, set_: AmbientSet, window: Window, depth: int,
                 k: np.ndarray, ix: np.ndarray, iy: np.ndarray, dist: np.ndarray):
        order = np.lexsort((iy, ix, k))
        self.set = set_
        self.window = window
        self.depth = depth
        self.k, self.ix, self.iy = k[order], ix[order], iy[order]
        self.side = 2.0 ** (-self.k.astype(float))
        self.lo = np.column_stack([self.ix * self.side, self.iy * self.side])
        self.hi = self.lo + self.side[:, None]
        self.center = 0.5 * (self.lo + self.hi)
        self.dist = dist[order]
        self.index: Dict[Tuple[int, int, int], int] = {
            (int(a), int(b), int(c)): i for i, (a, b, c) in enumerate(zip(self.k, self.ix, self.iy))
        }
        self.levels = np.unique(self.k)
        self.tree = cKDTree(self.center) if len(self.k) else None
        self._adjacency: Optional[sparse.csr_matrix] = None
        self.truncated_area = 0.0

    def __len__(self) -> int:
        return len(self.k)

    @property
    def diam(self) -> np.ndarray:
        return self.side * np.sqrt(2.0)

    @property
    def coverage_floor(self) -> float:
        """Points of the window with delta(X) at least this are covered."""
        return 16.0 * np.sqrt(2.0) * 2.0 ** (-self.depth)

    def key(self, i: int) -> Tuple[int, int, int]:
        return int(self.k[i]), int(self.ix[i]), int(self.iy[i])

    def box(self, i) -> Tuple[np.ndarray, np.ndarray]:
        return self.lo[i], self.hi[i]

    def dilated(self, idx, tau: float) -> Tuple[np.ndarray, np.ndarray]:
        return dilate(self.lo[idx], self.hi[idx], tau)

    # ------------------------------------------------------------------
    # point location
    # ------------------------------------------------------------------
    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index of the cube whose half-open box [lo, hi) holds each point, -1 if none."""
        p = np.asarray(points, float).reshape(-1, 2)
        out = np.full(len(p), -1, dtype=np.int64)
        for lev in self.levels:
            h = 2.0 ** (-float(lev))
            gx = np.floor(p[:, 0] / h).astype(np.int64)
            gy = np.floor(p[:, 1] / h).astype(np.int64)
            todo = np.flatnonzero(out < 0)
            for i in todo:
                hit = self.index.get((int(lev), int(gx[i]), int(gy[i])))
                if hit is not None:
                    out[i] = hit
        return out

    def containing_cube(self, point) -> int:
        i = int(self.locate(np.asarray(point, float).reshape(1, 2))[0])
        if i < 0:
            raise CoverageError("point lies outside the decomposition's coverage", point=list(np.ravel(point)))
        return i

    # ------------------------------------------------------------------
    # adjacency
    # ------------------------------------------------------------------
    def touching_pairs(self, level_gap: int = 2, tol: float = 1e-12) -> np.ndarray:
        """Pairs (i, j), i < j, of closed cubes sharing a boundary point, |k_i - k_j| <= level_gap."""
        pairs = []
        for a in self.levels:
            for b in self.levels:
                if b < a or b - a > level_gap:
                    continue
                ia = np.flatnonzero(self.k == a)
                ib = np.flatnonzero(self.k == b)
                r = (2.0 ** -float(a) + 2.0 ** -float(b)) / 2.0 * np.sqrt(2.0) * (1 + 1e-9)
                ta, tb = cKDTree(self.center[ia]), cKDTree(self.center[ib])
                hits = ta.sparse_distance_matrix(tb, r, output_type="ndarray")
                i, j = ia[hits["i"]], ib[hits["j"]]
                keep = i != j
                pairs.append(np.column_stack([np.minimum(i, j), np.maximum(i, j)])[keep])
        pairs = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
        if len(pairs) == 0:
            return pairs.astype(np.int64)
        pairs = np.unique(pairs.astype(np.int64), axis=0)
        gap = np.maximum(self.lo[pairs[:, 0]] - self.hi[pairs[:, 1]], self.lo[pairs[:, 1]] - self.hi[pairs[:, 0]])
        touch = np.all(gap <= tol * self.set.scale, axis=1)
        return pairs[touch]

    @property
    def adjacency(self) -> sparse.csr_matrix:
        if self._adjacency is None:
            pairs = self.touching_pairs()
            n = len(self)
            data = np.ones(2 * len(pairs))
            rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
            cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
            self._adjacency = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
            log.debug("whitney adjacency: %d touching pairs", len(pairs))
        return self._adjacency

    # ------------------------------------------------------------------
    # audits
    # ------------------------------------------------------------------
    def check_display(self) -> np.ndarray:
        """Per-cube truth of 4 diam(I) <= dist(4I, E) <= dist(I, E) <= 40 diam(I)."""
        lo4, hi4 = scale_box(self.lo, self.hi, 4.0)
        d4 = self.set.box_distance(lo4, hi4)
        diam = self.diam
        eps = 1e-12 * self.set.scale
        return (4 * diam <= d4 + eps) & (d4 <= self.dist + eps) & (self.dist <= 40 * diam + eps)

    def side_ratios(self) -> np.ndarray:
        pairs = self.touching_pairs(level_gap=int(self.levels.max() - self.levels.min()) if len(self) else 0)
        return self.side[pairs[:, 0]] / self.side[pairs[:, 1]]

    def dilation_separation(self, tau: float) -> bool:
        """I*(tau) misses (3/4) J for every touching pair I != J."""
        pairs = self.touching_pairs()
        for a, b in ((0, 1), (1, 0)):
            dlo, dhi = self.dilated(pairs[:, a], tau)
            slo, shi = scale_box(self.lo[pairs[:, b]], self.hi[pairs[:, b]], 0.75)
            overlap = np.all((dlo < shi) & (slo < dhi), axis=1)
            if np.any(overlap):
                return False
        return True

    def records(self) -> List[Dict[str, float]]:
        """Rows (k, center, side, dist) in lexicographic (k, ix, iy) order."""
        return [
            {"k": int(self.k[i]), "cx": float(self.center[i, 0]), "cy": float(self.center[i, 1]),
             "side": float(self.side[i]), "dist": float(self.dist[i])}
            for i in range(len(self))
        ]


# emitted cubes of side s sit within this many sides of E
REACH = 32


def reach_window(window: Window, centers: np.ndarray, lengths: np.ndarray, eta: float) -> Window:
    """Enlarge ``window`` until it holds Whitney cubes of side eta^(1/4) l(Q) over every given cube Q."""
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    ell = np.asarray(lengths, dtype=float).reshape(-1)
    if len(c) == 0:
        return window
    side = 2.0 ** np.ceil(np.log2(eta ** 0.25 * ell) - 1e-12)
    reach = (ell + (REACH + SUBDIVISION) * side)[:, None]
    lo = np.minimum(np.array(window.lo), np.min(c - reach, axis=0))
    hi = np.maximum(np.array(window.hi), np.max(c + reach, axis=0))
    return Window((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])))


def decompose(set_: AmbientSet, window: Window, depth: int,
              map_fn: Optional[Callable] = None, chunk: int = 4096) -> WhitneyDecomposition:
    """Whitney cubes of the complement of E meeting ``window``, sides >= 2^-depth.

    ``map_fn(fn, items)`` may run the per-chunk distance evaluations in
    parallel; it must return results in order.
    """
    if not 0 < depth <= MAX_DEPTH:
        raise InputError(f"Whitney depth must lie in 1..{MAX_DEPTH}", depth=depth)
    map_fn = map_fn or (lambda fn, items: [fn(it) for it in items])

    def distances(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        parts = map_fn(lambda s: set_.box_distance(lo[s], hi[s]), chunked(len(lo), chunk))
        return np.concatenate(parts) if parts else np.zeros(0)

    wlo, whi = np.array(window.lo, float), np.array(window.hi, float)
    probe = np.stack(np.meshgrid(np.linspace(wlo[0], whi[0], 33), np.linspace(wlo[1], whi[1], 33)), -1).reshape(-1, 2)
    far = float(set_.distance(probe).max())
    if far <= 2.0 ** (-depth):
        raise InputError("window lies inside the tolerance shell of E", window=(window.lo, window.hi))

    # start coarse enough that no starting box is admissible, so every selected box is maximal
    reach = float(set_.distance(((wlo + whi) / 2)[None])[0]) + np.hypot(*(whi - wlo))
    k = -int(np.ceil(np.log2(max(reach, window.extent)))) - 1
    h = 2.0 ** (-k)
    gx = np.arange(int(np.floor(wlo[0] / h)), int(np.ceil(whi[0] / h)))
    gy = np.arange(int(np.floor(wlo[1] / h)), int(np.ceil(whi[1] / h)))
    ix, iy = [a.ravel() for a in np.meshgrid(gx, gy, indexing="ij")]

    stop = depth - 3
    sel_k, sel_x, sel_y = [], [], []
    while len(ix) and k <= stop:
        h = 2.0 ** (-k)
        lo = np.column_stack([ix * h, iy * h])
        hi = lo + h
        d = distances(lo, hi)
        ok = np.sqrt(2.0) * h <= d
        sel_k.append(np.full(int(ok.sum()), k)); sel_x.append(ix[ok]); sel_y.append(iy[ok])
        split_x, split_y = ix[~ok], iy[~ok]
        log.debug("stein level %d: %d boxes, %d selected", k, len(ix), int(ok.sum()))
        if k == stop:
            clip_lo = np.maximum(lo[~ok], wlo)
            clip_hi = np.minimum(hi[~ok], whi)
            truncated = float(np.sum(np.prod(np.maximum(clip_hi - clip_lo, 0), axis=1)))
            break
        cx = (2 * split_x[:, None] + np.array([0, 1, 0, 1])[None, :]).ravel()
        cy = (2 * split_y[:, None] + np.array([0, 0, 1, 1])[None, :]).ravel()
        ch = h / 2.0
        keep = window.meets(np.column_stack([cx * ch, cy * ch]), np.column_stack([(cx + 1) * ch, (cy + 1) * ch]))
        ix, iy, k = cx[keep], cy[keep], k + 1
    else:
        truncated = 0.0

    sk = np.concatenate(sel_k) if sel_k else np.zeros(0, dtype=np.int64)
    sx = np.concatenate(sel_x) if sel_x else np.zeros(0, dtype=np.int64)
    sy = np.concatenate(sel_y) if sel_y else np.zeros(0, dtype=np.int64)
    a, b = np.meshgrid(np.arange(SUBDIVISION), np.arange(SUBDIVISION), indexing="ij")
    pk = np.repeat(sk + 3, SUBDIVISION ** 2)
    px = (SUBDIVISION * sx[:, None] + a.ravel()[None, :]).ravel()
    py = (SUBDIVISION * sy[:, None] + b.ravel()[None, :]).ravel()
    ph = 2.0 ** (-pk.astype(float))
    plo = np.column_stack([px * ph, py * ph])
    phi = plo + ph[:, None]
    keep = window.meets(plo, phi)
    pk, px, py, plo, phi = pk[keep], px[keep], py[keep], plo[keep], phi[keep]
    pd = distances(plo, phi)

    W = WhitneyDecomposition(set_, window, depth, pk.astype(np.int64), px.astype(np.int64), py.astype(np.int64), pd)
    W.truncated_area = truncated
    log.info("whitney decomposition of %s: %d cubes, levels %s..%s, truncated area %.3g",
             set_.kind, len(W), W.levels.min() if len(W) else "-", W.levels.max() if len(W) else "-",
             W.truncated_area)
    return W


def nearest_dyadic(W: WhitneyDecomposition, i: int, grid: DyadicGrid) -> DyadicCube:
    """Q_I*: a nearest grid cube with l(Q) = l(I).

    Ties (within 1e-12 scale) go to the smallest |center(I) - x_Q|, then to
    the smallest (k, j).
    """
    k = int(W.k[i])
    if not grid.k_min <= k <= grid.k_max:
        raise InputError("cube side is outside the grid's generation range", k=k,
                         k_min=grid.k_min, k_max=grid.k_max)
    return grid.cubes[nearest_dyadic_ids(W, np.array([i]), grid)[0]]


def nearest_dyadic_ids(W: WhitneyDecomposition, idx: np.ndarray, grid: DyadicGrid) -> List[Optional[CubeId]]:
    """Vectorized Q_I* for many cubes; None where l(I) is outside the grid range."""
    out: List[Optional[CubeId]] = [None] * len(idx)
    eps = 1e-12 * W.set.scale
    for k in np.unique(W.k[idx]):
        k = int(k)
        pos = np.flatnonzero(W.k[idx] == k)
        gen = grid.generation(k)
        if not gen:
            continue
        tree = grid.tree(k)
        blo = np.array([grid.cubes[q].bbox_lo for q in gen])
        bhi = np.array([grid.cubes[q].bbox_hi for q in gen])
        centers = grid.centers(k)
        reach = float(np.max(np.hypot(*np.maximum(np.abs(blo - centers), np.abs(bhi - centers)).T)))
        for p in pos:
            i = int(idx[p])
            lo, hi, c = W.lo[i], W.hi[i], W.center[i]
            nn = tree.query(c, k=min(8, len(gen)))[1]
            nn = np.atleast_1d(nn)
            upper = min(float(grid.distance_to_cube(gen[n], lo, hi)[0]) for n in nn)
            cand = tree.query_ball_point(c, upper + W.side[i] * np.sqrt(2.0) / 2.0 + reach + eps)
            cand = [n for n in cand if box_box_distance(lo, hi, blo[n], bhi[n]) <= upper + eps]
            d = np.array([float(grid.distance_to_cube(gen[n], lo, hi)[0]) for n in cand])
            best = d.min()
            tied = [n for n, dn in zip(cand, d) if dn <= best + eps]
            out[p] = min(tied, key=lambda n: (float(np.hypot(*(centers[n] - c))), gen[n]))
            out[p] = gen[out[p]]
    return out
