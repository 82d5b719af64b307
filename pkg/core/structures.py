"""Whitney-dyadic structures {W_Q} and the regions built from them.

``base_family`` filters Whitney cubes by

    eta^(1/4) l(Q) <= l(I) <= K^(1/2) l(Q),    dist(I, Q) <= K^(1/2) l(Q)

and ``build_structure`` augments it according to the mode: ``adr`` keeps
W_Q = W0_Q, ``cad`` adds Harnack chains inside the plus component, ``ur``
splits along the corona graphs Gamma_S and chains inside each half.
Families are stored as sparse rows (one per grid cube, columns index the
Whitney cubes).
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order

from config.experiment_config import StructureParams
from core.ambient import AmbientSet, corkscrew
from core.corona import CoronaDecomposition, Regime
from core.dyadic_grid import CubeId, DyadicGrid
from core.errors import BudgetEscalation, ChainNotFoundError, CoverageError, InputError
from core.regions import Region
from core.segments import box_box_distance, point_box_distance
from core.whitney import TAU_0, WhitneyDecomposition

log = logging.getLogger(__name__)

MODES = ("adr", "cad", "ur")
CONE_TRUNCATION = 4.0


def _rows_to_csr(rows: Sequence[np.ndarray], n_cols: int) -> sparse.csr_matrix:
    r = np.concatenate([np.full(len(c), i, dtype=np.int64) for i, c in enumerate(rows)]) if rows else np.zeros(0, np.int64)
    c = np.concatenate(rows).astype(np.int64) if rows else np.zeros(0, np.int64)
    m = sparse.csr_matrix((np.ones(len(c), dtype=bool), (r, c)), shape=(len(rows), n_cols))
    m.sum_duplicates()
    m.sort_indices()
    return m


def side_mask(W: WhitneyDecomposition, side: str) -> np.ndarray:
    """Whitney cubes lying in the requested complementary component."""
    if side == "any":
        return np.ones(len(W), dtype=bool)
    want = 1 if side == "plus" else -1
    return W.set.side(W.center) == want


def in_base_family(grid: DyadicGrid, qid: CubeId, lo, hi, eta: float, K: float) -> bool:
    """The two displayed inequalities for a single box [lo, hi]."""
    q = grid[qid]
    side = float(np.max(np.asarray(hi, float) - np.asarray(lo, float)))
    tol = 1e-12 * q.length
    if side < eta ** 0.25 * q.length - tol or side > K ** 0.5 * q.length + tol:
        return False
    d = float(grid.distance_to_cube(qid, np.asarray(lo, float), np.asarray(hi, float))[0])
    return d <= K ** 0.5 * q.length + tol


def base_family(grid: DyadicGrid, W: WhitneyDecomposition, eta: float, K: float,
                allowed: Optional[np.ndarray] = None, cubes: Optional[Sequence[CubeId]] = None) -> sparse.csr_matrix:
    """W0_Q for every grid cube (rows in sorted cube-id order).

    Distances are settled by a box lower bound and a center upper bound
    first; only undecided boxes get the exact cube distance.
    """
    cubes = sorted(grid.cubes) if cubes is None else list(cubes)
    allowed = np.ones(len(W), dtype=bool) if allowed is None else allowed
    rows = []
    for qid in cubes:
        q = grid[qid]
        tol = 1e-12 * q.length
        reach = K ** 0.5 * q.length
        size_ok = (W.side >= eta ** 0.25 * q.length - tol) & (W.side <= reach + tol) & allowed
        cand = np.flatnonzero(size_ok)
        lb = box_box_distance(W.lo[cand], W.hi[cand], q.bbox_lo, q.bbox_hi)
        cand = cand[lb <= reach + tol]
        ub = point_box_distance(q.center, W.lo[cand], W.hi[cand])
        sure = cand[ub <= reach + tol]
        open_ = cand[ub > reach + tol]
        if len(open_):
            d = grid.distance_to_cube(qid, W.lo[open_], W.hi[open_])
            sure = np.concatenate([sure, open_[d <= reach + tol]])
        rows.append(np.sort(sure))
    return _rows_to_csr(rows, len(W))


class WhitneyDyadicStructure:
    """An assignment Q -> W_Q with parameters (eta, K, tau) and a mode."""

    def __init__(self, grid: DyadicGrid, W: WhitneyDecomposition, params: StructureParams, mode: str,
                 side: str = "any", corona: Optional[CoronaDecomposition] = None):
        self.grid = grid
        self.W = W
        self.params = params
        self.mode = mode
        self.side = side
        self.corona = corona
        self.cube_ids: List[CubeId] = sorted(grid.cubes)
        self.row: Dict[CubeId, int] = {q: i for i, q in enumerate(self.cube_ids)}
        self.base: Optional[sparse.csr_matrix] = None
        self.members: Optional[sparse.csr_matrix] = None
        self.plus: Optional[sparse.csr_matrix] = None
        self.minus: Optional[sparse.csr_matrix] = None
        self.chain_lengths: Dict[CubeId, int] = {}
        self.straddling = 0
        self.constant_C = np.nan
        self.m0 = 0
        self.C0 = np.nan
        self._corkscrews: Dict[Tuple[CubeId, str], np.ndarray] = {}

    @property
    def eta(self) -> float:
        return self.params.eta

    @property
    def K(self) -> float:
        return self.params.K

    @property
    def tau(self) -> float:
        return self.params.tau

    @property
    def set(self) -> AmbientSet:
        return self.grid.set

    def _row(self, matrix: Optional[sparse.csr_matrix], qid: CubeId) -> np.ndarray:
        if qid not in self.row:
            raise InputError(f"cube {qid} is not in the structure")
        if matrix is None:
            return np.zeros(0, dtype=np.int64)
        i = self.row[qid]
        return matrix.indices[matrix.indptr[i]:matrix.indptr[i + 1]].astype(np.int64)

    def W_Q(self, qid: CubeId) -> np.ndarray:
        return self._row(self.members, qid)

    def W0_Q(self, qid: CubeId) -> np.ndarray:
        return self._row(self.base, qid)

    def W_plus(self, qid: CubeId) -> np.ndarray:
        return self._row(self.plus, qid)

    def W_minus(self, qid: CubeId) -> np.ndarray:
        return self._row(self.minus, qid)

    def descendants(self, qid: CubeId) -> List[CubeId]:
        return [c.id for c in self.grid.descendants(qid)]

    def corkscrew_point(self, qid: CubeId, side: Optional[str] = None) -> np.ndarray:
        """X_Q: corkscrew relative to Q at scale l(Q), on the structure's side by default."""
        side = side or ("plus" if self.set.has_sides() else "any")
        key = (qid, side)
        if key not in self._corkscrews:
            q = self.grid[qid]
            r = q.length if not np.isfinite(self.set.diam) else min(q.length, 0.5 * self.set.diam)
            self._corkscrews[key] = corkscrew(self.set, q.center, r, side=side)
        return self._corkscrews[key]

    # ------------------------------------------------------------------
    # size bounds
    # ------------------------------------------------------------------
    def measure_constants(self):
        """Measured C of the size/distance bounds, plus m0 and C0."""
        C, m0, C0 = 1.0, 0, 0.0
        for qid in self.cube_ids:
            idx = self.W_Q(qid)
            if len(idx) == 0:
                continue
            q = self.grid[qid]
            s = self.W.side[idx]
            d = self.grid.distance_to_cube(qid, self.W.lo[idx], self.W.hi[idx])
            root = self.K ** 0.5 * q.length
            C = max(C, float(np.max(self.eta ** 0.5 * q.length / s)), float(np.max(s / root)),
                    float(np.max(d / root)))
            m0 = max(m0, int(np.ceil(np.log2(np.max(q.length / s)) - 1e-12)))
            C0 = max(C0, float(np.max(np.maximum(s, d) / q.length)))
        self.constant_C, self.m0, self.C0 = C, m0, C0
        return C, m0, C0

    def check_base_nonempty(self) -> List[CubeId]:
        return [q for q in self.cube_ids if len(self.W0_Q(q)) == 0]

    def records(self) -> List[Dict[str, Any]]:
        rows = []
        for qid in self.cube_ids:
            rows.append({
                "k": qid[0], "j": qid[1],
                "base": len(self.W0_Q(qid)), "members": len(self.W_Q(qid)),
                "plus": len(self.W_plus(qid)), "minus": len(self.W_minus(qid)),
                "chain": self.chain_lengths.get(qid, 0),
            })
        return rows


# ----------------------------------------------------------------------
# Harnack chains
# ----------------------------------------------------------------------
def _chain(W: WhitneyDecomposition, start_point: np.ndarray, targets: np.ndarray,
           allowed: np.ndarray, center: np.ndarray, radius: float, qid: CubeId) -> np.ndarray:
    """Cubes on shortest adjacency paths from the cube holding ``start_point`` to every target."""
    near = allowed & (np.hypot(*(W.center - center).T) <= radius)
    try:
        i0 = W.containing_cube(start_point)
    except CoverageError:
        raise ChainNotFoundError("corkscrew point is outside the Whitney coverage", cube_id=qid) from None
    if not near[i0]:
        raise ChainNotFoundError("corkscrew cube violates the chain constraints", cube_id=qid)
    local = np.flatnonzero(near)
    pos = np.full(len(W), -1, dtype=np.int64)
    pos[local] = np.arange(len(local))
    sub = W.adjacency[local][:, local]
    order, pred = breadth_first_order(sub, pos[i0], directed=False, return_predecessors=True)
    reached = np.zeros(len(local), dtype=bool)
    reached[order] = True
    visited: Set[int] = {int(i0)}
    for t in targets:
        p = pos[t]
        if p < 0 or not reached[p]:
            raise ChainNotFoundError("no Harnack chain within the search radius", cube_id=qid,
                                     target=int(t), radius=radius)
        while p >= 0 and int(local[p]) not in visited:
            visited.add(int(local[p]))
            p = pred[p]
    return np.array(sorted(visited), dtype=np.int64)


def _augment(structure: WhitneyDyadicStructure, qid: CubeId, start: np.ndarray, targets: np.ndarray,
             allowed: np.ndarray) -> np.ndarray:
    q = structure.grid[qid]
    W = structure.W
    floor_ok = allowed & (W.dist >= structure.eta * q.length)
    base = structure.params.chain_budget * structure.K ** 0.5 * q.length

    def attempt(radius: float) -> np.ndarray:
        return _chain(W, start, targets, floor_ok, q.center, radius, qid)

    return BudgetEscalation(base, factor=2.0, max_attempts=3, retry_on=(ChainNotFoundError,)).run(attempt)


def _parent_or_self(grid: DyadicGrid, qid: CubeId) -> CubeId:
    par = grid[qid].parent
    return qid if par is None else par


def build_structure(grid: DyadicGrid, W: WhitneyDecomposition, mode: str,
                    params: Optional[StructureParams] = None, corona: Optional[CoronaDecomposition] = None,
                    map_fn: Optional[Callable] = None) -> WhitneyDyadicStructure:
    """Build {W_Q} in ``adr``, ``cad`` or ``ur`` mode.

    ``map_fn(fn, items)`` may run the per-cube augmentation in parallel and
    must return results in order.
    """
    params = params or StructureParams()
    if mode not in MODES:
        raise InputError(f"structure mode must be one of {MODES}", mode=mode)
    if W.set is not grid.set:
        raise InputError("grid and Whitney decomposition are built on different sets")
    if mode == "ur" and corona is None:
        raise InputError("ur mode needs a corona decomposition")
    if mode == "cad" and not grid.set.has_sides():
        raise InputError("cad mode needs a set with a connected complementary component (graph or polygon)",
                         kind=grid.set.kind)
    map_fn = map_fn or (lambda fn, items: [fn(it) for it in items])
    side = "plus" if mode == "cad" else "any"
    S = WhitneyDyadicStructure(grid, W, params, mode, side=side, corona=corona)
    allowed = side_mask(W, side)
    S.base = base_family(grid, W, params.eta, params.K, allowed=allowed)
    empty = S.check_base_nonempty()
    if empty:
        raise InputError(f"W0_Q is empty for {len(empty)} cubes (first {empty[0]}); check eta/K or widen the "
                         "Whitney window and depth", cubes=empty[:8])

    if mode == "adr":
        S.members = S.base.copy()
    elif mode == "cad":
        def augment(qid):
            targets = np.union1d(S.W0_Q(qid), S.W0_Q(_parent_or_self(grid, qid)))
            return np.union1d(S.W0_Q(qid), _augment(S, qid, S.corkscrew_point(qid, "plus"), targets, allowed))
        rows = map_fn(augment, S.cube_ids)
        for qid, r in zip(S.cube_ids, rows):
            S.chain_lengths[qid] = len(r) - len(S.W0_Q(qid))
        S.members = _rows_to_csr(rows, len(W))
    else:
        _build_ur(S, map_fn)

    C, m0, C0 = S.measure_constants()
    log.info("%s structure: %d cubes, %d memberships, measured C %.3g (m0 %d, C0 %.3g)",
             mode, len(S.cube_ids), S.members.nnz, C, m0, C0)
    return S


def _build_ur(S: WhitneyDyadicStructure, map_fn: Callable):
    grid, W, corona = S.grid, S.W, S.corona
    sides_cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def regime_sides(reg: Regime) -> Tuple[np.ndarray, np.ndarray]:
        # +1 / -1 per Whitney cube, 0 where the box meets Gamma_S
        if reg.index not in sides_cache:
            off = np.sign(reg.offset(W.center)).astype(int)
            touch = reg.soup.box_distance(W.lo, W.hi) <= 1e-12 * W.set.scale
            off[touch] = 0
            sides_cache[reg.index] = (off, touch)
        return sides_cache[reg.index]

    for reg in corona.regimes:
        regime_sides(reg)

    def split(qid: CubeId):
        base = S.W0_Q(qid)
        reg = corona.regime_of(qid)
        if reg is None:
            return base, np.zeros(0, np.int64), np.zeros(0, np.int64), 0
        off, touch = regime_sides(reg)
        q = grid[qid]
        par = _parent_or_self(grid, qid)
        par_base = S.W0_Q(par) if par in reg else np.zeros(0, np.int64)
        s_q, _ = reg.frame.to_frame(q.center[None])
        foot = reg.frame.to_world(s_q, reg.psi(s_q))[0]
        halves = []
        for sign in (1, -1):
            targets = np.union1d(base[off[base] == sign], par_base[off[par_base] == sign])
            start = foot + sign * 0.5 * q.length * reg.frame.normal
            chain = _augment(S, qid, start, targets, off == sign) if len(targets) else np.zeros(0, np.int64)
            halves.append(np.union1d(base[off[base] == sign], chain))
        members = np.union1d(base, np.union1d(*halves))
        return members, halves[0], halves[1], int(np.sum(touch[base]))

    out = map_fn(split, S.cube_ids)
    S.members = _rows_to_csr([o[0] for o in out], len(W))
    S.plus = _rows_to_csr([o[1] for o in out], len(W))
    S.minus = _rows_to_csr([o[2] for o in out], len(W))
    S.straddling = int(sum(o[3] for o in out))
    for qid, o in zip(S.cube_ids, out):
        S.chain_lengths[qid] = len(o[0]) - len(S.W0_Q(qid))
    if S.straddling:
        log.warning("ur structure: %d base memberships meet their regime graph and stay unsplit", S.straddling)


# ----------------------------------------------------------------------
# regions
# ----------------------------------------------------------------------
def _tau(S: WhitneyDyadicStructure, tau: Optional[float]) -> float:
    tau = S.tau if tau is None else tau
    if not 0 < tau <= TAU_0:
        raise InputError(f"dilation parameter must satisfy 0 < tau <= {TAU_0}", tau=tau)
    return tau


def whitney_region(S: WhitneyDyadicStructure, qid: CubeId, fat: bool = False, tau: Optional[float] = None) -> Region:
    """U_Q (or the fattened U_{Q,2tau})."""
    t = _tau(S, tau) * (2.0 if fat else 1.0)
    return Region.from_whitney(S.W, S.W_Q(qid), t, label=f"U{qid}")


def carleson_box(S: WhitneyDyadicStructure, qid: CubeId, tau: Optional[float] = None) -> Region:
    """T_Q = int of the union of U_Q' over Q' in D_Q."""
    idx = [S.W_Q(c) for c in S.descendants(qid)]
    return Region.from_whitney(S.W, np.concatenate(idx), _tau(S, tau), label=f"T{qid}")


def delta_generation(r: float) -> int:
    """The k with 2^(-k-1) < 200 r <= 2^(-k)."""
    if r <= 0:
        raise InputError("surface ball radius must be positive", r=r)
    k = int(np.floor(-np.log2(200.0 * r)))
    # guard against rounding at exact powers of two
    while 2.0 ** (-k - 1) >= 200.0 * r:
        k += 1
    while 200.0 * r > 2.0 ** (-k):
        k -= 1
    return k


def delta_cubes(S: WhitneyDyadicStructure, x, r: float) -> List[CubeId]:
    """D^Delta: generation-k(Delta) cubes meeting 2 Delta."""
    x = np.asarray(x, float).reshape(1, 2)
    if np.isfinite(S.set.diam) and r >= S.set.diam:
        raise InputError("surface ball radius must be below diam(E)", r=r)
    k = delta_generation(r)
    if not S.grid.k_min <= k <= S.grid.k_max:
        raise InputError("surface ball scale falls outside the grid generations", k=k,
                         k_min=S.grid.k_min, k_max=S.grid.k_max)
    out = []
    for qid in S.grid.generation(k):
        q = S.grid[qid]
        if point_box_distance(x[0], q.bbox_lo, q.bbox_hi) > 2 * r:
            continue
        if float(S.grid.distance_to_cube(qid, x, x)[0]) <= 2 * r:
            out.append(qid)
    return out


def carleson_box_ball(S: WhitneyDyadicStructure, x, r: float, tau: Optional[float] = None) -> Region:
    """T_Delta for Delta = Delta(x, r)."""
    cubes = delta_cubes(S, x, r)
    idx = [S.W_Q(c) for q in cubes for c in S.descendants(q)]
    idx = np.concatenate(idx) if idx else np.zeros(0, np.int64)
    return Region.from_whitney(S.W, idx, _tau(S, tau), label=f"T_Delta({r:g})")


def _check_family(S: WhitneyDyadicStructure, F: Sequence[CubeId], q0: Optional[CubeId]):
    F = list(F)
    for a in F:
        if a not in S.grid:
            raise InputError(f"stopping cube {a} is not in the grid")
        if q0 is not None and not S.grid.is_descendant(a, q0):
            raise InputError(f"stopping cube {a} is not inside {q0}")
    for i, a in enumerate(F):
        for b in F[i + 1:]:
            if S.grid.is_descendant(a, b) or S.grid.is_descendant(b, a):
                raise InputError("sawtooth family must be pairwise disjoint", cubes=(a, b))


def discrete_sawtooth(S: WhitneyDyadicStructure, F: Sequence[CubeId], q0: Optional[CubeId] = None) -> List[CubeId]:
    """D_{F,Q0} (or D_F when q0 is None): cubes not contained in any member of F."""
    _check_family(S, F, q0)
    stop = set(F)
    tops = [q0] if q0 is not None else S.grid.roots
    out = []
    for top in tops:
        layer = [top]
        while layer:
            keep = [c for c in layer if c not in stop]
            out.extend(keep)
            layer = [k for c in keep for k in S.grid[c].children]
    return sorted(out)


def sawtooth(S: WhitneyDyadicStructure, F: Sequence[CubeId], q0: Optional[CubeId] = None,
             tau: Optional[float] = None) -> Tuple[Region, List[CubeId]]:
    """Omega_{F,Q0} (local) or Omega_F (global) with its discrete family."""
    family = discrete_sawtooth(S, F, q0)
    idx = [S.W_Q(c) for c in family]
    idx = np.concatenate(idx) if idx else np.zeros(0, np.int64)
    label = f"Omega_F{q0}" if q0 is not None else "Omega_F"
    if len(idx) == 0:
        return Region.empty(label=label), family
    return Region.from_whitney(S.W, idx, _tau(S, tau), label=label), family


def _cone_cubes(S: WhitneyDyadicStructure, x, within: Optional[CubeId]) -> List[CubeId]:
    x = np.asarray(x, float).reshape(1, 2)
    lo = S.grid.k_min if within is None else within[0]
    out = []
    for k in range(lo, S.grid.k_max + 1):
        if np.isfinite(S.set.diam) and 2.0 ** (-k) > CONE_TRUNCATION * S.set.diam:
            continue
        found = S.grid.locate(x, k)[0]
        if found is None:
            continue
        if within is not None and not S.grid.is_descendant(found, within):
            continue
        out.append(found)
    return out


def cone(S: WhitneyDyadicStructure, x, tau: Optional[float] = None) -> Region:
    """Dyadic cone Gamma(x): union of U_Q over Q containing x."""
    idx = [S.W_Q(c) for c in _cone_cubes(S, x, None)]
    return Region.from_whitney(S.W, np.concatenate(idx) if idx else np.zeros(0, np.int64), _tau(S, tau),
                               label="Gamma")


def cone_local(S: WhitneyDyadicStructure, x, qid: CubeId, tau: Optional[float] = None) -> Region:
    """Gamma^Q(x): union of U_Q' over Q' in D_Q containing x."""
    idx = [S.W_Q(c) for c in _cone_cubes(S, x, qid)]
    return Region.from_whitney(S.W, np.concatenate(idx) if idx else np.zeros(0, np.int64), _tau(S, tau),
                               label=f"Gamma^{qid}")


def trad_cone(set_: AmbientSet, x, kappa: float, r: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Predicate of |Y - x| <= (1 + kappa) dist(Y, E), optionally |Y - x| < r."""
    if kappa <= 0:
        raise InputError("cone aperture must be positive", kappa=kappa)
    x = np.asarray(x, float).reshape(2)

    def member(points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, 2)
        d = np.hypot(*(p - x).T)
        ok = (d <= (1.0 + kappa) * set_.distance(p)) & (d > 0)
        if r is not None:
            ok &= d < r
        return ok

    return member


def cone_embedding_check(S: WhitneyDyadicStructure, x, trials: int, seed: int = 0,
                         kappa: float = 1.0) -> Dict[str, Any]:
    """Sample Y in the aperture-kappa traditional cone and test Y in Gamma(x).

    Only points whose Whitney cube is emitted and has a side inside the
    grid's generation range are admissible.  Also reports the measured
    aperture of Gamma(x) against the K^(1/2) eta^(-1/2) scale.
    """
    rng = np.random.default_rng(seed)
    W = S.W
    region = cone(S, x)
    pred = trad_cone(S.set, x, kappa)
    lo, hi = np.array(W.window.lo), np.array(W.window.hi)
    pts = lo + rng.random((trials, 2)) * (hi - lo)
    idx = W.locate(pts)
    ok = pred(pts) & (idx >= 0)
    ok[ok] &= (W.k[idx[ok]] >= S.grid.k_min) & (W.k[idx[ok]] <= S.grid.k_max)
    if S.side != "any":
        ok &= side_mask(W, S.side)[np.maximum(idx, 0)]
    admissible = pts[ok]
    failures = int(np.sum(~region.contains(admissible))) if len(admissible) else 0
    aperture = np.nan
    if not region.is_empty():
        corners = np.vstack([region.lo, region.hi, np.column_stack([region.lo[:, 0], region.hi[:, 1]]),
                             np.column_stack([region.hi[:, 0], region.lo[:, 1]])])
        d = S.set.distance(corners)
        aperture = float(np.max(np.hypot(*(corners - np.asarray(x, float)).T) / d) - 1.0)
    return {
        "trials": trials,
        "admissible": int(ok.sum()),
        "failures": failures,
        "measured_aperture": aperture,
        "aperture_scale": float(S.K ** 0.5 * S.eta ** -0.5),
    }


def regime_domains(S: WhitneyDyadicStructure, regime: Regime, tau: Optional[float] = None,
                   cubes: Optional[Sequence[CubeId]] = None) -> Tuple[Region, Region]:
    """Omega_S^+ and Omega_S^- for a regime (or a subregime given by ``cubes``)."""
    if S.mode != "ur":
        raise InputError("regime domains need a ur-mode structure", mode=S.mode)
    cubes = regime.cubes if cubes is None else list(cubes)
    t = _tau(S, tau)
    out = []
    for getter, name in ((S.W_plus, "+"), (S.W_minus, "-")):
        idx = [getter(c) for c in cubes]
        idx = np.concatenate(idx) if idx else np.zeros(0, np.int64)
        label = f"Omega_S{regime.index}{name}"
        out.append(Region.from_whitney(S.W, idx, t, label=label) if len(idx) else Region.empty(label=label))
    return out[0], out[1]


def _ball_points(center, radius, count, rng) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    a = 2 * np.pi * rng.random(count)
    return np.asarray(center, float) + np.column_stack([r * np.cos(a), r * np.sin(a)])


def _resolved(S: WhitneyDyadicStructure, pts: np.ndarray) -> np.ndarray:
    """Points whose Whitney cube is emitted with a side the grid resolves, on the structure's side."""
    idx = S.W.locate(pts)
    ok = idx >= 0
    ok[ok] &= S.W.k[idx[ok]] <= S.grid.k_max
    if S.side != "any":
        ok &= side_mask(S.W, S.side)[np.maximum(idx, 0)]
    return ok


def check_containments(S: WhitneyDyadicStructure, qid: CubeId, samples: int = 2000, seed: int = 0) -> Dict[str, Any]:
    """Audit T_Q in B*_Q, B_Q cap Omega in T_{Q,tau/N} and (5/4)B_Delta cap Omega in T_Delta in B(x, Kr).

    Ball-side checks use random points restricted to the resolved part of
    the complement (the decomposition and the grid are truncated).
    """
    rng = np.random.default_rng(seed)
    q = S.grid[qid]
    report: Dict[str, Any] = {"cube": list(qid)}
    T = carleson_box(S, qid)
    if T.is_empty():
        raise InputError(f"Carleson box of {qid} is empty")
    corners = np.vstack([T.lo, T.hi, np.column_stack([T.lo[:, 0], T.hi[:, 1]]), np.column_stack([T.hi[:, 0], T.lo[:, 1]])])
    reach = float(np.max(np.hypot(*(corners - q.center).T)))
    T0 = carleson_box(S, qid, tau=TAU_0)
    report["T_in_Bstar"] = bool(reach < S.K * q.length)
    report["T_reach_ratio"] = reach / q.length
    report["T_tau_in_T_tau0"] = bool(np.all(T0.contains(np.vstack([0.5 * (T.lo + T.hi), corners]))))

    pts = _ball_points(q.center, q.radius, samples, rng)
    pts = pts[_resolved(S, pts)]
    for N in (1, 2, 4):
        TN = carleson_box(S, qid, tau=S.tau / N)
        report[f"BQ_in_T_tau/{N}"] = bool(np.all(TN.contains(pts)))
    report["BQ_samples"] = int(len(pts))

    # a surface ball centered at x_Q whose scale k(Delta) is the generation of Q
    r = 0.75 * 2.0 ** (-q.k) / 200.0
    if q.k <= S.grid.k_max and 2.5 * r <= 2 * q.radius:
        TD = carleson_box_ball(S, q.center, r)
        bpts = _ball_points(q.center, 1.25 * r, samples, rng)
        bpts = bpts[_resolved(S, bpts)]
        report["BDelta_in_TDelta"] = bool(np.all(TD.contains(bpts)))
        report["BDelta_samples"] = int(len(bpts))
        dc = np.vstack([TD.lo, TD.hi])
        td_reach = float(np.max(np.hypot(*(dc - q.center).T))) / r
        report["TDelta_reach_ratio"] = td_reach
        report["TDelta_in_B_Kr"] = bool(td_reach < S.K)
    return report
