"""Per-cube quadrature summaries beta_Q, beta^_Q, m_Q and m^_Q.

beta_Q is the integral of |G|^2 delta^(1-n) over the union U_Q; a node of a
dilated box is weighted by 1 / (number of boxes of W_Q holding it), which
integrates the union exactly up to quadrature.  The box-to-box incidence of
the nodes is computed once for the whole dilated family, so per-cube
multiplicities are sparse matrix-vector products.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from core.dyadic_grid import CubeId, DyadicGrid
from core.errors import FieldEvaluationError, InputError
from core.fields import ScalarField, box_nodes
from core.regions import Region
from core.structures import WhitneyDyadicStructure

log = logging.getLogger(__name__)


@dataclass
class BoxQuadrature:
    """Nodes of a dilated Whitney family: integrand and sup data per node."""

    tau: float
    boxes: np.ndarray            # Whitney indices, one per local box
    points: np.ndarray
    weights: np.ndarray
    owner: np.ndarray            # local box of each node
    incidence: sparse.csr_matrix  # node x local box, closed containment
    integrand: np.ndarray        # |G|^2 delta^(1-n)
    sup_values: np.ndarray       # |H| at the nodes
    corner_sup: np.ndarray       # max |H| over the corners of each local box


def _evaluate(field: ScalarField, points: np.ndarray, owner: np.ndarray, boxes: np.ndarray, W) -> np.ndarray:
    try:
        return field.values(points)
    except FieldEvaluationError:
        for b in np.unique(owner):
            try:
                field.values(points[owner == b])
            except FieldEvaluationError as e:
                raise FieldEvaluationError(f"{e} (Whitney box {W.key(int(boxes[b]))})", where=W.key(int(boxes[b])),
                                           **e.details) from None
        raise


def box_quadrature(S: WhitneyDyadicStructure, G: ScalarField, H: ScalarField, tau: float,
                   per_axis: int, boxes: Optional[np.ndarray] = None) -> BoxQuadrature:
    W = S.W
    boxes = np.unique(S.members.indices) if boxes is None else np.asarray(boxes, dtype=np.int64)
    region = Region.from_whitney(W, boxes, tau)
    pts, wts, owner = [], [], []
    for b in range(len(boxes)):
        p, w = box_nodes(region.lo[b], region.hi[b], per_axis)
        pts.append(p)
        wts.append(w)
        owner.append(np.full(len(w), b, dtype=np.int64))
    pts = np.concatenate(pts) if pts else np.zeros((0, 2))
    wts = np.concatenate(wts) if wts else np.zeros(0)
    owner = np.concatenate(owner) if owner else np.zeros(0, np.int64)
    hits = region.containing_boxes(pts)
    rows = np.concatenate([np.full(len(h), i, dtype=np.int64) for i, h in enumerate(hits)]) if hits else np.zeros(0, np.int64)
    cols = np.concatenate(hits) if hits else np.zeros(0, np.int64)
    incidence = sparse.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(len(pts), len(boxes)))

    delta = S.set.distance(pts)
    g = _evaluate(G, pts, owner, boxes, W)
    h = np.abs(_evaluate(H, pts, owner, boxes, W))
    corners = np.stack([region.lo, region.hi, np.column_stack([region.lo[:, 0], region.hi[:, 1]]),
                        np.column_stack([region.hi[:, 0], region.lo[:, 1]])], axis=1).reshape(-1, 2)
    corner_owner = np.repeat(np.arange(len(boxes)), 4)
    hc = np.abs(_evaluate(H, corners, corner_owner, boxes, W)).reshape(-1, 4).max(axis=1) if len(boxes) else np.zeros(0)
    return BoxQuadrature(tau, boxes, pts, wts, owner, incidence, g ** 2 * delta ** (1 - S.set.n), h, hc)


class CubeDataTable:
    """beta, beta^, m, m^ per grid cube, in sorted cube-id order."""

    def __init__(self, grid: DyadicGrid, cube_ids: Sequence[CubeId], beta, beta_hat, m, m_hat,
                 structure: Optional[WhitneyDyadicStructure] = None, node_count: int = 0,
                 quadrature: Optional[Dict[str, BoxQuadrature]] = None, label: str = ""):
        self.grid = grid
        self.cube_ids: List[CubeId] = list(cube_ids)
        self.row: Dict[CubeId, int] = {q: i for i, q in enumerate(self.cube_ids)}
        self.beta = np.asarray(beta, dtype=float)
        self.beta_hat = np.asarray(beta_hat, dtype=float)
        self.m = np.asarray(m, dtype=float)
        self.m_hat = np.asarray(m_hat, dtype=float)
        self.structure = structure
        self.node_count = node_count
        self.quadrature = quadrature or {}
        self.label = label
        for name in ("beta", "beta_hat", "m", "m_hat"):
            arr = getattr(self, name)
            if arr.shape != (len(self.cube_ids),):
                raise InputError(f"table column '{name}' needs one value per cube")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InputError(f"table column '{name}' must be finite and nonnegative")

    @classmethod
    def from_arrays(cls, grid: DyadicGrid, beta: Dict[CubeId, float], m: Optional[Dict[CubeId, float]] = None,
                    label: str = "synthetic") -> "CubeDataTable":
        """Table with prescribed values; fattened columns equal the plain ones."""
        ids = sorted(grid.cubes)
        b = np.array([float(beta.get(q, 0.0)) for q in ids])
        mm = np.array([float((m or {}).get(q, 0.0)) for q in ids])
        return cls(grid, ids, b, b.copy(), mm, mm.copy(), label=label)

    def __len__(self) -> int:
        return len(self.cube_ids)

    def index(self, qid: CubeId) -> int:
        try:
            return self.row[qid]
        except KeyError:
            raise InputError(f"cube {qid} is not in the table") from None

    def beta_of(self, qid: CubeId, fat: bool = False) -> float:
        return float((self.beta_hat if fat else self.beta)[self.index(qid)])

    def m_of(self, qid: CubeId, fat: bool = False) -> float:
        return float((self.m_hat if fat else self.m)[self.index(qid)])

    def sigma(self, qid: CubeId) -> float:
        return self.grid[qid].measure

    def check_monotone(self) -> bool:
        """beta^ >= beta and m^ >= m (up to rounding)."""
        tol = 1e-9
        return bool(np.all(self.beta_hat >= self.beta * (1 - tol) - tol) and np.all(self.m_hat >= self.m - tol))

    def records(self) -> List[Dict[str, Any]]:
        return [{"k": q[0], "j": q[1], "beta": float(self.beta[i]), "beta_hat": float(self.beta_hat[i]),
                 "m": float(self.m[i]), "m_hat": float(self.m_hat[i])} for i, q in enumerate(self.cube_ids)]


def union_summary(quad: BoxQuadrature, members: np.ndarray) -> Tuple[float, float]:
    """(integral of the integrand over the union of ``members``, sup of |H| on it).

    ``members`` are Whitney indices, all of which must be boxes of ``quad``.
    """
    members = np.unique(np.asarray(members, dtype=np.int64))
    if len(members) == 0:
        return 0.0, 0.0
    local = np.searchsorted(quad.boxes, members)
    if np.any(local >= len(quad.boxes)) or np.any(quad.boxes[np.minimum(local, len(quad.boxes) - 1)] != members):
        raise InputError("union members are missing from the quadrature")
    on = np.zeros(len(quad.boxes), dtype=bool)
    on[local] = True
    nodes = np.flatnonzero(on[quad.owner])
    if len(nodes) == 0:
        return 0.0, 0.0
    mult = quad.incidence[nodes] @ on.astype(float)
    beta = float(np.sum(quad.integrand[nodes] * quad.weights[nodes] / np.maximum(mult, 1.0)))
    sup = max(float(quad.sup_values[nodes].max()), float(quad.corner_sup[local].max()))
    return beta, sup


def cube_data(S: WhitneyDyadicStructure, G: ScalarField, H: ScalarField, quadrature_level: int = 2,
              map_fn: Optional[Callable] = None) -> CubeDataTable:
    """beta/m over U_Q and beta^/m^ over the fattened U_{Q,2tau} for every cube of the structure."""
    if quadrature_level < 0:
        raise InputError("quadrature level must be nonnegative", level=quadrature_level)
    map_fn = map_fn or (lambda fn, items: [fn(it) for it in items])
    per_axis = 2 ** (quadrature_level + 1)
    plain = box_quadrature(S, G, H, S.tau, per_axis)
    fat = box_quadrature(S, G, H, 2.0 * S.tau, per_axis, boxes=plain.boxes)
    rows = map_fn(lambda q: (union_summary(plain, S.W_Q(q)), union_summary(fat, S.W_Q(q))), S.cube_ids)
    beta = np.array([r[0][0] for r in rows])
    m = np.array([r[0][1] for r in rows])
    beta_hat = np.array([r[1][0] for r in rows])
    m_hat = np.array([r[1][1] for r in rows])
    table = CubeDataTable(S.grid, S.cube_ids, beta, np.maximum(beta_hat, beta), m, np.maximum(m_hat, m),
                          structure=S, node_count=len(plain.weights),
                          quadrature={"plain": plain, "fat": fat}, label=f"{G.name}/{H.name}")
    log.info("cube data %s: %d cubes, %d boxes, %d nodes per dilation", table.label, len(table),
             len(plain.boxes), len(plain.weights))
    return table
