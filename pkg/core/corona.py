"""Bilateral corona decomposition of the dyadic tree of a piecewise-linear set.

A top-down stopping time: a cube that starts a regime fixes a frame (axis
or total-least-squares line, whichever approximates better) and an
eta-Lipschitz graph Gamma_S over that frame, the McShane extension of the
heights of E near the top cube.  Descendants stay in the regime while the
bilateral condition

    sup_{x in Delta*_Q} dist(x, Gamma_S) + sup_{y in B*_Q cap Gamma_S} dist(y, E) < eta l(Q)

holds for all children of a regime cube; otherwise every child leaves
(coherence) and starts afresh.  Cubes where no frame works are bad.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

import numpy as np

from core.ambient import CurveSet
from core.dyadic_grid import CubeId, DyadicGrid
from core.errors import InputError
from core.segments import SegmentSoup

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Frame:
    origin: np.ndarray
    direction: np.ndarray
    kind: str = "axis"

    @property
    def normal(self) -> np.ndarray:
        return np.array([-self.direction[1], self.direction[0]])

    def to_frame(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rel = np.asarray(points, float).reshape(-1, 2) - self.origin
        return rel @ self.direction, rel @ self.normal

    def to_world(self, s, h) -> np.ndarray:
        s = np.asarray(s, float)
        h = np.asarray(h, float)
        return self.origin + s[..., None] * self.direction + h[..., None] * self.normal

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "origin": self.origin.tolist(), "direction": self.direction.tolist()}


def mcshane(s: np.ndarray, h: np.ndarray, eta: float, at: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """min_i (h_i + eta |t - s_i|): the largest eta-Lipschitz minorant through the data."""
    out = np.empty(len(at))
    for i in range(0, len(at), chunk):
        t = at[i:i + chunk]
        out[i:i + chunk] = np.min(h[None, :] + eta * np.abs(t[:, None] - s[None, :]), axis=1)
    return out


def graph_soup(frame: Frame, nodes: np.ndarray, values: np.ndarray) -> SegmentSoup:
    """World-space polyline of the frame graph through (nodes, values), with constant rays."""
    pts = frame.to_world(nodes, values)
    inner = SegmentSoup.from_segments(pts[:-1], pts[1:])
    rays = SegmentSoup(
        np.vstack([pts[0], pts[-1]]),
        np.vstack([-frame.direction, frame.direction]),
        np.array([np.inf, np.inf]),
        np.array([-1.0, inner.total_length + 1.0]),
        np.array([-1.0, 1.0]),
    )
    return inner.concat(rays)


@dataclass
class Regime:
    """A stopping regime S: maximal cube Q(S), its cubes and Gamma_S."""

    index: int
    top: CubeId
    frame: Frame
    nodes: np.ndarray
    values: np.ndarray
    eta: float
    soup: SegmentSoup
    cubes: List[CubeId] = field(default_factory=list)
    errors: Dict[CubeId, float] = field(default_factory=dict)

    def psi(self, s) -> np.ndarray:
        return np.interp(np.asarray(s, float), self.nodes, self.values)

    def offset(self, points: np.ndarray) -> np.ndarray:
        """Signed height above Gamma_S in the regime frame."""
        s, h = self.frame.to_frame(points)
        return h - self.psi(s)

    def side(self, points: np.ndarray) -> np.ndarray:
        return np.sign(self.offset(points)).astype(int)

    def graph_distance(self, points: np.ndarray) -> np.ndarray:
        return self.soup.distance(points)

    @property
    def slope(self) -> float:
        if len(self.nodes) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.nodes))))

    def __contains__(self, qid: CubeId) -> bool:
        return qid in self.errors

    def to_dict(self, parent: Optional[int]) -> Dict[str, Any]:
        return {
            "index": self.index,
            "top": list(self.top),
            "parent_regime": parent,
            "frame": self.frame.to_dict(),
            "slope": self.slope,
            "cube_count": len(self.cubes),
            "max_bilateral_ratio": max(self.errors.values()) if self.errors else 0.0,
        }


class CoronaDecomposition:
    """Partition of the grid into bad cubes B and coherent regimes S."""

    def __init__(self, set_: CurveSet, grid: DyadicGrid, eta: float, K_c: float, samples: int):
        self.set = set_
        self.grid = grid
        self.eta = eta
        self.K_c = K_c
        self.samples = samples
        self.regimes: List[Regime] = []
        self.good: Dict[CubeId, int] = {}
        self.bad: Set[CubeId] = set()

    def regime_of(self, qid: CubeId) -> Optional[Regime]:
        i = self.good.get(qid)
        return None if i is None else self.regimes[i]

    def is_bad(self, qid: CubeId) -> bool:
        return qid in self.bad

    def packing_sum(self, qid: CubeId) -> float:
        """sum of sigma(Q(S)) over tops inside Q plus sigma(Q') over bad Q' inside Q."""
        tops = {r.top for r in self.regimes}
        return float(sum(c.measure for c in self.grid.descendants(qid) if c.id in tops or c.id in self.bad))

    def packing_ratio(self, qid: CubeId) -> float:
        m = self.grid[qid].measure
        return self.packing_sum(qid) / m if m > 0 else 0.0

    def max_packing_ratio(self) -> Tuple[float, Optional[CubeId]]:
        best, arg = 0.0, None
        for qid in sorted(self.grid.cubes):
            r = self.packing_ratio(qid)
            if r > best:
                best, arg = r, qid
        return best, arg

    def check_coherence(self) -> bool:
        """Unique maximal cube, parents inside, children all-in or all-out."""
        for reg in self.regimes:
            members = set(reg.cubes)
            for qid in reg.cubes:
                par = self.grid[qid].parent
                if qid == reg.top:
                    if par is not None and par in members:
                        return False
                elif par not in members:
                    return False
                kids = self.grid[qid].children
                inside = [c in members for c in kids]
                if any(inside) and not all(inside):
                    return False
        return True

    def check_bilateral(self) -> bool:
        return all(e < 1.0 for reg in self.regimes for e in reg.errors.values())

    def to_dict(self) -> Dict[str, Any]:
        parents = []
        for reg in self.regimes:
            par = self.grid[reg.top].parent
            parents.append(self.good.get(par) if par is not None else None)
        ratio, arg = self.max_packing_ratio()
        return {
            "eta": self.eta,
            "K_c": self.K_c,
            "regimes": [reg.to_dict(p) for reg, p in zip(self.regimes, parents)],
            "bad": [list(q) for q in sorted(self.bad)],
            "max_packing_ratio": ratio,
            "packing_witness": list(arg) if arg is not None else None,
        }


# ----------------------------------------------------------------------
# builder
# ----------------------------------------------------------------------
def _ball_nodes(soup: SegmentSoup, center: np.ndarray, radius: float, samples: int) -> np.ndarray:
    clip = soup.clip_to_ball(center, radius)
    if len(clip) == 0:
        return np.zeros((0, 2))
    mids, _ = clip.midpoint_samples(max(clip.total_length / samples, 1e-300))
    return np.vstack([mids, clip.starts, clip.ends()])


def candidate_frames(set_: CurveSet, center: np.ndarray, nodes: np.ndarray, probe: float) -> List[Frame]:
    axis = np.array([1.0, 0.0])
    frames = [axis]
    if len(nodes) >= 2:
        centered = nodes - nodes.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        tls = vt[0] / np.hypot(*vt[0])
        if abs(abs(tls @ axis) - 1.0) > 1e-12:
            frames.append(tls)
    out = []
    for d, kind in zip(frames, ("axis", "tls")):
        if set_.has_sides():
            n = np.array([-d[1], d[0]])
            if set_.side((center + probe * n)[None])[0] < 0:
                d = -d
        out.append(Frame(center.copy(), d, kind))
    return out


def _regime_graph(set_: CurveSet, frame: Frame, center, radius, eta, samples):
    data = _ball_nodes(set_.soup, center, radius, samples)
    s, h = frame.to_frame(data)
    nodes = np.unique(s)
    values = mcshane(s, h, eta, nodes)
    return nodes, values, graph_soup(frame, nodes, values)


def bilateral_ratio(set_: CurveSet, soup: SegmentSoup, center: np.ndarray, length: float,
                    eta: float, K_c: float, samples: int) -> float:
    """(sup dist(Delta*_Q, Gamma) + sup dist(Gamma cap B*_Q, E)) / (eta l(Q))."""
    radius = K_c * length
    on_e = _ball_nodes(set_.soup, center, radius, samples)
    on_g = _ball_nodes(soup, center, radius, samples)
    a = float(soup.distance(on_e).max()) if len(on_e) else 0.0
    b = float(set_.distance(on_g).max()) if len(on_g) else np.inf
    return (a + b) / (eta * length)


def build_corona(set_: CurveSet, grid: DyadicGrid, eta: float = 2.0 ** -8,
                 K_c: float = 4.0, samples: int = 64) -> CoronaDecomposition:
    if not isinstance(set_, CurveSet):
        raise InputError("corona decompositions need a piecewise-linear set (graph, flat or polygon)",
                         kind=set_.kind)
    if not 0 < eta < 1 or K_c < 1 or samples < 8:
        raise InputError("corona needs 0 < eta < 1, K_c >= 1 and samples >= 8", eta=eta, K_c=K_c, samples=samples)
    corona = CoronaDecomposition(set_, grid, eta, K_c, samples)

    def start(qid: CubeId) -> Optional[Regime]:
        q = grid[qid]
        nodes_e = _ball_nodes(set_.soup, q.center, K_c * q.length, samples)
        best = None
        for frame in candidate_frames(set_, q.center, nodes_e, q.length / 8.0):
            nodes, values, soup = _regime_graph(set_, frame, q.center, 2.0 * K_c * q.length, eta, 4 * samples)
            err = bilateral_ratio(set_, soup, q.center, q.length, eta, K_c, samples)
            if best is None or err < best[0]:
                best = (err, frame, nodes, values, soup)
        err, frame, nodes, values, soup = best
        if err >= 1.0:
            return None
        reg = Regime(len(corona.regimes), qid, frame, nodes, values, eta, soup)
        reg.cubes.append(qid)
        reg.errors[qid] = err
        return reg

    layer: List[Tuple[CubeId, Optional[int]]] = [(q, None) for q in grid.roots]
    while layer:
        nxt: List[Tuple[CubeId, Optional[int]]] = []
        for qid, r in sorted(layer):
            if r is None:
                reg = start(qid)
                if reg is None:
                    corona.bad.add(qid)
                else:
                    corona.regimes.append(reg)
                    corona.good[qid] = reg.index
                    r = reg.index
            kids = grid[qid].children
            if not kids:
                continue
            if r is None:
                nxt.extend((c, None) for c in kids)
                continue
            reg = corona.regimes[r]
            errs = [bilateral_ratio(set_, reg.soup, grid[c].center, grid[c].length, eta, K_c, samples) for c in kids]
            if all(e < 1.0 for e in errs):
                for c, e in zip(kids, errs):
                    reg.cubes.append(c)
                    reg.errors[c] = e
                    corona.good[c] = r
                nxt.extend((c, r) for c in kids)
            else:
                nxt.extend((c, None) for c in kids)
        layer = nxt
    log.info("corona on %s: %d regimes, %d bad cubes of %d", set_.kind, len(corona.regimes),
             len(corona.bad), len(grid))
    return corona
