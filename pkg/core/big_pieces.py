"""Constructive big pieces: a Lipschitz subdomain Omega_Q sitting on Q.

Omega_Q is the region between the arc of E over Q (a graph in a rotated
frame) and a flat cap above it, cut off by two segments perpendicular to
the frame.  When the full arc does not fit (not a graph, too tall for
B(x_Q, l(Q)), or other pieces of E cut through) the parameter interval is
halved around x_Q and the construction is retried.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.ambient import CurveSet, make_polygon_set, measured_corkscrew_constant
from core.corona import Frame, Regime, candidate_frames
from core.dyadic_grid import CubeId, DyadicGrid
from core.errors import GeometryError, InputError
from core.regions import PolygonDomain
from core.segments import points_in_polygon, segments_intersect

log = logging.getLogger(__name__)

SHRINK_STEPS = 4
CORKSCREW_DEPTH = 3


@dataclass
class LipschitzSubdomain:
    """Omega_Q with its Lipschitz character (M, m, C0) and overlap fraction theta."""

    cube: CubeId
    frame: Frame
    vertices: np.ndarray
    interval: Tuple[float, float]
    theta: float
    M: float
    C0: float
    m: int = 1
    corkscrews: Dict[CubeId, np.ndarray] = field(default_factory=dict)
    corkscrew_constants: Dict[CubeId, float] = field(default_factory=dict)

    @property
    def domain(self) -> PolygonDomain:
        return PolygonDomain(make_polygon_set(self.vertices), label=f"Omega_{self.cube}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.domain.contains(points)

    @property
    def max_corkscrew_constant(self) -> float:
        return max(self.corkscrew_constants.values(), default=np.nan)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cube": list(self.cube),
            "theta": self.theta,
            "M": self.M,
            "m": self.m,
            "C0": self.C0,
            "vertex_count": int(len(self.vertices)),
            "frame": self.frame.to_dict(),
            "max_corkscrew_constant": self.max_corkscrew_constant,
        }


def _arc_nodes(set_: CurveSet, t0: float, t1: float) -> np.ndarray:
    """Vertices of the arc over [t0, t1] in increasing global parameter."""
    arc = set_.arc(t0, t1)
    t_start = arc.origins
    t_end = arc.origins + arc.slopes * arc.lengths
    params = np.concatenate([t_start, t_end])
    points = np.vstack([arc.starts, arc.ends()])
    order = np.argsort(params, kind="stable")
    points = points[order]
    step = np.hypot(*np.diff(points, axis=0).T)
    scale = max(float(np.max(np.abs(points))), 1.0) if len(points) else 1.0
    keep = np.concatenate([[True], step > 1e-12 * scale])
    return points[keep]


def _pick_frame(set_: CurveSet, center: np.ndarray, nodes: np.ndarray, length: float) -> Frame:
    best = None
    for frame in candidate_frames(set_, center, nodes, length / 8.0):
        s, h = frame.to_frame(nodes)
        ds = np.diff(s)
        if len(ds) and np.all(ds < 0):
            ds = -ds
        if np.any(ds <= 0):
            continue
        slope = float(np.max(np.abs(np.diff(h) / ds))) if len(ds) else 0.0
        if best is None or slope < best[0]:
            best = (slope, frame)
    if best is None:
        return candidate_frames(set_, center, nodes, length / 8.0)[0]
    return best[1]


def _attempt(set_: CurveSet, x: np.ndarray, length: float, frame: Frame, t0: float, t1: float):
    """Polygon vertices and slope for the arc over [t0, t1], or None if the piece does not fit."""
    nodes = _arc_nodes(set_, t0, t1)
    s, h = frame.to_frame(nodes)
    if len(s) > 1 and np.all(np.diff(s) < 0):
        nodes = nodes[::-1]
        s, h = s[::-1], h[::-1]
    ds = np.diff(s)
    if len(ds) == 0 or np.any(ds <= 0):
        return None
    width = float(s[-1] - s[0])
    top = float(h.max()) + 0.5 * width
    bottom = frame.to_world(s, h)
    tr, tl = frame.to_world(s[-1], top), frame.to_world(s[0], top)
    vertices = np.vstack([bottom, tr[None], tl[None]])
    if np.max(np.hypot(*(vertices - x).T)) >= length:
        return None

    # sides start just above the arc so they do not touch E where it continues
    lift = 1e-9 * length * frame.normal
    edges_a = np.vstack([bottom[-1] + lift, tr, tl])
    edges_b = np.vstack([tr, tl, bottom[0] + lift])
    others = set_.soup.exclude(t0, t1).clip_to_ball(x, 1.5 * length)
    if len(others):
        oa, ob = others.starts, others.ends()
        hit = segments_intersect(edges_a[:, None, :], edges_b[:, None, :], oa[None, :, :], ob[None, :, :])
        # endpoints may sit on the polygon's corners; a piece wholly inside has its midpoint inside
        if np.any(hit) or np.any(points_in_polygon(0.5 * (oa + ob), vertices)):
            return None
    above = frame.to_world(0.5 * (s[0] + s[-1]), float(np.interp(0.5 * (s[0] + s[-1]), s, h)) + 0.25 * width)
    if set_.has_sides() and set_.side(above[None])[0] != 1:
        return None
    slope = float(np.max(np.abs(np.diff(h) / ds)))
    return vertices, slope, width


def big_pieces_subdomain(grid: DyadicGrid, qid: CubeId, regime: Optional[Regime] = None,
                         theta_floor: float = 1e-3) -> LipschitzSubdomain:
    """Build Omega_Q in Omega cap B(x_Q, l(Q)) with sigma(d Omega_Q cap Q) >= theta sigma(Q)."""
    set_ = grid.set
    if not isinstance(set_, CurveSet):
        raise InputError("big pieces need a piecewise-linear set", kind=set_.kind)
    q = grid[qid]
    if q.interval is None:
        raise InputError(f"cube {qid} has no parameter interval")
    x = q.center
    t_lo, t_hi = q.interval
    tc = 0.5 * (t_lo + t_hi)
    if regime is not None:
        frame = Frame(x.copy(), regime.frame.direction, regime.frame.kind)
    else:
        frame = _pick_frame(set_, x, _arc_nodes(set_, t_lo, t_hi), q.length)

    found = None
    for step in range(SHRINK_STEPS + 1):
        half = 0.5 * (t_hi - t_lo) / 2.0 ** step
        t0, t1 = tc - half, tc + half
        found = _attempt(set_, x, q.length, frame, t0, t1)
        if found is not None:
            log.debug("big piece on %s after %d shrink steps", qid, step)
            break
    if found is None:
        raise GeometryError(f"no Lipschitz piece fits on cube {qid}", cube=qid)
    vertices, slope, width = found
    theta = set_.arc_length(t0, t1) / q.measure if q.measure > 0 else 0.0
    if theta < theta_floor:
        raise GeometryError(f"overlap fraction {theta:.3g} is below the floor {theta_floor:g}", cube=qid,
                            theta=theta)
    diff = vertices[:, None, :] - vertices[None, :, :]
    diam = float(np.max(np.hypot(diff[..., 0], diff[..., 1])))
    piece = LipschitzSubdomain(qid, frame, vertices, (t0, t1), float(theta), slope, diam / width)

    poly = make_polygon_set(vertices)
    for c in grid.descendants(qid, depth=CORKSCREW_DEPTH):
        a, b = c.interval
        if a < t0 - 1e-12 * q.length or b > t1 + 1e-12 * q.length:
            continue
        Y = c.center + min(0.5 * c.length, 0.25 * width) * frame.normal
        piece.corkscrews[c.id] = Y
        inside = poly.side(Y[None])[0] == 1
        piece.corkscrew_constants[c.id] = measured_corkscrew_constant(poly, c.center, c.length, Y) if inside else np.inf
    log.debug("big piece %s: theta %.3f, M %.3g, C0 %.3g", qid, piece.theta, piece.M, piece.C0)
    return piece
