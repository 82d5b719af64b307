"""Vectorized geometry of finite unions of segments and rays in the plane.

A :class:`SegmentSoup` stores pieces ``X(tau) = start + tau * vec`` for
``tau`` in ``[0, length]`` (``length`` may be ``inf`` for rays).  Each piece
also carries an affine map to a global curve parameter,
``t = origin + slope * tau``, so callers can restrict a soup to a parameter
range (a dyadic cube on a graph or polygon).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from shapely import contains_xy
from shapely.geometry import Polygon

_TINY = 1e-300


@dataclass(frozen=True)
class SegmentSoup:
    starts: np.ndarray      # (s, 2)
    vecs: np.ndarray        # (s, 2)
    lengths: np.ndarray     # (s,)  tau upper bound, may be inf
    origins: np.ndarray     # (s,)  global parameter at tau = 0
    slopes: np.ndarray      # (s,)  d(global parameter)/d(tau), nonzero

    @classmethod
    def from_segments(cls, a: np.ndarray, b: np.ndarray) -> "SegmentSoup":
        """Finite segments a[i] -> b[i] parameterized by cumulative arclength."""
        a = np.asarray(a, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1, 2)
        vec = b - a
        seg_len = np.hypot(vec[:, 0], vec[:, 1])
        keep = seg_len > 0
        a, vec, seg_len = a[keep], vec[keep], seg_len[keep]
        unit = vec / seg_len[:, None]
        origins = np.concatenate([[0.0], np.cumsum(seg_len)[:-1]]) if len(seg_len) else np.zeros(0)
        return cls(a, unit, seg_len, origins, np.ones(len(seg_len)))

    @classmethod
    def empty(cls) -> "SegmentSoup":
        z = np.zeros((0, 2))
        return cls(z, z, np.zeros(0), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def speeds(self) -> np.ndarray:
        return np.hypot(self.vecs[:, 0], self.vecs[:, 1])

    @property
    def total_length(self) -> float:
        return float(np.sum(self.lengths * self.speeds))

    def ends(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.starts + np.where(np.isfinite(self.lengths), self.lengths, 0.0)[:, None] * self.vecs

    def concat(self, other: "SegmentSoup") -> "SegmentSoup":
        return SegmentSoup(
            np.concatenate([self.starts, other.starts]),
            np.concatenate([self.vecs, other.vecs]),
            np.concatenate([self.lengths, other.lengths]),
            np.concatenate([self.origins, other.origins]),
            np.concatenate([self.slopes, other.slopes]),
        )

    # ------------------------------------------------------------------
    # parameter restriction
    # ------------------------------------------------------------------
    def restrict(self, glo: float, ghi: float) -> "SegmentSoup":
        """Pieces clipped to global parameters in ``[glo, ghi]``."""
        if len(self) == 0 or not glo < ghi:
            return SegmentSoup.empty()
        with np.errstate(invalid="ignore", divide="ignore"):
            t1 = (glo - self.origins) / self.slopes
            t2 = (ghi - self.origins) / self.slopes
        lo = np.maximum(np.minimum(t1, t2), 0.0)
        hi = np.minimum(np.maximum(t1, t2), self.lengths)
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        starts = self.starts[keep] + lo[:, None] * self.vecs[keep]
        return SegmentSoup(
            starts,
            self.vecs[keep],
            hi - lo,
            self.origins[keep] + self.slopes[keep] * lo,
            self.slopes[keep],
        )

    def exclude(self, glo: float, ghi: float) -> "SegmentSoup":
        """Pieces with global parameter outside ``[glo, ghi)``."""
        return self.restrict(-np.inf, glo).concat(self.restrict(ghi, np.inf))

    # ------------------------------------------------------------------
    # distances
    # ------------------------------------------------------------------
    def _project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Closest tau on every piece for every point: returns (tau, dist), shape (m, s)."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        rel = p[:, None, :] - self.starts[None, :, :]
        vv = np.maximum(np.sum(self.vecs ** 2, axis=1), _TINY)
        tau = np.clip(np.einsum("msk,sk->ms", rel, self.vecs) / vv, 0.0, self.lengths)
        diff = rel - tau[:, :, None] * self.vecs[None, :, :]
        return tau, np.hypot(diff[:, :, 0], diff[:, :, 1])

    def distance(self, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(self) == 0:
            return np.full(len(p), np.inf)
        out = np.empty(len(p))
        for i in range(0, len(p), chunk):
            _, d = self._project(p[i:i + chunk])
            out[i:i + chunk] = d.min(axis=1)
        return out

    def nearest(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nearest soup point, its global parameter and the distance."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        tau, d = self._project(p)
        idx = np.argmin(d, axis=1)
        rows = np.arange(len(p))
        t = tau[rows, idx]
        q = self.starts[idx] + t[:, None] * self.vecs[idx]
        return q, self.origins[idx] + self.slopes[idx] * t, d[rows, idx]

    def box_distance(self, lo: np.ndarray, hi: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """Euclidean distance between closed boxes ``[lo, hi]`` and the soup."""
        lo = np.asarray(lo, dtype=float).reshape(-1, 2)
        hi = np.asarray(hi, dtype=float).reshape(-1, 2)
        if len(self) == 0:
            return np.full(len(lo), np.inf)
        out = np.empty(len(lo))
        for i in range(0, len(lo), chunk):
            out[i:i + chunk] = self._box_distance(lo[i:i + chunk], hi[i:i + chunk]).min(axis=1)
        return out

    def box_distance_pairs(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Per-piece box distances, shape (m, s)."""
        return self._box_distance(np.asarray(lo, float).reshape(-1, 2), np.asarray(hi, float).reshape(-1, 2))

    def _box_distance(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        m, s = len(lo), len(self)
        # clip every piece against every box (Liang-Barsky)
        enter = np.zeros((m, s))
        leave = np.broadcast_to(self.lengths, (m, s)).copy()
        inside = np.ones((m, s), dtype=bool)
        for ax in range(2):
            v = self.vecs[:, ax][None, :]
            p = self.starts[:, ax][None, :]
            flat = np.abs(v) < 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[:, ax][:, None] - p) / v
                tb = (hi[:, ax][:, None] - p) / v
            t_in = np.where(flat, -np.inf, np.minimum(ta, tb))
            t_out = np.where(flat, np.inf, np.maximum(ta, tb))
            in_slab = (p >= lo[:, ax][:, None]) & (p <= hi[:, ax][:, None])
            inside &= ~flat | in_slab
            enter = np.maximum(enter, t_in)
            leave = np.minimum(leave, t_out)
        hit = inside & (enter <= leave)

        corners = np.stack([
            lo,
            np.column_stack([hi[:, 0], lo[:, 1]]),
            hi,
            np.column_stack([lo[:, 0], hi[:, 1]]),
        ], axis=1)                                          # (m, 4, 2)
        _, dc = self._project(corners.reshape(-1, 2))
        best = dc.reshape(m, 4, s).min(axis=1)
        best = np.minimum(best, point_box_distance(self.starts[None, :, :], lo[:, None, :], hi[:, None, :]))
        finite = np.isfinite(self.lengths)
        if np.any(finite):
            ends = self.ends()
            d_end = point_box_distance(ends[None, :, :], lo[:, None, :], hi[:, None, :])
            best = np.where(finite[None, :], np.minimum(best, d_end), best)
        return np.where(hit, 0.0, best)

    # ------------------------------------------------------------------
    # measure
    # ------------------------------------------------------------------
    def ball_length(self, centers: np.ndarray, radii, per_piece: bool = False) -> np.ndarray:
        """Arclength of the soup inside closed balls B(center, radius).

        With ``per_piece`` the (m, s) matrix of piece contributions is returned.
        """
        c = np.asarray(centers, dtype=float).reshape(-1, 2)
        r = np.broadcast_to(np.asarray(radii, dtype=float), (len(c),))
        if len(self) == 0:
            return np.zeros(len(c))
        rel = self.starts[None, :, :] - c[:, None, :]
        a = np.maximum(np.sum(self.vecs ** 2, axis=1), _TINY)[None, :]
        b = 2.0 * np.einsum("msk,sk->ms", rel, self.vecs)
        cc = np.sum(rel ** 2, axis=2) - r[:, None] ** 2
        disc = b * b - 4.0 * a * cc
        root = np.sqrt(np.maximum(disc, 0.0))
        t1 = np.maximum((-b - root) / (2 * a), 0.0)
        t2 = np.minimum((-b + root) / (2 * a), self.lengths[None, :])
        span = np.where(disc > 0, np.maximum(t2 - t1, 0.0), 0.0)
        contrib = span * np.sqrt(a)
        return contrib if per_piece else np.sum(contrib, axis=1)

    def clip_to_ball(self, center: np.ndarray, radius: float) -> "SegmentSoup":
        """Pieces clipped to the closed ball; global parameters are preserved."""
        if len(self) == 0:
            return self
        c = np.asarray(center, dtype=float).reshape(2)
        rel = self.starts - c
        a = np.maximum(np.sum(self.vecs ** 2, axis=1), _TINY)
        b = 2.0 * np.einsum("sk,sk->s", rel, self.vecs)
        cc = np.sum(rel ** 2, axis=1) - radius ** 2
        disc = b * b - 4.0 * a * cc
        root = np.sqrt(np.maximum(disc, 0.0))
        t1 = np.maximum((-b - root) / (2 * a), 0.0)
        t2 = np.minimum((-b + root) / (2 * a), self.lengths)
        keep = (disc > 0) & (t2 > t1)
        t1, t2 = t1[keep], t2[keep]
        return SegmentSoup(
            self.starts[keep] + t1[:, None] * self.vecs[keep],
            self.vecs[keep],
            t2 - t1,
            self.origins[keep] + self.slopes[keep] * t1,
            self.slopes[keep],
        )

    def midpoint_samples(self, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
        """Midpoint-rule nodes and arclength weights on the finite pieces."""
        pts, wts = [], []
        speeds = self.speeds
        for i in range(len(self)):
            if not np.isfinite(self.lengths[i]):
                continue
            arc = self.lengths[i] * speeds[i]
            n = max(1, int(np.ceil(arc / spacing)))
            tau = (np.arange(n) + 0.5) * (self.lengths[i] / n)
            pts.append(self.starts[i] + tau[:, None] * self.vecs[i])
            wts.append(np.full(n, arc / n))
        if not pts:
            return np.zeros((0, 2)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)


def point_box_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distance from points to closed boxes; arguments broadcast over leading axes."""
    gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.hypot(gap[..., 0], gap[..., 1])


def box_box_distance(lo1, hi1, lo2, hi2) -> np.ndarray:
    gap = np.maximum(np.maximum(lo1 - hi2, lo2 - hi1), 0.0)
    return np.hypot(gap[..., 0], gap[..., 1])


def segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Proper or touching intersection of segments p1p2 and q1q2 (broadcasting)."""
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    def on_segment(a, b, c):
        return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
                & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    general = (o1 != o2) & (o3 != o4)
    special = (((o1 == 0) & on_segment(p1, p2, q1)) | ((o2 == 0) & on_segment(p1, p2, q2))
               | ((o3 == 0) & on_segment(q1, q2, p1)) | ((o4 == 0) & on_segment(q1, q2, p2)))
    return general | special


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Points strictly inside the polygon with the given vertex ring."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    return np.asarray(contains_xy(Polygon(v), p[:, 0], p[:, 1]), dtype=bool)
