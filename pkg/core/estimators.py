"""Carleson-measure, square-function and non-tangential estimators.

Continuous functionals (CME, CME_0, traditional-cone S/A/N) are polar
midpoint quadratures over deterministic ball families.  Dyadic functionals
read a :class:`CubeDataTable` and use the overlap-counted convention:
A^Q(x)^2 is the sum of beta_Q' over the cubes Q' of D_Q that contain x.
That sum is constant on finest-generation cubes, so dyadic functionals are
evaluated leaf by leaf and the Fubini identity holds exactly.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.ambient import AmbientSet, CurveSet, PolygonSet
from core.cube_data import CubeDataTable, union_summary
from core.dyadic_grid import CubeId
from core.errors import FieldEvaluationError, InputError
from core.fields import ScalarField, box_nodes, disk_nodes
from core.regions import ComplementDomain
from core.structures import CONE_TRUNCATION, WhitneyDyadicStructure, trad_cone
from core.whitney import WhitneyDecomposition

log = logging.getLogger(__name__)

POLAR_RADII = 24
POLAR_ANGLES = 48
COMPARISON_RTOL = 1e-9


def _serial(fn, items):
    return [fn(it) for it in items]


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def safe_ratio(num: float, den: float) -> float:
    """num / den with 0/0 = 0 and x/0 = inf."""
    if den <= 0:
        return 0.0 if num <= 0 else float("inf")
    return float(num / den)


@dataclass
class FunctionalResult:
    """A functional's value with the ball, cube or point attaining it."""

    name: str
    value: float
    witness: Any = None
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def to_row(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "witness": json.dumps(_plain(self.witness), sort_keys=True),
            "params": json.dumps(_plain(self.params), sort_keys=True),
            "seed": self.seed,
        }


# ----------------------------------------------------------------------
# families of balls and interior samples
# ----------------------------------------------------------------------
def ball_family(set_: AmbientSet, levels: int = 4, centers: int = 9, r_max: Optional[float] = None,
                seed: int = 0) -> np.ndarray:
    """Rows (x, y, r): ``centers`` points of E times the radii r_max 2^-i, i < levels.

    Curve centers sit on a uniform parameter grid; other sets draw them
    with a seeded generator.
    """
    if levels < 1 or centers < 1:
        raise InputError("ball families need levels >= 1 and centers >= 1", levels=levels, centers=centers)
    if r_max is None:
        r_max = 0.5 * set_.diam if np.isfinite(set_.diam) else 1.0
    if r_max <= 0:
        raise InputError("largest ball radius must be positive", r_max=r_max)
    if isinstance(set_, CurveSet):
        lo, hi = set_.sampling_window()
        if centers == 1:
            t = np.array([0.5 * (lo + hi)])
        else:
            t = np.linspace(lo, hi, centers, endpoint=not isinstance(set_, PolygonSet))
        xs = set_.point_at(t)
    else:
        xs = set_.sample_points(centers, np.random.default_rng(seed))
    radii = r_max * 2.0 ** -np.arange(levels, dtype=float)
    return np.column_stack([np.repeat(xs, levels, axis=0), np.tile(radii, len(xs))])


def domain_family(domain, levels: int = 4, centers: int = 16, r_max: Optional[float] = None) -> np.ndarray:
    """Ball family centered on the boundary of a region or polygon domain."""
    soup = domain.boundary()
    length = soup.total_length
    if not np.isfinite(length) or length <= 0:
        raise InputError("domain boundary must have finite positive length", label=getattr(domain, "label", ""))
    pts, _ = soup.midpoint_samples(length / centers)
    pick = np.linspace(0, len(pts) - 1, min(centers, len(pts))).round().astype(int)
    xs = pts[pick]
    if r_max is None:
        lo, hi = domain.bbox()
        r_max = 0.5 * float(np.max(np.asarray(hi) - np.asarray(lo)))
    radii = r_max * 2.0 ** -np.arange(levels, dtype=float)
    return np.column_stack([np.repeat(xs, levels, axis=0), np.tile(radii, len(xs))])


def interior_samples(domain, lo, hi, count: int) -> np.ndarray:
    """Grid points of the box [lo, hi] lying in the domain."""
    per_axis = max(1, int(np.ceil(np.sqrt(count))))
    pts, _ = box_nodes(lo, hi, per_axis)
    inside = domain.contains(pts)
    return pts[inside & (domain.boundary_distance(pts) > 0)]


# ----------------------------------------------------------------------
# continuous Carleson functionals
# ----------------------------------------------------------------------
def _ball_integral(F: ScalarField, domain, x, r: float, n_r: int, n_theta: int,
                   power: float = 2.0, weighted: bool = True) -> float:
    """int_{B(x, r) cap Omega} |F|^power (times delta when ``weighted``)."""
    pts, w = disk_nodes(x, r, n_r, n_theta)
    inside = domain.contains(pts)
    if not np.any(inside):
        return 0.0
    p = pts[inside]
    vals = np.abs(F.values(p, where={"x": np.ravel(x).tolist(), "r": float(r)})) ** power
    if weighted:
        vals = vals * domain.boundary_distance(p)
    return float(np.sum(vals * w[inside]))


def _label(domain) -> str:
    return getattr(domain, "label", type(domain).__name__)


def cme(F: ScalarField, set_: AmbientSet, family: np.ndarray, domain=None,
        n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES, map_fn: Optional[Callable] = None) -> FunctionalResult:
    """sup over the family of r^-n int_{B(x, r) cap Omega} |F|^2 delta."""
    domain = ComplementDomain(set_) if domain is None else domain
    fam = np.asarray(family, dtype=float).reshape(-1, 3)
    if len(fam) == 0:
        raise InputError("CME needs a nonempty ball family")
    if np.any(fam[:, 2] <= 0):
        raise InputError("ball radii must be positive")
    n = set_.n
    vals = np.asarray((map_fn or _serial)(
        lambda b: _ball_integral(F, domain, b[:2], b[2], n_r, n_theta) / b[2] ** n, list(fam)))
    i = int(np.argmax(vals))
    return FunctionalResult("cme", float(vals[i]), {"x": fam[i, :2], "r": float(fam[i, 2])},
                            {"field": F.name, "domain": _label(domain), "balls": len(fam),
                             "n_r": n_r, "n_theta": n_theta})


def cme0(F: ScalarField, set_: AmbientSet, samples: np.ndarray, domain=None,
         n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES, map_fn: Optional[Callable] = None) -> FunctionalResult:
    """sup over the samples of delta(X)^(1-n) int_{B(X, delta(X)/2)} |F|^2."""
    domain = ComplementDomain(set_) if domain is None else domain
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(X) == 0:
        raise InputError("CME_0 needs at least one interior sample")
    d = domain.boundary_distance(X)
    if not np.all(d > 0):
        raise InputError("CME_0 samples need delta(X) > 0", point=X[~(d > 0)][0].tolist())
    n = set_.n
    vals = np.asarray((map_fn or _serial)(
        lambda i: d[i] ** (1 - n) * _ball_integral(F, domain, X[i], 0.5 * d[i], n_r, n_theta, weighted=False),
        list(range(len(X)))))
    i = int(np.argmax(vals))
    return FunctionalResult("cme0", float(vals[i]), {"X": X[i], "delta": float(d[i])},
                            {"field": F.name, "domain": _label(domain), "samples": len(X)})


def cme_joint(F: ScalarField, set_: AmbientSet, samples: np.ndarray, family: np.ndarray, domain=None,
              n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES,
              map_fn: Optional[Callable] = None) -> Dict[str, Any]:
    """CME and CME_0 on one run; the ball family gains B(x_X, 3 delta(X) / 2) for every sample X.

    ``holds`` reports CME_0 <= 2 (3/2)^n CME on the shared run.
    """
    domain = ComplementDomain(set_) if domain is None else domain
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    zero = cme0(F, set_, X, domain, n_r, n_theta, map_fn)
    d = domain.boundary_distance(X)
    extra = np.column_stack([domain.nearest_boundary(X), 1.5 * d])
    full = cme(F, set_, np.vstack([np.asarray(family, float).reshape(-1, 3), extra]), domain, n_r, n_theta, map_fn)
    bound = 2.0 * 1.5 ** set_.n
    holds = zero.value <= bound * full.value * (1 + COMPARISON_RTOL)
    if not holds:
        log.warning("CME_0 %.6g exceeds %.3g x CME %.6g", zero.value, bound, full.value)
    return {"cme": full, "cme0": zero, "bound": bound, "ratio": safe_ratio(zero.value, full.value), "holds": holds}


def three_norm_constant(cme_value: float, dyadic_value: float, cme0_value: float) -> float:
    """Measured C in CME <= C (CME_dyad + CME_0)."""
    return safe_ratio(cme_value, dyadic_value + cme0_value)


# ----------------------------------------------------------------------
# dyadic functionals
# ----------------------------------------------------------------------
def _subtree_sums(table: CubeDataTable, weights: np.ndarray) -> np.ndarray:
    out = np.asarray(weights, dtype=float).copy()
    for qid in sorted(table.cube_ids, key=lambda q: (-q[0], q[1])):
        par = table.grid[qid].parent
        if par is not None and par in table.row:
            out[table.row[par]] += out[table.row[qid]]
    return out


def dyadic_carleson_ratios(table: CubeDataTable, fat: bool = False) -> np.ndarray:
    """Per cube: sum over D_Q of sigma(Q') beta_Q', divided by sigma(Q)."""
    sigma = np.array([table.sigma(q) for q in table.cube_ids])
    beta = table.beta_hat if fat else table.beta
    sums = _subtree_sums(table, sigma * beta)
    return np.where(sigma > 0, sums / np.where(sigma > 0, sigma, 1.0), 0.0)


def cme_dyadic(table: CubeDataTable, structure: Optional[WhitneyDyadicStructure] = None,
               fat: bool = False) -> FunctionalResult:
    """sup_Q sigma(Q)^-1 sum_{Q' in D_Q} sigma(Q') beta_Q'."""
    if structure is not None and table.structure is not None and structure is not table.structure:
        raise InputError("table was built on a different structure")
    if len(table) == 0:
        raise InputError("dyadic CME of an empty table")
    per = dyadic_carleson_ratios(table, fat)
    i = int(np.argmax(per))
    return FunctionalResult("cme_dyadic", float(per[i]), {"cube": table.cube_ids[i]},
                            {"table": table.label, "cubes": len(table), "fat": fat})


@dataclass
class LocalProfile:
    """A^Q(x)^2 and N^Q_*(x) on the finest cubes (leaves) of D_Q."""

    cube: CubeId
    leaves: List[CubeId]
    sigma: np.ndarray
    area_sq: np.ndarray
    ntmax: np.ndarray

    @property
    def area(self) -> np.ndarray:
        return np.sqrt(self.area_sq)

    @property
    def measure(self) -> float:
        return float(self.sigma.sum())

    def norm(self, values: np.ndarray, q: float) -> float:
        """L^q(Q) norm of a per-leaf function."""
        if q <= 0:
            raise InputError("norm exponent must be positive", q=q)
        return float(np.sum(self.sigma * np.abs(values) ** q)) ** (1.0 / q)

    def average(self, values: np.ndarray, p: float = 1.0) -> float:
        m = self.measure
        return float(np.sum(self.sigma * np.abs(values) ** p) / m) if m > 0 else 0.0

    def level_measure(self, values: np.ndarray, t: float) -> float:
        """sigma{x in Q : value(x) > t}."""
        return float(self.sigma[values > t].sum())


def local_profile(table: CubeDataTable, qid: CubeId, fat_area: bool = False, fat_sup: bool = True) -> LocalProfile:
    """One top-down sweep of D_Q accumulating beta sums and running maxima of m."""
    beta = table.beta_hat if fat_area else table.beta
    m = table.m_hat if fat_sup else table.m
    r = table.index(qid)
    acc_b, acc_m = {qid: float(beta[r])}, {qid: float(m[r])}
    leaves: List[CubeId] = []
    layer = [qid]
    while layer:
        nxt = []
        for c in layer:
            kids = [k for k in table.grid[c].children if k in table.row]
            if not kids:
                leaves.append(c)
                continue
            for k in kids:
                rk = table.row[k]
                acc_b[k] = acc_b[c] + float(beta[rk])
                acc_m[k] = max(acc_m[c], float(m[rk]))
                nxt.append(k)
        layer = nxt
    leaves.sort()
    return LocalProfile(qid, leaves, np.array([table.sigma(c) for c in leaves]),
                        np.array([acc_b[c] for c in leaves]), np.array([acc_m[c] for c in leaves]))


def _chain(table: CubeDataTable, x: np.ndarray, qid: Optional[CubeId]) -> List[int]:
    grid = table.grid
    leaf = grid.locate(x[None], grid.k_max)[0]
    if leaf is None:
        return []
    chain = grid.ancestors(leaf, stop=qid)
    if qid is None and np.isfinite(grid.set.diam):
        chain = [c for c in chain if 2.0 ** (-c[0]) <= CONE_TRUNCATION * grid.set.diam]
    return [table.row[c] for c in chain if c in table.row]


def area_dyadic(table: CubeDataTable, points, qid: Optional[CubeId] = None, fat: bool = False) -> np.ndarray:
    """A^Q G(x) (or A G(x) when ``qid`` is None) at points of E, overlap-counted."""
    beta = table.beta_hat if fat else table.beta
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.array([np.sqrt(float(beta[_chain(table, p, qid)].sum())) for p in pts])


def ntmax_dyadic(table: CubeDataTable, points, qid: Optional[CubeId] = None, fat: bool = True) -> np.ndarray:
    """N^Q_* H(x) (fattened by default) at points of E."""
    m = table.m_hat if fat else table.m
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = []
    for p in pts:
        rows = _chain(table, p, qid)
        out.append(float(m[rows].max()) if rows else 0.0)
    return np.array(out)


def area_geometric(table: CubeDataTable, points, qid: Optional[CubeId] = None, fat: bool = False) -> np.ndarray:
    """A^Q G(x) as the integral over the union of the cone's Whitney boxes."""
    S = table.structure
    quad = table.quadrature.get("fat" if fat else "plain")
    if S is None or quad is None:
        raise InputError("geometric area needs a table computed from a structure")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = []
    for p in pts:
        rows = _chain(table, p, qid)
        if not rows:
            out.append(0.0)
            continue
        members = np.concatenate([S.W_Q(table.cube_ids[r]) for r in rows])
        out.append(np.sqrt(union_summary(quad, members)[0]))
    return np.array(out)


def check_area_recursion(table: CubeDataTable, qid: CubeId, sub: CubeId, fat: bool = False) -> Dict[str, Any]:
    """A^Q F(x) <= A^Q' F(x) + inf over the parent of Q' of A^Q F, for x in Q' in D_Q minus Q."""
    grid = table.grid
    if sub == qid or not grid.is_descendant(sub, qid):
        raise InputError(f"cube {sub} must be a proper descendant of {qid}")
    parent = grid[sub].parent
    big = local_profile(table, qid, fat_area=fat)
    small = local_profile(table, sub, fat_area=fat)
    big_area = dict(zip(big.leaves, big.area))
    inf_parent = min(v for c, v in big_area.items() if grid.is_descendant(c, parent))
    slack = np.array([small_a + inf_parent - big_area[c] for c, small_a in zip(small.leaves, small.area)])
    tol = COMPARISON_RTOL * max(1.0, float(big.area.max(initial=0.0)))
    return {
        "cube": list(qid),
        "sub": list(sub),
        "checked": int(len(slack)),
        "violations": int(np.sum(slack < -tol)),
        "worst_slack": float(slack.min()) if len(slack) else 0.0,
    }


# ----------------------------------------------------------------------
# traditional cones
# ----------------------------------------------------------------------
def trad_functionals(u: ScalarField, set_: AmbientSet, x, kappa: float, r: float,
                     G: Optional[ScalarField] = None, H: Optional[ScalarField] = None, domain=None,
                     n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES
                     ) -> Tuple[FunctionalResult, FunctionalResult, FunctionalResult]:
    """(S^r_kappa u(x), A^r_kappa G(x), N^r_kappa H(x)) over |Y - x| <= (1 + kappa) delta(Y), |Y - x| < r.

    G defaults to |grad u| and H to u.  The sup runs over the quadrature
    nodes plus a ray grid that reaches radius r.
    """
    if r <= 0:
        raise InputError("truncation radius must be positive", r=r)
    x = np.asarray(x, dtype=float).reshape(2)
    member = trad_cone(set_, x, kappa, r)

    def keep(points: np.ndarray) -> np.ndarray:
        ok = member(points)
        return ok & domain.contains(points) if domain is not None else ok

    pts, w = disk_nodes(x, r, n_r, n_theta)
    inside = keep(pts)
    p, w = pts[inside], w[inside]
    weight = set_.distance(p) ** (1 - set_.n) * w
    grad2 = np.sum(u.gradient(p) ** 2, axis=1) if len(p) else np.zeros(0)
    g2 = G.values(p) ** 2 if (G is not None and len(p)) else grad2
    s_val = float(np.sqrt(np.sum(grad2 * weight)))
    a_val = float(np.sqrt(np.sum(g2 * weight)))

    radii = r * (1.0 - 1e-9) * np.arange(1, n_r + 1) / n_r
    angles = 2.0 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(radii, angles, indexing="ij")
    rays = x + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    sup_pts = np.vstack([p, rays[keep(rays)]])
    h = H if H is not None else u
    n_val = float(np.max(np.abs(h.values(sup_pts)))) if len(sup_pts) else 0.0
    params = {"kappa": kappa, "r": r, "x": x, "nodes": int(len(p))}
    return (FunctionalResult("square_function", s_val, x, dict(params, field=u.name)),
            FunctionalResult("area_integral", a_val, x, dict(params, field=(G or u).name)),
            FunctionalResult("ntmax", n_val, x, dict(params, field=h.name)))


def aperture_ratio(u: ScalarField, set_: AmbientSet, kappa1: float, kappa2: float, q: float,
                   samples: np.ndarray, r: float, weights: Optional[np.ndarray] = None, domain=None,
                   n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES) -> Dict[str, float]:
    """Empirical L^q ratios of aperture-kappa1 to aperture-kappa2 functionals over the samples."""
    if q <= 0:
        raise InputError("norm exponent must be positive", q=q)
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    vals = {}
    for kappa in sorted({kappa1, kappa2}):
        rows = [trad_functionals(u, set_, x, kappa, r, domain=domain, n_r=n_r, n_theta=n_theta) for x in X]
        vals[kappa] = (np.array([a.value for _, a, _ in rows]), np.array([n.value for _, _, n in rows]))

    def norm(v):
        return float(np.sum(w * np.abs(v) ** q)) ** (1.0 / q)

    a1, n1 = vals[kappa1]
    a2, n2 = vals[kappa2]
    return {
        "kappa1": kappa1,
        "kappa2": kappa2,
        "q": q,
        "N_ratio": safe_ratio(norm(n1), norm(n2)),
        "N_ratio_inverse": safe_ratio(norm(n2), norm(n1)),
        "A_ratio": safe_ratio(norm(a1), norm(a2)),
    }


# ----------------------------------------------------------------------
# epsilon-approximability
# ----------------------------------------------------------------------
def _segment_disk_length(a: np.ndarray, b: np.ndarray, x: np.ndarray, r: float) -> np.ndarray:
    d = b - a
    L2 = np.sum(d ** 2, axis=1)
    f = a - x
    B = np.sum(f * d, axis=1)
    C = np.sum(f ** 2, axis=1) - r * r
    disc = B * B - L2 * C
    ok = (disc > 0) & (L2 > 0)
    s = np.sqrt(np.where(ok, disc, 0.0))
    L2s = np.where(L2 > 0, L2, 1.0)
    t0 = np.clip((-B - s) / L2s, 0.0, 1.0)
    t1 = np.clip((-B + s) / L2s, 0.0, 1.0)
    return np.where(ok, np.maximum(t1 - t0, 0.0) * np.sqrt(L2), 0.0)


class WhitneyAverage:
    """Piecewise-constant approximant: the average of u on each Whitney cube.

    Its gradient is the jump measure on shared faces, so the mass of
    |grad phi| in a ball is a sum of jump times face length inside the ball.
    """

    def __init__(self, W: WhitneyDecomposition, u: ScalarField, idx: Optional[Sequence[int]] = None,
                 per_axis: int = 8):
        self.W = W
        self.name = f"whitney average of {u.name}"
        idx = np.arange(len(W)) if idx is None else np.asarray(idx, dtype=np.int64)
        self.values = np.full(len(W), np.nan)
        unit, w = box_nodes((0.0, 0.0), (1.0, 1.0), per_axis)
        for chunk in np.array_split(idx, max(1, len(idx) // 2048)):
            if len(chunk) == 0:
                continue
            nodes = W.lo[chunk][:, None, :] + unit[None, :, :] * W.side[chunk][:, None, None]
            vals = u.values(nodes.reshape(-1, 2)).reshape(len(chunk), -1)
            self.values[chunk] = vals @ w / w.sum()
        pairs = W.touching_pairs(level_gap=int(W.levels.max() - W.levels.min()) if len(W) else 0)
        both = np.isfinite(self.values[pairs[:, 0]]) & np.isfinite(self.values[pairs[:, 1]])
        pairs = pairs[both]
        i, j = pairs[:, 0], pairs[:, 1]
        self.face_lo = np.maximum(W.lo[i], W.lo[j])
        self.face_hi = np.minimum(W.hi[i], W.hi[j])
        self.jump = np.abs(self.values[i] - self.values[j])
        log.debug("whitney average %s: %d cubes, %d faces", u.name, len(idx), len(pairs))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        idx = self.W.locate(p)
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)], np.nan)
        if not np.all(np.isfinite(out)):
            bad = p[~np.isfinite(out)][0]
            raise FieldEvaluationError(f"'{self.name}' is undefined at {bad.tolist()}", point=bad.tolist())
        return out

    def gradient_mass(self, x, r: float) -> float:
        x = np.asarray(x, dtype=float).reshape(2)
        return float(np.sum(self.jump * _segment_disk_length(self.face_lo, self.face_hi, x, r)))


@dataclass
class EpsApproxReport:
    eps: float
    gap: float
    C_eps: float
    witness: Any
    scale: float
    verdict: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"eps": self.eps, "gap": self.gap, "C_eps": self.C_eps, "witness": _plain(self.witness),
                "scale": self.scale, "verdict": self.verdict}


def eps_approx_check(u: ScalarField, phi, set_: AmbientSet, eps: float, family: np.ndarray,
                     samples: np.ndarray, domain=None, n_r: int = POLAR_RADII,
                     n_theta: int = POLAR_ANGLES) -> EpsApproxReport:
    """sup |u - phi| on the samples and C_eps = sup r^-n int_{B cap Omega} |grad phi| over the family.

    u and phi are divided by max(1, sup |u|) first.  ``phi`` is a field with
    a gradient or anything with ``gradient_mass(x, r)``.
    """
    if eps <= 0:
        raise InputError("eps must be positive", eps=eps)
    domain = ComplementDomain(set_) if domain is None else domain
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    uv = u.values(X)
    scale = max(1.0, float(np.max(np.abs(uv)))) if len(uv) else 1.0
    gap = float(np.max(np.abs(uv - phi(X)))) / scale if len(X) else 0.0

    if hasattr(phi, "gradient_mass"):
        def mass(x, r):
            return phi.gradient_mass(x, r)
    else:
        if getattr(phi, "gradient_evaluator", None) is None:
            raise FieldEvaluationError(f"approximant '{getattr(phi, 'name', phi)}' has no weak gradient")
        grad = phi.gradient_norm()

        def mass(x, r):
            return _ball_integral(grad, domain, x, r, n_r, n_theta, power=1.0, weighted=False)

    fam = np.asarray(family, dtype=float).reshape(-1, 3)
    vals = np.array([mass(b[:2], b[2]) / (scale * b[2] ** set_.n) for b in fam])
    i = int(np.argmax(vals)) if len(vals) else 0
    C = float(vals[i]) if len(vals) else 0.0
    return EpsApproxReport(eps, gap, C, {"x": fam[i, :2], "r": float(fam[i, 2])} if len(fam) else None,
                           scale, bool(gap < eps and np.isfinite(C)))
