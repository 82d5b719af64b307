"""Harmonic test fields, quadrature nodes and interior-estimate probes.

Catalog fields carry exact values and gradients.  Every evaluation goes
through :meth:`ScalarField.values`, which rejects non-finite output with a
:class:`FieldEvaluationError` naming the caller's location tag.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from core.ambient import AmbientSet
from core.errors import FieldEvaluationError, InputError

log = logging.getLogger(__name__)

CATALOG = ("coordinate", "re_power", "im_power", "poisson_interval", "log_potential", "constant")
RESIDUAL_STEP = 1e-4

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass
class ScalarField:
    """A scalar field u with an optional gradient and a validity predicate."""

    name: str
    evaluator: Evaluator
    gradient_evaluator: Optional[Evaluator] = None
    domain: str = "plane"
    params: Dict[str, Any] = field(default_factory=dict)
    valid: Optional[Callable[[np.ndarray], np.ndarray]] = None
    harmonic: bool = True

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.values(points)

    def values(self, points: np.ndarray, where: Any = None) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.asarray(self.evaluator(p), dtype=float).reshape(len(p))
        if not np.all(np.isfinite(out)):
            bad = p[~np.isfinite(out)][0]
            raise FieldEvaluationError(f"field '{self.name}' is not finite at {bad.tolist()}", where=where,
                                       point=bad.tolist())
        return out

    def gradient(self, points: np.ndarray, where: Any = None) -> np.ndarray:
        if self.gradient_evaluator is None:
            raise InputError(f"field '{self.name}' has no gradient")
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.asarray(self.gradient_evaluator(p), dtype=float).reshape(len(p), 2)
        if not np.all(np.isfinite(out)):
            bad = p[~np.all(np.isfinite(out), axis=1)][0]
            raise FieldEvaluationError(f"gradient of '{self.name}' is not finite at {bad.tolist()}", where=where,
                                       point=bad.tolist())
        return out

    def gradient_norm(self) -> "ScalarField":
        """|grad u| as a field (no gradient of its own)."""
        return ScalarField(f"|grad {self.name}|", lambda p: np.hypot(*self.gradient(p).T), domain=self.domain,
                           params=dict(self.params), valid=self.valid, harmonic=False)

    def check_domain(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.ones(len(p), dtype=bool) if self.valid is None else self.valid(p)

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "domain": self.domain, "params": self.params}


def zero_field() -> ScalarField:
    return constant_field(0.0)


def constant_field(c: float) -> ScalarField:
    return ScalarField("constant", lambda p: np.full(len(p), float(c)), lambda p: np.zeros((len(p), 2)),
                       params={"c": float(c)})


def _complex(p: np.ndarray, center) -> np.ndarray:
    c = np.asarray(center, dtype=float).reshape(2)
    return (p[:, 0] - c[0]) + 1j * (p[:, 1] - c[1])


def catalog_field(name: str, params: Optional[Dict[str, Any]] = None) -> ScalarField:
    """Closed-form harmonic fields.

    coordinate (axis=1): u = y.  re_power / im_power (k, center): Re or
    Im of (z - center)^k.  poisson_interval (a, b): Poisson extension of
    1_[a, b] to the upper half-plane, written with arctan2 so the only
    singular set is the segment itself.  log_potential (center): log|z - c|.
    constant (c).
    """
    params = dict(params or {})
    if name == "coordinate":
        axis = int(params.get("axis", 1))
        if axis not in (0, 1):
            raise InputError("coordinate axis must be 0 or 1", axis=axis)
        e = np.eye(2)[axis]
        return ScalarField(name, lambda p: p[:, axis].copy(), lambda p: np.tile(e, (len(p), 1)), params={"axis": axis})
    if name in ("re_power", "im_power"):
        k = int(params.get("k", 2))
        if k < 0:
            raise InputError("power fields need k >= 0", k=k)
        center = params.get("center", (0.0, 0.0))
        real = name == "re_power"

        def value(p):
            w = _complex(p, center) ** k
            return w.real if real else w.imag

        def grad(p):
            d = k * _complex(p, center) ** (k - 1) if k > 0 else np.zeros(len(p), dtype=complex)
            # Cauchy-Riemann: grad Re f = (Re f', -Im f'), grad Im f = (Im f', Re f')
            return np.column_stack([d.real, -d.imag]) if real else np.column_stack([d.imag, d.real])

        return ScalarField(name, value, grad, params={"k": k, "center": list(center)})
    if name == "poisson_interval":
        a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
        if not a < b:
            raise InputError("poisson_interval needs a < b", a=a, b=b)

        def value(p):
            x, y = p[:, 0], p[:, 1]
            return (np.arctan2(y, x - b) - np.arctan2(y, x - a)) / np.pi

        def grad(p):
            x, y = p[:, 0], p[:, 1]
            ra, rb = (x - a) ** 2 + y ** 2, (x - b) ** 2 + y ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                gx = (-y / rb + y / ra) / np.pi
                gy = ((x - b) / rb - (x - a) / ra) / np.pi
            return np.column_stack([gx, gy])

        def valid(p):
            return ~((np.abs(p[:, 1]) <= 1e-15) & (p[:, 0] >= a) & (p[:, 0] <= b))

        return ScalarField(name, value, grad, domain="upper half-plane", params={"a": a, "b": b}, valid=valid)
    if name == "log_potential":
        center = np.asarray(params.get("center", (0.0, -1.0)), dtype=float).reshape(2)

        def value(p):
            with np.errstate(divide="ignore"):
                return np.log(np.hypot(*(p - center).T))

        def grad(p):
            d = p - center
            with np.errstate(divide="ignore", invalid="ignore"):
                return d / np.sum(d ** 2, axis=1)[:, None]

        return ScalarField(name, value, grad, domain="plane minus center", params={"center": center.tolist()},
                           valid=lambda p: np.hypot(*(p - center).T) > 0)
    if name == "constant":
        return constant_field(float(params.get("c", 1.0)))
    raise InputError(f"unknown field '{name}'", known=list(CATALOG))


def harmonic_residual(u: ScalarField, points: np.ndarray, h: float = RESIDUAL_STEP) -> np.ndarray:
    """|5-point Laplacian| of u at each point."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    lap = u(p + ex) + u(p - ex) + u(p + ey) + u(p - ey) - 4.0 * u(p)
    return np.abs(lap) / h ** 2


# ----------------------------------------------------------------------
# quadrature nodes
# ----------------------------------------------------------------------
def box_nodes(lo, hi, per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor midpoint nodes and weights on the box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = max(1, int(per_axis))
    sx = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(lo[0] + sx * (hi[0] - lo[0]), lo[1] + sx * (hi[1] - lo[1]), indexing="ij")
    w = np.prod(hi - lo) / n ** 2
    return np.column_stack([gx.ravel(), gy.ravel()]), np.full(n * n, w)


def box_corners(lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [lo[0], hi[1]], [hi[0], hi[1]]])


def disk_nodes(center, radius: float, n_r: int = 24, n_theta: int = 48) -> Tuple[np.ndarray, np.ndarray]:
    """Polar midpoint nodes and weights on the disk B(center, radius)."""
    c = np.asarray(center, dtype=float).reshape(2)
    dr = radius / n_r
    dt = 2.0 * np.pi / n_theta
    r = (np.arange(n_r) + 0.5) * dr
    t = (np.arange(n_theta) + 0.5) * dt
    R, T = np.meshgrid(r, t, indexing="ij")
    pts = c + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    return pts, (R * dr * dt).ravel()


# ----------------------------------------------------------------------
# interior estimates
# ----------------------------------------------------------------------
def _ratio(num: float, den: float) -> float:
    if den <= 0:
        return 0.0 if num <= 0 else np.inf
    return float(num / den)


def check_interior(u: ScalarField, lo, hi, which: str, p: float = 4.0, per_axis: int = 32,
                   set_: Optional[AmbientSet] = None) -> float:
    """Smallest constant making the chosen interior display hold on the nodes of I = [lo, hi].

    moser:          sup_I |u - c| <= C (l^-2 int_2I |u - c|^2)^(1/2)
    reverse_holder: (l^-2 int_I |grad u|^p)^(1/p) <= C (l^-2 int_2I |grad u|^2)^(1/2)
    caccioppoli:    int_I |grad u|^2 <= C l^-2 int_2I |u - c|^2
    oscillation:    sup_{X,Y in I} |u(X) - u(Y)| <= C (int_2I |grad u|^2)^(1/2)

    with c the average of u over I.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    side = float(np.max(hi - lo))
    if side <= 0:
        raise InputError("interior checks need a box with positive side")
    center = 0.5 * (lo + hi)
    lo2, hi2 = center - (hi - lo), center + (hi - lo)
    if set_ is not None and float(set_.box_distance(lo2[None], hi2[None])[0]) <= 1e-12 * side:
        raise InputError("the doubled box meets E", lo=lo.tolist(), hi=hi.tolist())
    nodes, w = box_nodes(lo, hi, per_axis)
    nodes2, w2 = box_nodes(lo2, hi2, 2 * per_axis)
    if not (np.all(u.check_domain(nodes2)) and np.all(u.check_domain(box_corners(lo2, hi2)))):
        raise InputError(f"the doubled box leaves the domain of '{u.name}'")
    norm = side ** -2

    if which in ("moser", "caccioppoli"):
        vals = u(nodes)
        c = float(np.sum(vals * w) / np.sum(w))
        l2 = norm * float(np.sum((u(nodes2) - c) ** 2 * w2))
        if which == "moser":
            sup = float(np.max(np.abs(np.concatenate([vals, u(box_corners(lo, hi))]) - c)))
            return _ratio(sup, np.sqrt(l2))
        g2 = float(np.sum(np.sum(u.gradient(nodes) ** 2, axis=1) * w))
        return _ratio(g2, l2)
    if which == "reverse_holder":
        if p <= 0:
            raise InputError("reverse Hoelder exponent must be positive", p=p)
        g = np.hypot(*u.gradient(nodes).T)
        lhs = (norm * float(np.sum(g ** p * w))) ** (1.0 / p)
        rhs = np.sqrt(norm * float(np.sum(np.sum(u.gradient(nodes2) ** 2, axis=1) * w2)))
        return _ratio(lhs, rhs)
    if which == "oscillation":
        vals = np.concatenate([u(nodes), u(box_corners(lo, hi))])
        rhs = np.sqrt(float(np.sum(np.sum(u.gradient(nodes2) ** 2, axis=1) * w2)))
        return _ratio(float(vals.max() - vals.min()), rhs)
    raise InputError(f"unknown interior check '{which}'",
                     known=["moser", "reverse_holder", "caccioppoli", "oscillation"])


def check_local_caccioppoli(G: ScalarField, H: ScalarField, set_: AmbientSet, X,
                            n_r: int = 24, n_theta: int = 48) -> float:
    """(delta^-1 int_{B(X, delta/2)} |G|^2 delta)^(1/2) / sup_{B(X, 3 delta/4)} |H|."""
    X = np.asarray(X, dtype=float).reshape(2)
    delta = float(set_.distance(X[None])[0])
    if delta <= 0:
        raise InputError("local Caccioppoli probe needs a point off E", point=X.tolist())
    pts, w = disk_nodes(X, 0.5 * delta, n_r, n_theta)
    num = np.sqrt(float(np.sum(G(pts) ** 2 * set_.distance(pts) * w)) / delta)
    big, _ = disk_nodes(X, 0.75 * delta, n_r, n_theta)
    den = float(np.max(np.abs(H(np.vstack([big, X[None]])))))
    return _ratio(num, den)
