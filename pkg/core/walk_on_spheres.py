"""Walk-on-spheres Dirichlet solver for the Laplacian.

Each walker jumps to a uniform point on the largest circle around it that
stays in the domain, until it is within the eps-shell of the boundary;
the boundary datum at the nearest boundary point is its sample.  All
walkers of one query advance together.  Random numbers come from a Philox
substream keyed by the query point, so estimates do not depend on query
order or worker count.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from core.errors import InputError
from core.fields import CATALOG, ScalarField, catalog_field

log = logging.getLogger(__name__)

STEP_CAP = 10_000
EPS_SCALE = 1e-4
GRADIENT_FRACTION = 1.0 / 64.0


@dataclass
class WosEstimate:
    value: float
    stderr: float
    samples: int
    excluded: int
    mean_steps: float

    @property
    def exclusion_rate(self) -> float:
        total = self.samples + self.excluded
        return self.excluded / total if total else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples,
                "excluded": self.excluded, "exclusion_rate": self.exclusion_rate, "mean_steps": self.mean_steps}


def _domain_scale(domain) -> float:
    scale = getattr(domain, "scale", None)
    return float(scale) if scale is not None and np.isfinite(scale) and scale > 0 else 1.0


def _stream(seed: int, point: np.ndarray) -> np.random.Generator:
    key = int.from_bytes(hashlib.blake2b(np.ascontiguousarray(point, dtype=float).tobytes(), digest_size=8).digest(),
                         "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def boundary_data(name: str, params: Optional[Dict[str, Any]] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Dirichlet data g on boundary points.

    ``poisson_interval`` gives the indicator of [a, b] on the abscissa; other
    catalog names give the trace of the closed-form field.
    """
    params = dict(params or {})
    if name == "poisson_interval":
        a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
        return lambda p: ((p[:, 0] >= a) & (p[:, 0] <= b)).astype(float)
    if name in CATALOG:
        return catalog_field(name, params).values
    raise InputError(f"unknown boundary data '{name}'", known=list(CATALOG))


class WosSolver:
    """Monte Carlo harmonic extension of boundary data g into a domain.

    ``domain`` is anything exposing ``contains``, ``boundary_distance`` and
    ``nearest_boundary`` (regions, polygon, disk and complement domains).
    """

    def __init__(self, domain, g: Callable[[np.ndarray], np.ndarray], budget: int = 10_000,
                 eps: Optional[float] = None, step_cap: int = STEP_CAP, seed: int = 0):
        if budget < 1 or step_cap < 1:
            raise InputError("walk-on-spheres needs budget >= 1 and step_cap >= 1", budget=budget, step_cap=step_cap)
        self.domain = domain
        self.g = g
        self.budget = int(budget)
        self.eps = EPS_SCALE * _domain_scale(domain) if eps is None else float(eps)
        if self.eps <= 0:
            raise InputError("eps-shell must be positive", eps=self.eps)
        self.step_cap = int(step_cap)
        self.seed = int(seed)

    def estimate(self, X, budget: Optional[int] = None) -> WosEstimate:
        X = np.asarray(X, dtype=float).reshape(2)
        if not bool(self.domain.contains(X[None])[0]):
            raise InputError("walk-on-spheres query must lie inside the domain", point=X.tolist())
        n = self.budget if budget is None else int(budget)
        rng = _stream(self.seed, X)
        pos = np.tile(X, (n, 1))
        active = np.ones(n, dtype=bool)
        samples = np.full(n, np.nan)
        steps = np.zeros(n, dtype=np.int64)
        for _ in range(self.step_cap):
            idx = np.flatnonzero(active)
            if len(idx) == 0:
                break
            d = self.domain.boundary_distance(pos[idx])
            hit = d <= self.eps
            if np.any(hit):
                done = idx[hit]
                samples[done] = self.g(self.domain.nearest_boundary(pos[done]))
                active[done] = False
            move = idx[~hit]
            angle = rng.uniform(0.0, 2.0 * np.pi, len(move))
            pos[move] += d[~hit][:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
            steps[move] += 1
        ok = ~active
        excluded = int(active.sum())
        if excluded:
            log.debug("wos at %s: %d of %d walks hit the step cap", X.tolist(), excluded, n)
        vals = samples[ok]
        if len(vals) == 0:
            return WosEstimate(np.nan, np.inf, 0, excluded, float(steps.mean()))
        if np.ptp(vals) == 0:
            value, err = float(vals[0]), 0.0
        else:
            value, err = float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        return WosEstimate(value, err, int(len(vals)), excluded, float(steps[ok].mean()))

    def evaluate(self, points: np.ndarray, map_fn: Optional[Callable] = None) -> List[WosEstimate]:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        map_fn = map_fn or (lambda fn, items: [fn(it) for it in items])
        return map_fn(self.estimate, list(pts))


def wos_evaluate(domain, g: Callable[[np.ndarray], np.ndarray], X, budget: int,
                 eps: Optional[float] = None, step_cap: int = STEP_CAP, seed: int = 0) -> WosEstimate:
    return WosSolver(domain, g, budget=budget, eps=eps, step_cap=step_cap, seed=seed).estimate(X)


def wos_field(solver: WosSolver, map_fn: Optional[Callable] = None) -> ScalarField:
    """Solver-backed field; the gradient is a central difference with h = delta(X)/64."""

    def value(p: np.ndarray) -> np.ndarray:
        return np.array([e.value for e in solver.evaluate(p, map_fn)])

    def grad(p: np.ndarray) -> np.ndarray:
        h = GRADIENT_FRACTION * solver.domain.boundary_distance(p)
        out = np.zeros((len(p), 2))
        for axis in range(2):
            step = np.zeros((len(p), 2))
            step[:, axis] = h
            out[:, axis] = (value(p + step) - value(p - step)) / (2.0 * h)
        return out

    return ScalarField("wos", value, grad, domain=getattr(solver.domain, "label", "domain"),
                       params={"budget": solver.budget, "eps": solver.eps, "seed": solver.seed},
                       valid=lambda p: solver.domain.contains(p))
