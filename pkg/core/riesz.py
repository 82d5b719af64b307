"""Smoothly truncated Riesz transform on boundary samples.

For n = 1 the kernel is (1/pi) z / |z|^2 (the Hilbert-transform
normalization) and the truncation multiplies it by Phi(|z| / eps), where
Phi is 0 on [0, 1], 1 on [2, inf) and the quintic smoothstep in between.
T_eps acts on L^2(sigma) through the sample weights; its norm is estimated
by power iteration of T* T on a seeded Gaussian ensemble plus any
user-supplied density.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator
from scipy.spatial import cKDTree

from core.ambient import AmbientSet, CurveSet, FourCornersSet
from core.dyadic_grid import BoundarySamples
from core.errors import InputError

log = logging.getLogger(__name__)

BLOCK = 1024
DENSE_LIMIT = 2 ** 24


def smoothstep_cutoff(t: np.ndarray) -> np.ndarray:
    """Phi(t): 0 for t <= 1, 1 for t >= 2, 6s^5 - 15s^4 + 10s^3 with s = t - 1 in between."""
    s = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def riesz_kernel(z: np.ndarray) -> np.ndarray:
    """(1/pi) z / |z|^2, zero at z = 0."""
    r2 = np.sum(z ** 2, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(r2 > 0, z / r2, 0.0)
    return k / np.pi


def probe_samples(set_: AmbientSet, spacing: float) -> BoundarySamples:
    """Quadrature nodes on E: arclength midpoints for curves, square centers for four-corners sets."""
    if spacing <= 0:
        raise InputError("sample spacing must be positive", spacing=spacing)
    if isinstance(set_, CurveSet):
        lo, hi = set_.sampling_window()
        pts, w = set_.quadrature(lo, hi, spacing)
    elif isinstance(set_, FourCornersSet):
        pts = set_.squares + 0.5 * set_.side_length
        w = np.full(len(pts), 4.0 ** (-set_.level))
    else:
        raise InputError(f"no boundary quadrature for '{set_.kind}' sets")
    return BoundarySamples(np.asarray(pts, dtype=float), np.asarray(w, dtype=float), [])


def sample_spacing(samples: BoundarySamples) -> float:
    """Largest nearest-neighbour distance among the nodes."""
    if len(samples) < 2:
        return np.inf
    d, _ = cKDTree(samples.points).query(samples.points, k=2)
    return float(d[:, 1].max())


def truncated_transform(points: np.ndarray, samples: BoundarySamples, f: np.ndarray, eps: float) -> np.ndarray:
    """T_eps f at arbitrary points, one (x, y) vector per point."""
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    g = np.asarray(f, dtype=float) * samples.weights
    out = np.zeros((len(x), 2))
    for i in range(0, len(x), BLOCK):
        z = x[i:i + BLOCK, None, :] - samples.points[None, :, :]
        phi = smoothstep_cutoff(np.hypot(z[..., 0], z[..., 1]) / eps)
        out[i:i + BLOCK] = np.einsum("ijc,ij,j->ic", riesz_kernel(z), phi, g)
    return out


def _kernel_rows(samples: BoundarySamples, eps: float, start: int, stop: int) -> np.ndarray:
    """Rows [start, stop) of B = W^(1/2) T_eps W^(-1/2), shape (rows, m, 2)."""
    pts = samples.points
    sw = np.sqrt(samples.weights)
    z = pts[start:stop, None, :] - pts[None, :, :]
    phi = smoothstep_cutoff(np.hypot(z[..., 0], z[..., 1]) / eps)
    return riesz_kernel(z) * (phi * sw[start:stop, None] * sw[None, :])[..., None]


def _operator(samples: BoundarySamples, eps: float) -> LinearOperator:
    """B stacked over both components as a (2m x m) operator; dense when it fits in DENSE_LIMIT entries."""
    m = len(samples)
    if 2 * m * m <= DENSE_LIMIT:
        k = _kernel_rows(samples, eps, 0, m)
        return aslinearoperator(np.concatenate([k[..., 0], k[..., 1]], axis=0))

    def matmat(V):
        V = np.asarray(V, dtype=float).reshape(m, -1)
        out = np.zeros((2, m, V.shape[1]))
        for i in range(0, m, BLOCK):
            k = _kernel_rows(samples, eps, i, i + BLOCK)
            out[:, i:i + BLOCK] = np.einsum("ijc,js->cis", k, V)
        return out.reshape(2 * m, -1)

    def rmatmat(V):
        V = np.asarray(V, dtype=float).reshape(2, m, -1)
        out = np.zeros((m, V.shape[2]))
        for i in range(0, m, BLOCK):
            k = _kernel_rows(samples, eps, i, i + BLOCK)
            out += np.einsum("ijc,cis->js", k, V[:, i:i + BLOCK])
        return out

    return LinearOperator((2 * m, m), matvec=lambda v: matmat(v).ravel(), rmatvec=lambda v: rmatmat(v).ravel(),
                          matmat=matmat, rmatmat=rmatmat, dtype=float)


def _power_norms(B: LinearOperator, starts: np.ndarray, iterations: int) -> np.ndarray:
    """Best ||B v|| / ||v|| along power iteration of B*B, one column per start."""
    V = np.asarray(starts, dtype=float)
    norms = np.linalg.norm(V, axis=0)
    live = norms > 0
    V = np.where(live, V / np.where(live, norms, 1.0), 0.0)
    best = np.linalg.norm(B.matmat(V), axis=0)
    for _ in range(iterations):
        W = B.rmatmat(B.matmat(V))
        nw = np.linalg.norm(W, axis=0)
        ok = nw > 0
        V = np.where(ok, W / np.where(ok, nw, 1.0), V)
        best = np.maximum(best, np.linalg.norm(B.matmat(V), axis=0))
    return np.where(live, best, 0.0)


@dataclass
class RieszReport:
    eps: List[float]
    norms: List[float]
    spacing: float
    samples: int
    supplied: List[float] = field(default_factory=list)

    @property
    def sup(self) -> float:
        return max(self.norms, default=0.0)

    @property
    def witness_eps(self) -> Optional[float]:
        return self.eps[int(np.argmax(self.norms))] if self.norms else None

    def to_dict(self) -> Dict[str, Any]:
        return {"eps": self.eps, "norms": self.norms, "supplied": self.supplied, "sup": self.sup,
                "witness_eps": self.witness_eps, "spacing": self.spacing, "samples": self.samples}


def riesz_probe(set_: AmbientSet, samples: BoundarySamples, eps_list: Sequence[float],
                f: Optional[np.ndarray] = None, ensemble: int = 16, iterations: int = 30,
                seed: int = 0) -> RieszReport:
    """Lower estimates of ||T_eps||_{L^2(sigma) -> L^2(sigma)} for each eps.

    Each estimate is the largest ||B v|| / ||v|| reached by power iteration
    from the ensemble starts.  ``supplied`` holds the Rayleigh quotient of
    ``f`` itself.
    """
    if len(samples) == 0:
        raise InputError("Riesz probe needs boundary samples")
    spacing = sample_spacing(samples)
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InputError("Riesz probe needs at least one truncation radius")
    if min(eps_list) < spacing:
        raise InputError(f"truncation radius {min(eps_list):g} is below the sample spacing {spacing:g}",
                         spacing=spacing)
    rng = np.random.default_rng(seed)
    starts = [rng.standard_normal(len(samples)) for _ in range(ensemble)]
    sw = np.sqrt(samples.weights)
    supplied_start = None if f is None else np.asarray(f, dtype=float) * sw
    if supplied_start is not None:
        starts.append(supplied_start)
    norms, supplied = [], []
    for eps in eps_list:
        B = _operator(samples, eps)
        norms.append(float(_power_norms(B, np.column_stack(starts), iterations).max()))
        if supplied_start is not None:
            n0 = np.linalg.norm(supplied_start)
            supplied.append(float(np.linalg.norm(B.matvec(supplied_start)) / n0) if n0 > 0 else 0.0)
        log.debug("riesz eps %.4g: norm estimate %.4f", eps, norms[-1])
    report = RieszReport(eps_list, norms, spacing, len(samples), supplied)
    log.info("riesz probe on %s: %d samples, sup norm %.4f at eps %s", set_.kind, len(samples), report.sup,
             report.witness_eps)
    return report
