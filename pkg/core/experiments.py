"""Ratio experiments: N < S, CME transference, corona sums and KP restriction.

The comparison constants are only known to exist, so every experiment reports a measured
ratio and leaves pass/fail to finiteness and :func:`stability` under one
depth refinement.
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.ambient import AmbientSet
from core.big_pieces import big_pieces_subdomain
from core.corona import CoronaDecomposition
from core.cube_data import CubeDataTable, cube_data
from core.dyadic_grid import BoundarySamples, CubeId, DyadicGrid, dyadic_maximal
from core.errors import FieldEvaluationError, GeometryError, InputError
from core.estimators import (COMPARISON_RTOL, POLAR_ANGLES, POLAR_RADII, ball_family, cme, cme0, domain_family,
                             interior_samples, local_profile, safe_ratio, trad_functionals)
from core.fields import ScalarField
from core.regions import ComplementDomain, Region
from core.stopping import dyadic_alphas
from core.structures import WhitneyDyadicStructure, discrete_sawtooth, regime_domains, side_mask

log = logging.getLogger(__name__)

KP_BALL_CONSTANT = np.pi


def stability(coarse: float, fine: float, band: float) -> Dict[str, Any]:
    """Relative change of a measured value under one depth refinement."""
    if not (np.isfinite(coarse) and np.isfinite(fine)):
        return {"coarse": coarse, "fine": fine, "change": float("inf"), "band": band, "stable": False}
    scale = max(abs(coarse), abs(fine))
    change = abs(fine - coarse) / scale if scale > 0 else 0.0
    return {"coarse": coarse, "fine": fine, "change": change, "band": band, "stable": bool(change <= band)}


def central_cube(grid: DyadicGrid) -> CubeId:
    """Q0 = E for bounded sets, else the root nearest the middle of the roots."""
    if grid.top_cube is not None:
        return grid.top_cube
    roots = grid.roots
    if not roots:
        raise InputError("grid has no cubes")
    centers = np.array([grid[r].center for r in roots])
    return roots[int(np.argmin(np.hypot(*(centers - centers.mean(axis=0)).T)))]


# ----------------------------------------------------------------------
# N < S
# ----------------------------------------------------------------------
def _shifted(u: ScalarField, c: float) -> ScalarField:
    return ScalarField(f"{u.name} - {c:.6g}", lambda p: u.values(p) - c, u.gradient_evaluator, domain=u.domain,
                       params=dict(u.params, shift=c), valid=u.valid, harmonic=u.harmonic)


def n_less_s_local(S: WhitneyDyadicStructure, u: ScalarField, q0: Optional[CubeId] = None, q: float = 4.0,
                   all_q: bool = False, eps: float = 0.5, gamma: float = 0.125, gated: bool = True,
                   quadrature_level: int = 2, map_fn: Optional[Callable] = None) -> Dict[str, Any]:
    """||N^Q0_*(u - u(X+_Q0))||_q / ||S^^Q0 u||_q on Q0, plus the gated good-lambda ratio.

    q must exceed 2 unless ``all_q`` selects the regime where every q > 0
    is admissible.  The gate is M^D_{Q0,2}(S^^Q0 u) <= gamma alpha.
    """
    if q <= 0 or (q <= 2 and not all_q):
        raise InputError("N < S needs q > 2 (or all_q for any q > 0)", q=q)
    q0 = central_cube(S.grid) if q0 is None else q0
    X = S.corkscrew_point(q0)
    u0 = float(u.values(X[None])[0])
    table = cube_data(S, u.gradient_norm(), _shifted(u, u0), quadrature_level, map_fn)
    prof = local_profile(table, q0, fat_area=True, fat_sup=False)
    num, den = prof.norm(prof.ntmax, q), prof.norm(prof.area, q)
    out: Dict[str, Any] = {
        "cube": list(q0), "q": q, "corkscrew": X.tolist(), "u_corkscrew": u0,
        "numerator": num, "denominator": den, "ratio": safe_ratio(num, den),
        "violation": bool(den <= 0 < num), "leaves": len(prof.leaves),
    }
    if gated:
        samples = BoundarySamples(np.array([S.grid[c].center for c in prof.leaves]), prof.sigma, prof.leaves)
        M = dyadic_maximal(S.grid, samples, prof.area, q0, p=2.0)
        worst = 0.0
        for al in dyadic_alphas(prof.ntmax):
            rhs = prof.level_measure(prof.ntmax, al)
            lhs = float(prof.sigma[(prof.ntmax > (1 + eps) * al) & (M <= gamma * al)].sum())
            if rhs > 0:
                worst = max(worst, lhs / rhs)
        out.update({"eps": eps, "gamma": gamma, "good_lambda_ratio": worst})
    log.info("N<S on %s (q=%g): ratio %.4g", q0, q, out["ratio"])
    return out


def n_less_s_global(u: ScalarField, set_: AmbientSet, kappa: float, r: float, samples: np.ndarray,
                    q: float = 4.0, weights: Optional[np.ndarray] = None, domain=None,
                    n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES) -> Dict[str, Any]:
    """||N^r_kappa u||_q / ||S^r_kappa u||_q over boundary samples, with no constant subtracted."""
    if q <= 0:
        raise InputError("norm exponent must be positive", q=q)
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(X) == 0:
        raise InputError("N < S needs boundary samples")
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    rows = [trad_functionals(u, set_, x, kappa, r, domain=domain, n_r=n_r, n_theta=n_theta) for x in X]
    s = np.array([a.value for a, _, _ in rows])
    n = np.array([c.value for _, _, c in rows])
    num = float(np.sum(w * n ** q)) ** (1.0 / q)
    den = float(np.sum(w * s ** q)) ** (1.0 / q)
    return {"kappa": kappa, "r": r, "q": q, "numerator": num, "denominator": den,
            "ratio": safe_ratio(num, den), "violation": bool(den <= 0 < num), "samples": len(X)}


# ----------------------------------------------------------------------
# transference
# ----------------------------------------------------------------------
def _catalog_cubes(S: WhitneyDyadicStructure, depth: int) -> List[CubeId]:
    k = min(S.grid.k_min + depth, S.grid.k_max - 1)
    return sorted(S.grid.generation(k))


def lipschitz_catalog(S: WhitneyDyadicStructure, cubes: Optional[Sequence[CubeId]] = None,
                      depth: int = 2) -> List[Tuple[str, Any]]:
    """Big-pieces subdomains and one-layer sawtooths Omega_{children(Q), Q} over the chosen cubes."""
    cubes = _catalog_cubes(S, depth) if cubes is None else list(cubes)
    keep_side = side_mask(S.W, "plus") if S.set.has_sides() else None
    out = []
    for qid in cubes:
        regime = S.corona.regime_of(qid) if S.corona is not None else None
        try:
            piece = big_pieces_subdomain(S.grid, qid, regime=regime, theta_floor=S.params.theta_floor)
            out.append((f"big_pieces{qid}", piece.domain))
        except (GeometryError, InputError) as e:
            log.debug("no big piece on %s: %s", qid, e)
        kids = S.grid[qid].children
        if not kids:
            continue
        family = discrete_sawtooth(S, kids, qid)
        idx = np.concatenate([S.W_Q(c) for c in family]) if family else np.zeros(0, np.int64)
        if keep_side is not None:
            idx = idx[keep_side[idx]]
        if len(idx):
            out.append((f"sawtooth{qid}", Region.from_whitney(S.W, idx, S.tau, label=f"sawtooth{qid}")))
    return out


def _subdomain_cme(F: ScalarField, set_: AmbientSet, domain, levels: int, centers: int,
                   n_r: int, n_theta: int, map_fn) -> float:
    family = domain_family(domain, levels=levels, centers=centers)
    return cme(F, set_, family, domain, n_r, n_theta, map_fn).value


def transfer_cme(F: ScalarField, S: WhitneyDyadicStructure, mode: str,
                 catalog: Optional[List[Tuple[str, Any]]] = None, mask=None, levels: int = 4, centers: int = 9,
                 samples: int = 64, n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES,
                 map_fn: Optional[Callable] = None) -> Dict[str, Any]:
    """Global CME against the sup of per-subdomain CMEs.

    ``cad`` compares CME(D) over the plus component with the Lipschitz
    catalog; ``ur`` compares CME over the complement with
    max{CME_0, sup_S CME(Omega_S^+-)} over the corona regimes.  ``mask``
    replaces D with an open subset of the complement.
    """
    if mode not in ("cad", "ur"):
        raise InputError("transference mode must be 'cad' or 'ur'", mode=mode)
    set_ = S.set
    if mask is not None:
        D = mask
        lhs = _subdomain_cme(F, set_, D, levels, centers, n_r, n_theta, map_fn)
    else:
        D = ComplementDomain(set_, "plus" if mode == "cad" else "any")
        lhs = cme(F, set_, ball_family(set_, levels, centers), D, n_r, n_theta, map_fn).value

    entries: List[Dict[str, Any]] = []
    zero = None
    if mode == "cad":
        catalog = lipschitz_catalog(S) if catalog is None else catalog
    else:
        if S.mode != "ur" or S.corona is None:
            raise InputError("ur transference needs a ur-mode structure with a corona", mode=S.mode)
        if catalog is None:
            catalog = []
            for reg in S.corona.regimes:
                plus, minus = regime_domains(S, reg)
                catalog += [(r.label, r) for r in (plus, minus) if not r.is_empty()]
        X = interior_samples(ComplementDomain(set_), S.W.window.lo, S.W.window.hi, samples)
        zero = cme0(F, set_, X, ComplementDomain(set_), n_r, n_theta, map_fn).value if len(X) else 0.0
    if not catalog:
        raise InputError("transference needs a nonempty subdomain catalog", mode=mode)
    for label, dom in catalog:
        entries.append({"label": label, "cme": _subdomain_cme(F, set_, dom, levels, centers, n_r, n_theta, map_fn)})
    sup = max(e["cme"] for e in entries)
    rhs = sup if zero is None else max(zero, sup)
    out = {"mode": mode, "lhs": lhs, "rhs": rhs, "sup_catalog": sup, "cme0": zero,
           "ratio": safe_ratio(lhs, rhs), "catalog": entries, "masked": mask is not None}
    log.info("%s transference: CME %.4g against %.4g over %d subdomains (ratio %.4g)",
             mode, lhs, rhs, len(entries), out["ratio"])
    return out


# ----------------------------------------------------------------------
# corona sums
# ----------------------------------------------------------------------
def corona_cme_sum(table: CubeDataTable, corona: CoronaDecomposition, cme0_value: float = 0.0) -> Dict[str, Any]:
    """Split sum_Q sigma(Q) beta_Q into bad cubes (Sigma_1) and regimes (Sigma_2)."""
    if table.grid is not corona.grid:
        raise InputError("table and corona are built on different grids")
    weight = {q: table.sigma(q) * table.beta[i] for i, q in enumerate(table.cube_ids)}
    sigma1 = float(sum(weight[q] for q in corona.bad if q in weight))
    bad_mass = float(sum(table.sigma(q) for q in corona.bad if q in weight))
    regimes = []
    for reg in corona.regimes:
        s = float(sum(weight[q] for q in reg.cubes if q in weight))
        top = table.sigma(reg.top)
        regimes.append({"index": reg.index, "top": list(reg.top), "sum": s, "normalized": safe_ratio(s, top)})
    sigma2 = float(sum(r["sum"] for r in regimes))
    packing = float(sum(corona.packing_sum(r) for r in table.grid.roots))
    bound_value = max([cme0_value] + [r["normalized"] for r in regimes])
    total = sigma1 + sigma2
    return {
        "sigma1": sigma1,
        "sigma2": sigma2,
        "total": total,
        "bad_mass": bad_mass,
        "packing": packing,
        "regimes": regimes,
        "bound_value": bound_value,
        "packed_constant": safe_ratio(total, bound_value * packing),
        "sigma1_constant": safe_ratio(sigma1, cme0_value * bad_mass),
    }


# ----------------------------------------------------------------------
# KP restriction
# ----------------------------------------------------------------------
def kp_restriction_check(grad_field: ScalarField, set_: AmbientSet, D, samples: np.ndarray,
                         levels: int = 4, centers: int = 9, n_r: int = POLAR_RADII, n_theta: int = POLAR_ANGLES,
                         map_fn: Optional[Callable] = None) -> Dict[str, Any]:
    """CME(D) of |grad A| against C (CME over the complement of E + ||grad A dist(., E)||_inf^2).

    C = max(3^n, pi).  Each ball of the D family whose center lies within
    2r of E adds the ball B(x^, 3r) around its nearest point x^ on E to the
    complement family.
    """
    X = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(X) == 0:
        raise InputError("KP check needs interior samples")
    try:
        weighted = np.abs(grad_field.values(X)) * set_.distance(X)
    except FieldEvaluationError as e:
        raise InputError(f"|grad A| dist(., E) is unbounded on the samples: {e}") from None
    if not np.all(np.isfinite(weighted)):
        raise InputError("|grad A| dist(., E) is unbounded on the samples")
    term2 = float(weighted.max()) ** 2

    d_family = domain_family(D, levels=levels, centers=centers)
    lhs = cme(grad_field, set_, d_family, D, n_r, n_theta, map_fn).value
    near = set_.distance(d_family[:, :2]) <= 2.0 * d_family[:, 2]
    extra = np.column_stack([set_.nearest(d_family[near, :2]), 3.0 * d_family[near, 2]])
    e_family = np.vstack([ball_family(set_, levels, centers), extra])
    term1 = cme(grad_field, set_, e_family, ComplementDomain(set_), n_r, n_theta, map_fn).value
    C = max(3.0 ** set_.n, KP_BALL_CONSTANT)
    rhs = C * (term1 + term2)
    return {"cme_D": lhs, "cme_complement": term1, "sup_term": term2, "C": C, "rhs": rhs,
            "slack": rhs - lhs, "holds": bool(lhs <= rhs * (1 + COMPARISON_RTOL))}
