"""Stopping-time analysis on the dyadic tree.

Level-set families of maximal cubes, the John-Nirenberg certificate for
dyadic area functions, good-lambda scans between A G and N^ H, and the
per-cube L^q comparisons of A^Q G with N^^Q H.  Everything reads
:class:`CubeDataTable` columns and works on the finest cubes of D_Q, where
the overlap-counted A^Q is constant.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn

from core.cube_data import CubeDataTable
from core.dyadic_grid import CubeId, DyadicGrid
from core.errors import GeometryError, HypothesisUnsatisfiable, InputError
from core.estimators import (COMPARISON_RTOL, LocalProfile, area_geometric, dyadic_carleson_ratios,
                             local_profile, safe_ratio)

log = logging.getLogger(__name__)

DEFAULT_N_CAP = 2.0 ** 20


# ----------------------------------------------------------------------
# maximal cubes
# ----------------------------------------------------------------------
@dataclass
class LevelSetFamily:
    """Maximal disjoint cubes of D_Q0 satisfying a stopping property."""

    alpha: float
    cubes: List[CubeId]
    covered: float
    q0: CubeId
    mode: str
    beta: Optional[float] = None

    def __len__(self) -> int:
        return len(self.cubes)

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "beta": self.beta, "mode": self.mode, "q0": list(self.q0),
                "cubes": [list(c) for c in self.cubes], "covered": self.covered}


def _leaves(grid: DyadicGrid, q0: CubeId) -> List[CubeId]:
    return sorted(c.id for c in grid.descendants(q0) if not c.children)


def _bottom_up(grid: DyadicGrid, q0: CubeId, leaf_values: Dict[CubeId, float],
               reduce: Callable[[List[float]], float]) -> Dict[CubeId, float]:
    out = dict(leaf_values)
    for c in sorted((c.id for c in grid.descendants(q0) if c.children), key=lambda q: -q[0]):
        out[c] = reduce([out[k] for k in grid[c].children])
    return out


def maximal_cubes(grid: DyadicGrid, q0: CubeId, predicate: Optional[Callable[[CubeId], bool]] = None, *,
                  values: Optional[Dict[CubeId, float]] = None, alpha: float = 0.0,
                  beta: Optional[float] = None) -> LevelSetFamily:
    """Top-down sweep of D_Q0 emitting the first cube on each branch that satisfies the stopping property.

    Three modes:

    * ``predicate(Q)`` given: stop at Q when the predicate holds.
    * ``values`` (one number per finest cube) and ``alpha``: stop at Q when
      every finest cube of Q has value > alpha; the family then tiles
      {value > alpha} exactly.
    * ``values``, ``alpha`` and ``beta``: stop at Q when
      sigma({value > alpha} cap Q) / sigma(Q) > beta.
    """
    if q0 not in grid:
        raise InputError(f"cube {q0} is not in the grid")
    leaves = _leaves(grid, q0)
    if predicate is not None:
        mode, stop = "predicate", predicate
        marked = None
    else:
        if values is None:
            raise InputError("maximal cubes need a predicate or per-cube values")
        missing = [c for c in leaves if c not in values]
        if missing:
            raise InputError(f"values are missing on {len(missing)} finest cubes (first {missing[0]})")
        marked = {c: float(values[c]) > alpha for c in leaves}
        if beta is None:
            mode = "values"
            all_in = _bottom_up(grid, q0, {c: float(marked[c]) for c in leaves}, min)
            stop = lambda c: all_in[c] > 0.5
        else:
            if not 0 <= beta < 1:
                raise InputError("density threshold must lie in [0, 1)", beta=beta)
            mode = "density"
            mass = _bottom_up(grid, q0, {c: grid[c].measure * marked[c] for c in leaves}, sum)
            stop = lambda c: grid[c].measure > 0 and mass[c] / grid[c].measure > beta

    cubes: List[CubeId] = []
    layer = [q0]
    while layer:
        nxt = []
        for c in layer:
            if stop(c):
                cubes.append(c)
            else:
                nxt.extend(grid[c].children)
        layer = nxt
    cubes.sort()
    family = LevelSetFamily(float(alpha), cubes, float(sum(grid[c].measure for c in cubes)), q0, mode, beta)
    _check_family(grid, family, leaves, marked)
    return family


def _check_family(grid: DyadicGrid, family: LevelSetFamily, leaves: List[CubeId], marked):
    under = {}
    for c in family.cubes:
        for d in grid.descendants(c):
            if not d.children:
                if d.id in under:
                    raise GeometryError(f"stopping cubes {under[d.id]} and {c} overlap")
                under[d.id] = c
    if family.mode == "values" and marked is not None:
        covered = {c for c in leaves if c in under}
        level = {c for c in leaves if marked[c]}
        if covered != level:
            raise GeometryError("maximal cubes do not tile the level set", missing=len(level - covered),
                                extra=len(covered - level))


# ----------------------------------------------------------------------
# John-Nirenberg
# ----------------------------------------------------------------------
def _quantile(profile: LocalProfile, alpha: float) -> float:
    """Smallest leaf value v with sigma{A^Q > v} <= alpha sigma(Q)."""
    a = profile.area
    order = np.argsort(a)
    v = a[order]
    # mass strictly above v[i] once all ties at v[i] are below
    above = profile.measure - np.cumsum(profile.sigma[order])
    last_tie = np.searchsorted(v, v, side="right") - 1
    ok = above[last_tie] <= alpha * profile.measure * (1 + COMPARISON_RTOL)
    return float(v[np.argmax(ok)]) if np.any(ok) else float(v[-1])


def jn_constant(alpha: float, p: float) -> float:
    """p alpha^-1 (1 / log(1/alpha))^p Gamma(p)."""
    lam = np.log(1.0 / alpha)
    return float(p / alpha * lam ** -p * gamma_fn(p))


@dataclass
class JnCertificate:
    alpha: float
    p: float
    N: float
    N_raw: float
    witness: Optional[CubeId]
    t: List[float]
    xi: List[float]
    moment: float
    moment_witness: Optional[CubeId]
    C: float
    bound: float
    xi_ok: bool
    moment_ok: bool
    monotone: bool
    decay_rate: float
    rate_bound: float
    step_violations: int = 0
    cubes: int = 0

    @property
    def passed(self) -> bool:
        return self.xi_ok and self.moment_ok and self.monotone and self.step_violations == 0

    def xi_bound(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.N <= 0:
            return np.where(t > 0, 0.0, 1.0 / self.alpha)
        return np.exp(-np.log(1.0 / self.alpha) * t / self.N) / self.alpha

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha, "p": self.p, "N": self.N, "N_raw": self.N_raw,
            "witness": list(self.witness) if self.witness else None,
            "t": self.t, "xi": self.xi, "moment": self.moment,
            "moment_witness": list(self.moment_witness) if self.moment_witness else None,
            "C": self.C, "bound": self.bound, "xi_ok": self.xi_ok, "moment_ok": self.moment_ok,
            "monotone": self.monotone, "decay_rate": self.decay_rate, "rate_bound": self.rate_bound,
            "step_violations": self.step_violations, "cubes": self.cubes, "passed": self.passed,
        }


def _dyadic_ceiling(x: float) -> float:
    if x <= 0:
        return 0.0
    return float(2.0 ** np.ceil(np.log2(x) - 1e-12))


def _scope(table: CubeDataTable, q0: Optional[CubeId]) -> List[CubeId]:
    if q0 is None:
        return list(table.cube_ids)
    if q0 not in table.row:
        raise InputError(f"cube {q0} is not in the table")
    return [c.id for c in table.grid.descendants(q0) if c.id in table.row]


def _decay_fit(t: np.ndarray, xi: np.ndarray) -> float:
    ok = (xi > 0) & (t > 0)
    if ok.sum() < 2:
        return float("inf") if np.all(xi[t > 0] == 0) else float("nan")
    slope = np.polyfit(t[ok], np.log(xi[ok]), 1)[0]
    return float(-slope)


def jn_certify(table: CubeDataTable, q0: CubeId, alpha: float = 0.5, p: float = 2.0,
               n_cap: float = DEFAULT_N_CAP, t_points: int = 33) -> JnCertificate:
    """Certify the self-improvement of the level-set hypothesis sigma{A^Q > N} <= alpha sigma(Q) on D_Q0.

    N is the smallest power of two for which the hypothesis holds at every
    Q in D_Q0.  The certificate measures Xi(t) = sup_Q sigma{A^Q > t} / sigma(Q)
    and the p-th moments avg_Q (A^Q)^p, and checks them against
    alpha^-1 exp(-log(1/alpha) t / N) and C_{alpha,p} N^p.  It also checks
    the one-step decay sigma{A^Q > t + N} <= alpha sigma{A^Q > t} along the
    stopping families at every grid t.
    """
    if not 0 < alpha < 1:
        raise InputError("John-Nirenberg needs 0 < alpha < 1", alpha=alpha)
    if p <= 0:
        raise InputError("moment exponent must be positive", p=p)
    if t_points < 2:
        raise InputError("Xi needs at least two t samples", t_points=t_points)
    cubes = _scope(table, q0)
    profiles = [local_profile(table, c) for c in cubes]
    quantiles = np.array([_quantile(pr, alpha) for pr in profiles])
    i = int(np.argmax(quantiles))
    N_raw = float(quantiles[i])
    N = _dyadic_ceiling(N_raw)
    if N > n_cap:
        raise HypothesisUnsatisfiable(f"level-set hypothesis needs N = {N:g}, above the cap {n_cap:g}",
                                      alpha=alpha, N=N, cap=n_cap, cube=cubes[i])

    top = max(float(pr.area.max(initial=0.0)) for pr in profiles)
    t = np.linspace(0.0, max(top, N, 1e-300), t_points)
    xi = np.zeros(t_points)
    moments = np.zeros(len(profiles))
    step_violations = 0
    for j, pr in enumerate(profiles):
        m = pr.measure
        if m <= 0:
            continue
        frac = np.array([pr.level_measure(pr.area, s) / m for s in t])
        xi = np.maximum(xi, frac)
        moments[j] = pr.average(pr.area, p)
        if N > 0:
            shifted = np.array([pr.level_measure(pr.area, s + N) / m for s in t])
            step_violations += int(np.sum(shifted > alpha * frac * (1 + COMPARISON_RTOL) + 1e-15))
    k = int(np.argmax(moments))
    C = jn_constant(alpha, p)
    bound = C * N ** p
    cert = JnCertificate(alpha, p, N, N_raw, cubes[i], t.tolist(), xi.tolist(), float(moments[k]), cubes[k], C,
                         bound, True, bool(moments[k] <= bound * (1 + COMPARISON_RTOL)),
                         bool(np.all(np.diff(xi) <= 1e-15) and xi.max(initial=0.0) <= 1 + 1e-12),
                         _decay_fit(t, xi), float(np.log(1 / alpha) / N) if N > 0 else float("inf"),
                         step_violations, len(cubes))
    cert.xi_ok = bool(np.all(xi <= cert.xi_bound(t) * (1 + COMPARISON_RTOL) + 1e-15))
    log.info("John-Nirenberg on %s: N %.4g (raw %.4g), moment %.4g vs bound %.4g, %s",
             q0, N, N_raw, cert.moment, bound, "pass" if cert.passed else "FAIL")
    return cert


def cascade_table(grid: DyadicGrid, q0: CubeId, seed: int = 0, low: float = 0.25,
                  high: float = 1.25) -> CubeDataTable:
    """Synthetic table with beta_Q the product of i.i.d. uniform[low, high] weights along the chain Q0 >= Q."""
    if not 0 <= low <= high:
        raise InputError("cascade weights need 0 <= low <= high", low=low, high=high)
    rng = np.random.default_rng(seed)
    beta: Dict[CubeId, float] = {}
    for c in grid.descendants(q0):
        w = rng.uniform(low, high)
        beta[c.id] = w * (beta[c.parent] if c.id != q0 else 1.0)
    return CubeDataTable.from_arrays(grid, beta, {q: 1.0 for q in beta}, label=f"cascade/{seed}")


# ----------------------------------------------------------------------
# good lambda
# ----------------------------------------------------------------------
@dataclass
class GoodLambdaReport:
    convention: str
    alphas: List[float]
    rows: List[Dict[str, float]]
    fits: Dict[float, Tuple[float, float]]
    violations: int
    worst_violation: float
    degenerate: bool

    @property
    def theta(self) -> float:
        thetas = [th for _, th in self.fits.values() if np.isfinite(th)]
        return float(min(thetas)) if thetas else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "convention": self.convention,
            "alphas": self.alphas,
            "fits": {str(e): {"C": c, "theta": th} for e, (c, th) in self.fits.items()},
            "theta": self.theta,
            "violations": self.violations,
            "worst_violation": self.worst_violation,
            "degenerate": self.degenerate,
        }


def _roots(table: CubeDataTable, q0: Optional[CubeId]) -> List[CubeId]:
    if q0 is not None:
        if q0 not in table.row:
            raise InputError(f"cube {q0} is not in the table")
        return [q0]
    return [r for r in table.grid.roots if r in table.row]


def dyadic_alphas(values: np.ndarray) -> np.ndarray:
    """Powers of two spanning the positive range of ``values``."""
    pos = values[values > 0]
    if len(pos) == 0:
        return np.zeros(0)
    lo = int(np.floor(np.log2(pos.min())))
    hi = int(np.ceil(np.log2(pos.max())))
    return 2.0 ** np.arange(lo, hi + 1, dtype=float)


def _paired_leaves(tableG: CubeDataTable, tableH: CubeDataTable, q0: Optional[CubeId], convention: str):
    if tableG.grid is not tableH.grid:
        raise InputError("good-lambda tables must share a grid")
    sig, a, h = [], [], []
    for root in _roots(tableG, q0):
        pg = local_profile(tableG, root)
        ph = local_profile(tableH, root, fat_sup=True)
        if pg.leaves != ph.leaves:
            raise InputError("tables cover different cubes")
        if convention == "geometric":
            centers = np.array([tableG.grid[c].center for c in pg.leaves])
            a.append(area_geometric(tableG, centers, root))
        else:
            a.append(pg.area)
        sig.append(pg.sigma)
        h.append(ph.ntmax)
    if not sig:
        raise InputError("no cubes in the good-lambda scope")
    return np.concatenate(sig), np.concatenate(a), np.concatenate(h)


def good_lambda_scan(tableG: CubeDataTable, tableH: CubeDataTable, eps_list: Sequence[float],
                     gamma_list: Sequence[float], q0: Optional[CubeId] = None,
                     convention: str = "overlap") -> GoodLambdaReport:
    """Measure sigma{A G > (1+eps) alpha, N^ H <= gamma alpha} against sigma{A G > alpha}.

    alpha runs over powers of two spanning the observed range of A G.  For
    each eps, (C, theta) is the least-squares fit in log space of the worst
    ratio over alpha against gamma / eps.
    """
    if convention not in ("overlap", "geometric"):
        raise InputError("area convention must be 'overlap' or 'geometric'", convention=convention)
    if any(e <= 0 for e in eps_list) or any(g <= 0 for g in gamma_list):
        raise InputError("eps and gamma must be positive")
    sigma, a, h = _paired_leaves(tableG, tableH, q0, convention)
    alphas = dyadic_alphas(a)
    rows: List[Dict[str, float]] = []
    fits: Dict[float, Tuple[float, float]] = {}
    for eps in eps_list:
        worst = []
        for gam in gamma_list:
            ratio = 0.0
            for al in alphas:
                lhs = float(sigma[(a > (1 + eps) * al) & (h <= gam * al)].sum())
                rhs = float(sigma[a > al].sum())
                rows.append({"eps": eps, "gamma": gam, "alpha": float(al), "lhs": lhs, "rhs": rhs})
                if rhs > 0:
                    ratio = max(ratio, lhs / rhs)
            worst.append(ratio)
        x = np.log(np.asarray(gamma_list, dtype=float) / eps)
        y = np.asarray(worst)
        ok = y > 0
        if ok.sum() >= 2 and np.ptp(x[ok]) > 0:
            theta, logc = np.polyfit(x[ok], np.log(y[ok]), 1)
            fits[float(eps)] = (float(np.exp(logc)), float(theta))
        else:
            fits[float(eps)] = (float(y.max(initial=0.0)), float("nan"))

    violations, worst_violation = 0, 0.0
    for row in rows:
        C, theta = fits[float(row["eps"])]
        scale = C * (row["gamma"] / row["eps"]) ** theta if np.isfinite(theta) else C
        allowed = scale * row["rhs"]
        if row["lhs"] > allowed * (1 + COMPARISON_RTOL) + 1e-300:
            violations += 1
            worst_violation = max(worst_violation, safe_ratio(row["lhs"], allowed))
    report = GoodLambdaReport(convention, alphas.tolist(), rows, fits, violations, worst_violation,
                              degenerate=len(alphas) == 0)
    if report.degenerate:
        log.warning("good-lambda scan: every level set of A G is empty")
    log.info("good-lambda (%s): %d alphas, theta %.3g, %d points above the fitted bound",
             convention, len(alphas), report.theta, violations)
    return report


# ----------------------------------------------------------------------
# A < N ratios and the implication chain
# ----------------------------------------------------------------------
def aq_less_n_ratios(tableG: CubeDataTable, tableH: CubeDataTable, qs: Sequence[float],
                     q0: Optional[CubeId] = None) -> Dict[str, Any]:
    """Per cube Q of the scope: ||A^Q G||_q / ||N^^Q H||_q on Q, for each q."""
    if tableG.grid is not tableH.grid:
        raise InputError("ratio tables must share a grid")
    if not qs or any(q <= 0 for q in qs):
        raise InputError("norm exponents must be positive", qs=list(qs))
    cubes = _scope(tableG, q0)
    rows = []
    summary: Dict[float, Dict[str, Any]] = {float(q): {"sup": 0.0, "witness": None, "violations": 0} for q in qs}
    for c in cubes:
        pg = local_profile(tableG, c)
        ph = local_profile(tableH, c, fat_sup=True)
        row: Dict[str, Any] = {"k": c[0], "j": c[1]}
        for q in qs:
            num, den = pg.norm(pg.area, q), ph.norm(ph.ntmax, q)
            r = safe_ratio(num, den)
            row[f"ratio_q{q:g}"] = r
            s = summary[float(q)]
            if den <= 0 and num > 0:
                s["violations"] += 1
            elif r > s["sup"]:
                s["sup"], s["witness"] = r, list(c)
        rows.append(row)
    return {"rows": rows, "summary": summary, "cubes": len(cubes)}


def _max_mhat_below(table: CubeDataTable) -> np.ndarray:
    out = table.m_hat.copy()
    for qid in sorted(table.cube_ids, key=lambda q: (-q[0], q[1])):
        par = table.grid[qid].parent
        if par is not None and par in table.row:
            out[table.row[par]] = max(out[table.row[par]], out[table.row[qid]])
    return out


def implication_checks(tableG: CubeDataTable, tableH: CubeDataTable, qs: Sequence[float] = (2.0,),
                       q0: Optional[CubeId] = None, ratios: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Cross-experiment assertions between the localized CME proxy, (B)_q and the dyadic CME.

    * proxy: a_loc = sup_Q CME_dyad(Q) / (max m^ over D_Q)^2.  A finite
      proxy must come with finite, violation-free A<N ratios.
    * (B)_2 => (A): CME_dyad(Q) <= C_B^2 (max m^ over D_Q)^2 at every Q, with
      C_B the measured sup of the q = 2 ratios.
    """
    qs = sorted({float(q) for q in qs} | {2.0})
    if ratios is None or 2.0 not in ratios["summary"]:
        ratios = aq_less_n_ratios(tableG, tableH, qs, q0)
    scope = set(_scope(tableG, q0))
    carleson = dyadic_carleson_ratios(tableG)
    mmax = _max_mhat_below(tableH)
    rows = [tableG.row[c] for c in sorted(scope)]
    proxy = max((safe_ratio(carleson[i], mmax[tableH.row[tableG.cube_ids[i]]] ** 2) for i in rows), default=0.0)
    finite_ratios = all(np.isfinite(s["sup"]) and s["violations"] == 0 for s in ratios["summary"].values())
    proxy_ok = (not np.isfinite(proxy)) or finite_ratios
    C_B = ratios["summary"][2.0]["sup"]
    b_implies_a = 0
    for i in rows:
        allowed = C_B ** 2 * mmax[tableH.row[tableG.cube_ids[i]]] ** 2
        if carleson[i] > allowed * (1 + 1e-7) + 1e-300:
            b_implies_a += 1
    out = {
        "a_loc_proxy": proxy,
        "proxy_implies_b": bool(proxy_ok),
        "C_B": C_B,
        "b_implies_a_violations": b_implies_a,
        "passed": bool(proxy_ok and b_implies_a == 0),
    }
    if not out["passed"]:
        log.warning("implication chain broken: %s", out)
    return out
