"""Runs one subcommand end to end: scenario, geometry, fields, experiment, artifacts.

Every artifact lands in ``<out>/<command>/``: one CSV per table (rows
carry config hash, geometry hash and seed), ``report.json`` with the
scalars and verdicts, and ``runtime.json``, which is the only file that
changes between identical runs.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from config.experiment_config import ExperimentConfig, FieldSpec
from core.ambient import CurveSet, estimate_adr
from core.big_pieces import big_pieces_subdomain
from core.corona import CoronaDecomposition, build_corona
from core.cube_data import CubeDataTable, cube_data
from core.dyadic_grid import DyadicGrid, build_grid, thin_boundary_exponent
from core.errors import ErrorHandler, GeometryError, InputError
from core.estimators import (WhitneyAverage, aperture_ratio, ball_family, check_area_recursion, cme0, cme_dyadic,
                             cme_joint, eps_approx_check, interior_samples, three_norm_constant, trad_functionals)
from core.experiments import (central_cube, corona_cme_sum, kp_restriction_check, lipschitz_catalog, n_less_s_global,
                              n_less_s_local, stability, transfer_cme)
from core.fields import ScalarField, catalog_field
from core.regions import ComplementDomain
from core.riesz import probe_samples, riesz_probe
from core.scenario_factory import Scenario, ScenarioFactory
from core.stopping import aq_less_n_ratios, cascade_table, good_lambda_scan, implication_checks, jn_certify
from core.structures import WhitneyDyadicStructure, build_structure, check_containments, cone_embedding_check, side_mask
from core.walk_on_spheres import WosSolver, boundary_data, wos_field
from core.whitney import WhitneyDecomposition, Window, decompose, reach_window
from core.worker_pool import RuntimeStats, WorkerPool
from tools.artifact_io import collect_reports, plain, write_csv, write_json

log = logging.getLogger(__name__)

COMMANDS = ("build-geometry", "decompose", "corona", "estimate", "jn", "good-lambda", "ns", "transference",
            "riesz", "report")
REFINEMENT_STEP = 2
ADR_SAMPLES = 256
CONTAINMENT_SAMPLES = 2000
CONE_TRIALS = 2000
EPS_APPROX = 0.5


def whitney_depth(k_max: int, eta: float) -> int:
    """Finest Whitney level needed so every generation-k_max cube has side-eta^(1/4) boxes."""
    return k_max + int(np.ceil(-np.log2(eta) / 4.0 - 1e-12))


@dataclass
class Pipeline:
    """Geometry built at one depth."""

    depth: int
    grid: DyadicGrid
    W: WhitneyDecomposition
    structure: WhitneyDyadicStructure
    corona: Optional[CoronaDecomposition]
    geometry_hash: str

    @property
    def set(self):
        return self.grid.set


@dataclass
class ExperimentReport:
    command: str
    config_hash: str
    geometry_hash: str
    seed: int
    scalars: Dict[str, Any] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def provenance(self) -> Dict[str, Any]:
        return {"config_hash": self.config_hash, "geometry_hash": self.geometry_hash, "seed": self.seed}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            **self.provenance,
            "scalars": plain(self.scalars),
            "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
            "passed": self.passed,
            "tables": sorted(self.tables),
            "details": plain(self.details),
        }


class ExperimentOrchestrator:
    """Builds the geometry for a config and runs the subcommands on it."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.out)
        self.stats = RuntimeStats()
        self.pool = WorkerPool(config.workers, self.stats)
        self.error_handler = ErrorHandler(str(self.out_dir))
        self.factory = ScenarioFactory()
        self.config_hash = config.config_hash()
        self._scenario: Optional[Scenario] = None
        self._pipelines: Dict[Tuple[int, str], Pipeline] = {}
        self._fields: Optional[Tuple[ScalarField, ScalarField]] = None

    # ------------------------------------------------------------------
    # geometry
    # ------------------------------------------------------------------
    def map_fn(self, label: str) -> Callable:
        return lambda fn, items: self.pool.map(fn, items, label)

    @property
    def scenario(self) -> Scenario:
        if self._scenario is None:
            cfg = self.config
            window = Window(tuple(cfg.window.lo), tuple(cfg.window.hi)) if cfg.window is not None else None
            set_spec = cfg.set.as_dict() if cfg.set is not None else None
            self._scenario = self.factory.create_scenario(cfg.scenario, set_spec=set_spec, window=window)
        return self._scenario

    def _explicit(self, section: str) -> bool:
        return section in self.config.model_fields_set

    def structure_mode(self) -> str:
        return self.config.structure.mode if self._explicit("structure") else self.scenario.mode

    def grid_range(self, depth: int) -> Tuple[int, int]:
        sc = self.scenario
        k_min = self.config.grid.k_min if self._explicit("grid") else sc.k_min
        k_max = depth if sc.max_depth is None else min(depth, sc.max_depth)
        if k_max < k_min:
            raise InputError(f"depth {depth} is coarser than the grid's first generation {k_min}",
                             depth=depth, k_min=k_min)
        return k_min, k_max

    def whitney_window(self, grid: DyadicGrid) -> Window:
        """Scenario window, widened so every root cube has its base Whitney cubes unless the window is fixed."""
        sc = self.scenario
        if sc.fixed_window:
            return sc.window
        roots = [grid[qid] for qid in grid.roots]
        window = reach_window(sc.window, np.array([q.center for q in roots]), np.array([q.length for q in roots]),
                              self.config.structure.eta)
        if window != sc.window:
            log.info("whitney window widened to %s x %s", window.lo, window.hi)
        return window

    def geometry_hash(self, depth: int, mode: str, window: Window) -> str:
        sc = self.scenario
        k_min, k_max = self.grid_range(depth)
        blob = json.dumps(plain({
            "set": sc.set.describe(),
            "window": [window.lo, window.hi],
            "param_window": self.config.grid.param_window or sc.param_window,
            "generations": [k_min, k_max],
            "whitney_depth": whitney_depth(k_max, self.config.structure.eta),
            "structure": self.config.structure.model_dump(mode="json"),
            "mode": mode,
            "corona_eta": sc.corona_eta,
        }), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def build_pipeline(self, depth: Optional[int] = None, mode: Optional[str] = None) -> Pipeline:
        depth = self.config.depth if depth is None else depth
        mode = self.structure_mode() if mode is None else mode
        key = (depth, mode)
        if key in self._pipelines:
            return self._pipelines[key]
        sc = self.scenario
        params = self.config.structure
        k_min, k_max = self.grid_range(depth)
        grid = build_grid(sc.set, k_min, k_max, window=self.config.grid.param_window or sc.param_window)
        window = self.whitney_window(grid)
        W = decompose(sc.set, window, whitney_depth(grid.k_max, params.eta), map_fn=self.map_fn("whitney"))
        corona = None
        if mode == "ur":
            corona = build_corona(sc.set, grid, eta=sc.corona_eta or params.eta, K_c=params.K_c,
                                  samples=params.corona_samples)
        S = build_structure(grid, W, mode, params, corona=corona, map_fn=self.map_fn("structure"))
        pipeline = Pipeline(depth, grid, W, S, corona, self.geometry_hash(depth, mode, window))
        self._pipelines[key] = pipeline
        log.info("pipeline at depth %d (%s): %d cubes, %d Whitney boxes", depth, mode, len(grid), len(W))
        return pipeline

    def corona_for(self, p: Pipeline) -> CoronaDecomposition:
        if p.corona is None:
            params = self.config.structure
            p.corona = build_corona(p.set, p.grid, eta=self.scenario.corona_eta or params.eta, K_c=params.K_c,
                                    samples=params.corona_samples)
        return p.corona

    def domain(self, p: Pipeline) -> ComplementDomain:
        return ComplementDomain(p.set, p.structure.side)

    # ------------------------------------------------------------------
    # fields
    # ------------------------------------------------------------------
    def _field(self, spec: FieldSpec) -> ScalarField:
        if spec.name != "wos":
            return catalog_field(spec.name, dict(spec.params))
        solver_spec = self.config.solver
        sc = self.scenario
        side = "plus" if sc.set.has_sides() else "any"
        g = boundary_data(solver_spec.boundary.name, dict(solver_spec.boundary.params))
        solver = WosSolver(ComplementDomain(sc.set, side), g, budget=solver_spec.budget,
                           eps=solver_spec.eps_scale * sc.set.scale, step_cap=solver_spec.step_cap,
                           seed=self.config.seed)
        return wos_field(solver, self.map_fn("walk_on_spheres"))

    def fields(self) -> Tuple[ScalarField, ScalarField]:
        """(u, H): the harmonic field and the field under the maximal function (u unless field_h is set)."""
        if self._fields is None:
            u = self._field(self.config.field)
            H = u if self.config.field_h is None else self._field(self.config.field_h)
            self._fields = (u, H)
        return self._fields

    def tables(self, p: Pipeline) -> CubeDataTable:
        u, H = self.fields()
        return cube_data(p.structure, u.gradient_norm(), H, self.config.quadrature_level, self.map_fn("cube_data"))

    # ------------------------------------------------------------------
    # subcommands
    # ------------------------------------------------------------------
    def run(self, command: str) -> ExperimentReport:
        if command not in COMMANDS:
            raise InputError(f"unknown subcommand '{command}'", available=list(COMMANDS))
        handler = getattr(self, "run_" + command.replace("-", "_"))
        log.info("running %s on scenario %s (config %s)", command, self.config.scenario, self.config_hash[:12])
        report = handler()
        self.write_report(report)
        return report

    def _report(self, command: str, p: Optional[Pipeline]) -> ExperimentReport:
        return ExperimentReport(command, self.config_hash, p.geometry_hash if p else "", self.config.seed)

    def run_build_geometry(self) -> ExperimentReport:
        p = self.build_pipeline()
        r = self._report("build-geometry", p)
        set_ = p.set
        r_max = min(1.0, 0.25 * set_.diam)
        r_min = min(2.0 ** -p.grid.k_max, 0.5 * r_max)
        adr = estimate_adr(set_, r_min, r_max, ADR_SAMPLES, seed=self.config.seed)
        display = p.W.check_display()
        r.scalars.update({
            "adr_lower": adr.c_lower, "adr_upper": adr.c_upper, "adr_ratio": adr.ratio,
            "grid_cubes": len(p.grid), "k_min": p.grid.k_min, "k_max": p.grid.k_max,
            "whitney_cubes": len(p.W), "whitney_depth": p.W.depth, "truncated_area": p.W.truncated_area,
            "display_failures": int(np.sum(~display)),
        })
        r.verdicts["grid_nesting"] = p.grid.check_nesting()
        r.verdicts["whitney_display"] = bool(np.all(display))
        if isinstance(set_, CurveSet) and p.grid.k_max > p.grid.k_min:
            gamma, r2 = thin_boundary_exponent(p.grid, p.grid.generation(p.grid.k_min + 1))
            r.scalars.update({"thin_boundary_gamma": gamma, "thin_boundary_r2": r2})
            r.verdicts["thin_boundary"] = bool(gamma > 0)
        r.tables["grid"] = p.grid.records()
        r.tables["whitney"] = p.W.records()
        r.details["scenario"] = self.scenario.describe()
        return r

    def run_decompose(self) -> ExperimentReport:
        p = self.build_pipeline()
        S = p.structure
        r = self._report("decompose", p)
        r.scalars.update({"mode": S.mode, "side": S.side, "constant_C": S.constant_C, "m0": S.m0, "C0": S.C0,
                          "memberships": int(S.members.nnz), "straddling": S.straddling})
        q0 = central_cube(p.grid)
        audits = [check_containments(S, q, CONTAINMENT_SAMPLES, seed=self.config.seed)
                  for q in [q0] + [c.id for c in p.grid.children(q0)]]
        r.tables["containments"] = audits
        r.verdicts["carleson_box_in_ball"] = all(a["T_in_Bstar"] for a in audits)
        r.verdicts["ball_in_carleson_box"] = all(any(a[f"BQ_in_T_tau/{n}"] for n in (1, 2, 4)) for a in audits)
        r.scalars["TDelta_reach_ratio"] = max((a.get("TDelta_reach_ratio", 0.0) for a in audits), default=0.0)
        cone = cone_embedding_check(S, p.grid[q0].center, CONE_TRIALS, seed=self.config.seed)
        r.details["cone_embedding"] = cone
        r.verdicts["cone_embedding"] = cone["failures"] == 0
        r.tables["structure"] = S.records()
        return r

    def run_corona(self) -> ExperimentReport:
        p = self.build_pipeline()
        if not isinstance(p.set, CurveSet):
            raise InputError("corona decompositions need a piecewise-linear set", kind=p.set.kind)
        corona = self.corona_for(p)
        r = self._report("corona", p)
        ratio, witness = corona.max_packing_ratio()
        r.scalars.update({"regimes": len(corona.regimes), "bad_cubes": len(corona.bad),
                          "max_packing_ratio": ratio, "packing_witness": witness})
        r.verdicts["coherent"] = corona.check_coherence()
        r.verdicts["bilateral"] = corona.check_bilateral()
        r.details["corona"] = corona.to_dict()

        pieces = []
        for qid in p.grid.generation(min(p.grid.k_min + 1, p.grid.k_max)):
            try:
                piece = big_pieces_subdomain(p.grid, qid, regime=corona.regime_of(qid),
                                             theta_floor=self.config.structure.theta_floor)
                pieces.append(piece.to_dict())
            except GeometryError as e:
                pieces.append({"cube": list(qid), "error": str(e)})
        r.tables["big_pieces"] = pieces
        r.verdicts["big_pieces"] = all("error" not in row for row in pieces)

        table = self.tables(p)
        X = interior_samples(self.domain(p), p.W.window.lo, p.W.window.hi, self.config.estimate.interior_samples)
        G = self.fields()[0].gradient_norm()
        zero = cme0(G, p.set, X, self.domain(p), map_fn=self.map_fn("cme0")).value if len(X) else 0.0
        sums = corona_cme_sum(table, corona, zero)
        r.scalars["cme0"] = zero
        r.scalars.update({k: v for k, v in sums.items() if k != "regimes"})
        r.tables["regime_sums"] = sums["regimes"]
        return r

    def _estimate_at(self, p: Pipeline) -> Dict[str, Any]:
        est = self.config.estimate
        u, H = self.fields()
        G = u.gradient_norm()
        D = self.domain(p)
        family = ball_family(p.set, est.ball_levels, est.ball_centers, seed=self.config.seed)
        X = interior_samples(D, p.W.window.lo, p.W.window.hi, est.interior_samples)
        if len(X) == 0:
            raise InputError("no interior samples in the window; widen it")
        polar = dict(n_r=est.polar_nodes // 2, n_theta=est.polar_nodes)
        joint = cme_joint(G, p.set, X, family, D, map_fn=self.map_fn("cme"), **polar)
        table = self.tables(p)
        dyad = cme_dyadic(table, p.structure)
        return {"joint": joint, "table": table, "dyadic": dyad, "samples": X, "family": family,
                "constant": three_norm_constant(joint["cme"].value, dyad.value, joint["cme0"].value)}

    def run_estimate(self) -> ExperimentReport:
        est = self.config.estimate
        u, H = self.fields()
        p = self.build_pipeline()
        fine = self.build_pipeline(self.config.depth + REFINEMENT_STEP)
        r = self._report("estimate", p)
        coarse_run, fine_run = self._estimate_at(p), self._estimate_at(fine)
        joint = coarse_run["joint"]
        r.scalars.update({
            "cme": joint["cme"].value, "cme0": joint["cme0"].value, "cme0_ratio": joint["ratio"],
            "cme_dyadic": coarse_run["dyadic"].value, "three_norm_constant": coarse_run["constant"],
        })
        r.verdicts["cme0_comparable"] = bool(joint["holds"] and fine_run["joint"]["holds"])
        r.verdicts["monotone_table"] = coarse_run["table"].check_monotone()
        st = stability(coarse_run["constant"], fine_run["constant"], self.config.stability_band)
        r.details["three_norm_stability"] = st
        r.verdicts["three_norm_stable"] = st["stable"]

        polar = dict(n_r=est.polar_nodes // 2, n_theta=est.polar_nodes)
        q0 = central_cube(p.grid)
        x = p.grid[q0].center
        rows = [f.to_row() for f in trad_functionals(u, p.set, x, est.kappa, est.r, H=H, domain=self.domain(p), **polar)]
        rows += [f.to_row() for f in (joint["cme"], joint["cme0"], coarse_run["dyadic"])]
        r.tables["functionals"] = rows

        kids = p.grid.children(q0)
        if kids and p.grid.children(kids[0].id):
            sub = p.grid.children(kids[0].id)[0].id
            rec = check_area_recursion(coarse_run["table"], q0, sub)
            r.details["area_recursion"] = rec
            r.verdicts["area_recursion"] = rec["violations"] == 0

        boundary = coarse_run["family"][:: est.ball_levels, :2]
        r.details["aperture"] = aperture_ratio(u, p.set, est.kappa_pair[0], est.kappa_pair[1], est.q, boundary,
                                               est.r, domain=self.domain(p), **polar)
        keep = np.flatnonzero(side_mask(p.W, p.structure.side))
        phi = WhitneyAverage(p.W, u, idx=keep)
        inside = coarse_run["samples"][p.W.locate(coarse_run["samples"]) >= 0]
        approx = eps_approx_check(u, phi, p.set, EPS_APPROX, coarse_run["family"], inside, self.domain(p), **polar)
        r.details["eps_approximability"] = approx.to_dict()
        r.scalars["eps_approx_C"] = approx.C_eps
        r.tables["cube_data"] = coarse_run["table"].records()
        return r

    def run_jn(self) -> ExperimentReport:
        jn = self.config.jn
        p = self.build_pipeline()
        r = self._report("jn", p)
        q0 = central_cube(p.grid)
        cert = jn_certify(self.tables(p), q0, jn.alpha, jn.p, jn.n_cap, jn.t_points)
        r.details["certificate"] = cert.to_dict()
        r.scalars.update({"N": cert.N, "moment": cert.moment, "moment_bound": cert.bound, "C": cert.C,
                          "decay_rate": cert.decay_rate, "rate_bound": cert.rate_bound})
        r.verdicts["certificate"] = cert.passed
        r.tables["level_sets"] = [{"t": t, "xi": xi, "bound": float(cert.xi_bound(t))} for t, xi in zip(cert.t, cert.xi)]
        ensemble = []
        for s in range(self.config.seed, self.config.seed + jn.ensemble):
            c = jn_certify(cascade_table(p.grid, q0, seed=s), q0, jn.alpha, jn.p, jn.n_cap, jn.t_points)
            ensemble.append({"cascade_seed": s, "N": c.N, "moment": c.moment, "bound": c.bound, "passed": c.passed})
        r.tables["cascades"] = ensemble
        r.verdicts["cascades"] = all(row["passed"] for row in ensemble)
        return r

    def run_good_lambda(self) -> ExperimentReport:
        gl = self.config.good_lambda
        p = self.build_pipeline()
        fine = self.build_pipeline(self.config.depth + REFINEMENT_STEP)
        r = self._report("good-lambda", p)
        table = self.tables(p)
        rows = []
        for convention in ("overlap", "geometric"):
            scan = good_lambda_scan(table, table, gl.eps, gl.gamma, convention=convention)
            r.details[f"scan_{convention}"] = scan.to_dict()
            r.scalars[f"theta_{convention}"] = scan.theta
            rows += [dict(row, convention=convention) for row in scan.rows]
            if convention == "overlap" and not scan.degenerate and np.isfinite(scan.theta):
                r.verdicts["theta_positive"] = bool(scan.theta > 0)
        r.tables["good_lambda"] = rows
        ratios = aq_less_n_ratios(table, table, gl.q)
        r.tables["aq_less_n"] = ratios["rows"]
        r.details["aq_less_n"] = ratios["summary"]
        checks = implication_checks(table, table, gl.q, ratios=ratios)
        r.details["implications"] = checks
        r.verdicts["dyadic_b_implies_a"] = checks["b_implies_a_violations"] == 0
        fine_ratios = aq_less_n_ratios(self.tables(fine), self.tables(fine), [2.0])
        st = stability(ratios["summary"].get(2.0, {}).get("sup", checks["C_B"]),
                       fine_ratios["summary"][2.0]["sup"], self.config.stability_band)
        r.details["stability"] = st
        r.verdicts["aq_less_n_stable"] = st["stable"]
        return r

    def run_ns(self) -> ExperimentReport:
        ns, est = self.config.ns, self.config.estimate
        u, _ = self.fields()
        p = self.build_pipeline()
        fine = self.build_pipeline(self.config.depth + REFINEMENT_STEP)
        r = self._report("ns", p)
        runs = [n_less_s_local(x.structure, u, central_cube(x.grid), ns.q, all_q=ns.all_q, eps=ns.eps,
                               gamma=ns.gamma, gated=ns.gated, quadrature_level=self.config.quadrature_level,
                               map_fn=self.map_fn("cube_data")) for x in (p, fine)]
        r.tables["local"] = [dict(run, depth=x.depth) for run, x in zip(runs, (p, fine))]
        st = stability(runs[0]["ratio"], runs[1]["ratio"], self.config.stability_band)
        r.details["stability"] = st
        r.verdicts["local_finite"] = not any(run["violation"] for run in runs)
        r.verdicts["local_stable"] = st["stable"]
        boundary = ball_family(p.set, 1, est.ball_centers)[:, :2]
        glob = n_less_s_global(u, p.set, est.kappa, est.r, boundary, ns.q, domain=self.domain(p),
                               n_r=est.polar_nodes // 2, n_theta=est.polar_nodes)
        r.details["global"] = glob
        r.scalars.update({"local_ratio": runs[0]["ratio"], "global_ratio": glob["ratio"]})
        return r

    def run_transference(self) -> ExperimentReport:
        mode = self.config.transference.mode
        est = self.config.estimate
        u, _ = self.fields()
        G = u.gradient_norm()
        structure_mode = "ur" if mode == "ur" else self.structure_mode()
        p = self.build_pipeline(mode=structure_mode)
        fine = self.build_pipeline(self.config.depth + REFINEMENT_STEP, mode=structure_mode)
        r = self._report("transference", p)
        kw = dict(levels=est.ball_levels, centers=est.ball_centers, samples=est.interior_samples,
                  n_r=est.polar_nodes // 2, n_theta=est.polar_nodes)
        runs = [transfer_cme(G, x.structure, mode, map_fn=self.map_fn("transference"), **kw) for x in (p, fine)]
        r.tables["catalog"] = runs[0]["catalog"]
        r.scalars.update({k: runs[0][k] for k in ("lhs", "rhs", "sup_catalog", "ratio")})
        st = stability(runs[0]["ratio"], runs[1]["ratio"], self.config.stability_band)
        r.details["stability"] = st
        r.verdicts["transference_finite"] = bool(np.isfinite(runs[0]["ratio"]))
        r.verdicts["transference_stable"] = st["stable"]
        if mode == "cad":
            pieces = [dom for label, dom in lipschitz_catalog(p.structure) if label.startswith("big_pieces")]
            if pieces:
                X = interior_samples(ComplementDomain(p.set), p.W.window.lo, p.W.window.hi, est.interior_samples)
                kp = kp_restriction_check(G, p.set, pieces[0], X, levels=est.ball_levels, centers=est.ball_centers,
                                          n_r=est.polar_nodes // 2, n_theta=est.polar_nodes,
                                          map_fn=self.map_fn("kp"))
                r.details["kp_restriction"] = kp
                r.verdicts["kp_restriction"] = kp["holds"]
        return r

    def run_riesz(self) -> ExperimentReport:
        rz = self.config.riesz
        sc = self.scenario
        samples = probe_samples(sc.set, rz.spacing)
        report = riesz_probe(sc.set, samples, rz.eps, ensemble=rz.ensemble, iterations=rz.iterations,
                             seed=self.config.seed)
        r = ExperimentReport("riesz", self.config_hash, sc.set.geometry_hash(), self.config.seed)
        r.scalars.update({"sup_norm": report.sup, "witness_eps": report.witness_eps, "spacing": report.spacing,
                          "samples": report.samples})
        r.tables["norms"] = [{"eps": e, "norm": n} for e, n in zip(report.eps, report.norms)]
        r.verdicts["norms_finite"] = bool(np.all(np.isfinite(report.norms)))
        return r

    def run_report(self) -> ExperimentReport:
        found = collect_reports(self.out_dir, [c for c in COMMANDS if c != "report"])
        r = ExperimentReport("report", self.config_hash, "", self.config.seed)
        rows = []
        for name, rep in sorted(found.items()):
            rows.append({"command": name, "passed": rep.get("passed"), "config_hash": rep.get("config_hash"),
                         "verdicts": rep.get("verdicts", {})})
            r.verdicts[name] = bool(rep.get("passed"))
            for key, value in rep.get("scalars", {}).items():
                r.scalars[f"{name}.{key}"] = value
        if not rows:
            raise InputError(f"no reports found under {self.out_dir}")
        r.tables["summary"] = [{k: v for k, v in row.items() if k != "config_hash"} for row in rows]
        r.details["stale"] = sorted(row["command"] for row in rows if row["config_hash"] != self.config_hash)
        return r

    # ------------------------------------------------------------------
    # artifacts
    # ------------------------------------------------------------------
    def write_report(self, report: ExperimentReport) -> Path:
        folder = self.out_dir / report.command
        for name, rows in sorted(report.tables.items()):
            write_csv(folder / f"{name}.csv", rows, report.provenance)
        path = write_json(folder / "report.json", report.to_dict())
        self.stats.save(folder / "runtime.json")
        log.info("%s: %d tables written to %s", report.command, len(report.tables), folder)
        return path
