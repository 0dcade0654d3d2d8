"""
Analysis steps of the experiment pipeline

Each step reads the shared context (solved ladder, domain, data) and returns
its outputs, verdicts and plot series. Expected values come from the
request's ``expect`` block; tolerances from its ``params`` or the config's
thresholds.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import structlog

from asymptotics.corner import corner_jet_extract
from asymptotics.edge import coefficient_is_zero, edge_expansion_fit, edge_oracle_field
from asymptotics.interpolation import check_interpolation, polynomial_family
from constructions.barrier import derivative_check
from constructions.counterexample import counterexample_bundle, mu_k
from constructions.profiles import counterexample_rhs, corner_bump, barrier_h_profile
from constructions.sampling import interior_grid
from constructions.subsolution import planar_subsolution, simple_subsolution_3d
from constructions.small_f import small_f_barrier
from core.config import Settings
from core.exceptions import ConfigError, MapolyError
from core.logging_config import log_verdict
from core.models import AffineMap, SecondOrderJet
from geometry.cones import TangentCone, cone_from_normals, orthant_cone, v_mu_cone
from geometry.polytope import Polytope, is_simple, is_simplicial
from harness.conditions import condition_report, jets_from_field, jets_from_hessian, skeleton_points
from harness.models import AnalysisRequest, ExperimentConfig, Series, Verdict
from harness.plots import corner_series, edge_series, eigen_series, hessian_series, refinement_series
from normalize.angles import angle_of_quadratic_corner, theta_functionals
from solver.dirichlet import check_sandwich, sample_field, solve_dirichlet
from solver.domains import ComputationalDomain
from solver.fields import ScalarField
from solver.probes import compare_solutions, max_hessian_eigenvalue, residual_report
from solver.solution import DiscreteSolution
from spectral.eigen import SphericalDomain, eigenvalue_gap_check, lambda1_arc, lambda1_spherical

logger = structlog.get_logger(__name__)


@dataclass
class ExperimentContext:
    """Shared state of one experiment; owned by a single worker"""

    config: ExperimentConfig
    settings: Settings
    domain: Optional[ComputationalDomain] = None
    polytope: Optional[Polytope] = None
    cone: Optional[TangentCone] = None
    f: Optional[ScalarField] = None
    phi: Optional[ScalarField] = None
    exact: Optional[ScalarField] = None
    solutions: List[DiscreteSolution] = field(default_factory=list)

    @property
    def finest(self) -> DiscreteSolution:
        if not self.solutions:
            raise ConfigError("analysis needs a solved grid ladder", {"id": self.config.id})
        return self.solutions[-1]

    def need_polytope(self) -> Polytope:
        if self.polytope is None:
            raise ConfigError("analysis needs a polytope domain", {"id": self.config.id})
        return self.polytope

    def threshold(self, req: AnalysisRequest, key: str, default: float) -> float:
        return float(req.params.get(key, self.config.thresholds.get(key, default)))


@dataclass
class AnalysisOutcome:
    output: Dict[str, Any] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    series: Dict[str, Series] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def check(self, req: AnalysisRequest, name: str, passed: bool, value: Any = None, expected: Any = None) -> None:
        verdict = Verdict(name=f"{req.label}:{name}", passed=bool(passed), value=value, expected=expected)
        log_verdict(verdict.name, verdict.passed, value, expected)
        self.verdicts.append(verdict)


def _close(value: float, target: float, tol: float) -> bool:
    return abs(value - target) <= tol


def refinement(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Residuals, convexity violations and the observed order over the ladder"""
    out = AnalysisOutcome()
    report = residual_report(ctx.finest, ctx.solutions, ctx.exact)
    out.output = report.model_dump()
    out.series["refinement"] = refinement_series(report)
    if ctx.exact is not None and "error_factor" in req.expect:
        factor = float(req.expect["error_factor"])
        for h, err in report.refinement:
            out.check(req, f"error[h={h:g}]", err <= factor * h * h, err, f"<= {factor:g} h^2")
    if "max_violations" in req.expect:
        total = sum(s.convexity_violations for s in ctx.solutions)
        out.check(req, "convexity_violations", total <= int(req.expect["max_violations"]), total, req.expect["max_violations"])
    if "rate_range" in req.expect and report.grid_convergence_rate is not None:
        lo, hi = req.expect["rate_range"]
        rate = report.grid_convergence_rate
        out.check(req, "rate", lo <= rate <= hi, rate, [lo, hi])
    tol = ctx.threshold(req, "residual_tol", 1e-6)
    out.check(req, "residual", report.max_residual <= tol, report.max_residual, f"<= {tol:g}")
    return out


def sandwich(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """u <= |x|^2/2 + sqrt(1 - c) x1 x2 + slack at every node"""
    out = AnalysisOutcome()
    c = float(req.params.get("c", ctx.config.cone_solve.c if ctx.config.cone_solve else 1.0))
    sol = ctx.finest
    slack = ctx.threshold(req, "slack_factor", 2.0) * sol.h
    report = check_sandwich(sol, c, slack)
    out.output = report.model_dump()
    out.check(req, "upper_bound", report.passed, report.max_excess, f"<= {slack:g}")
    return out


def pin(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Pinned value reached, and the solution dips below |x|^2/2"""
    out = AnalysisOutcome()
    spec = ctx.config.cone_solve
    if spec is None or spec.pin_point is None:
        raise ConfigError("pin analysis needs a pinned cone_solve", {"id": ctx.config.id})
    sol = ctx.finest
    value = float(sol.evaluate_physical(np.asarray(spec.pin_point))[0])
    pts, vals = sol.nodes()
    dip = float(np.min(vals - 0.5 * np.sum(pts**2, axis=1)))
    out.output = {"value": value, "target": spec.pin_value, "shift": sol.pin_shift, "min_below_quadratic": dip}
    out.check(req, "pin_value", _close(value, spec.pin_value, ctx.settings.pin_tol), value, spec.pin_value)
    below = ctx.threshold(req, "dip_below", -0.1)
    out.check(req, "dips_below_quadratic", dip < below, dip, f"< {below:g}")
    return out


def corner(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Corner dichotomy on the finest grid"""
    out = AnalysisOutcome()
    p = np.asarray(req.params.get("corner", [0.0] * ctx.finest.dim), dtype=float)
    f0 = float(req.params["f0"]) if "f0" in req.params else float(ctx.f(p)[0])
    normalizing = req.params.get("normalizing_map")
    nmap = AffineMap(linear=np.asarray(normalizing, dtype=float), shift=-np.asarray(normalizing) @ p) if normalizing else None
    verdict = corner_jet_extract(ctx.finest, p, f0, nmap, req.params.get("r0"), settings=ctx.settings)
    out.output = verdict.model_dump(mode="json")
    out.series["corner-u12-vs-r"] = corner_series(verdict)
    if "classification" in req.expect:
        expected = req.expect["classification"]
        out.check(req, "classification", verdict.classification.value == expected, verdict.classification.value, expected)
    if "u12" in req.expect:
        tol = ctx.threshold(req, "u12_tol", 0.05)
        out.check(req, "u12", _close(verdict.estimated_u12, float(req.expect["u12"]), tol), verdict.estimated_u12, req.expect["u12"])
    if "spread_above" in req.expect:
        bound = float(req.expect["spread_above"])
        out.check(req, "direction_spread", verdict.direction_spread > bound, verdict.direction_spread, f"> {bound:g}")
    return out


def hessian_trend(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Largest discrete Hessian eigenvalue stays bounded under refinement"""
    out = AnalysisOutcome()
    hs = [s.h for s in ctx.solutions]
    values = [max_hessian_eigenvalue(s) for s in ctx.solutions]
    out.output = {"h": hs, "max_eigenvalue": values}
    out.series["hessian-trend"] = hessian_series(hs, values)
    tol = ctx.threshold(req, "trend_tol", 0.05)
    out.check(req, "non_increasing", values[-1] <= values[0] * (1.0 + tol), values, f"last <= first * {1 + tol:g}")
    return out


def comparison(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Raising f and lowering the data lowers the discrete solution nodewise"""
    out = AnalysisOutcome()
    if ctx.domain is None or ctx.f is None or ctx.phi is None:
        raise ConfigError("comparison needs a domain, f and phi", {"id": ctx.config.id})
    pairs = int(req.params.get("pairs", 50))
    h = float(req.params.get("h", ctx.config.grids[0] if ctx.config.grids else 1.0 / 16))
    rng = np.random.default_rng(int(req.params.get("seed", ctx.settings.seed)))
    tol = ctx.threshold(req, "comparison_tol", 1e-6)
    base = solve_dirichlet(ctx.domain, ctx.f, ctx.phi, h, ctx.settings)
    worst = -math.inf
    for _ in range(pairs):
        a, b = rng.uniform(0.05, 0.5), rng.uniform(0.0, 0.05)
        f2 = ScalarField.from_callable(lambda x, a=a: (1.0 + a) * ctx.f(x), label=f"{1 + a:.4g}*f")
        phi2 = ScalarField.from_callable(lambda x, b=b: ctx.phi(x) - b, label=f"phi - {b:.4g}")
        lower = solve_dirichlet(ctx.domain, f2, phi2, h, ctx.settings, initial=base)
        worst = max(worst, compare_solutions(lower, base).max_difference)
    out.output = {"pairs": pairs, "h": h, "max_difference": worst}
    out.check(req, "ordered", worst <= tol, worst, f"<= {tol:g}")
    return out


def _eigen_cone(params: Dict[str, Any]) -> TangentCone:
    if "normals" in params:
        return cone_from_normals(params["normals"])
    if "mu" in params:
        return v_mu_cone(float(params["mu"]), int(params.get("n", 3)))
    if "orthant" in params:
        n = int(params["orthant"])
        return orthant_cone(n, params.get("k"))
    raise ConfigError("eigen analysis needs normals, mu or orthant")


def eigen(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """lambda1 of a spherical cross-section, and the Liouville gap"""
    out = AnalysisOutcome()
    mesh_h = req.params.get("mesh_h")
    if "opening" in req.params:
        result = lambda1_arc(float(req.params["opening"]))
        applicable = result.lambda1 - 4.0 > ctx.settings.gap_rel_tol * 4.0
    else:
        cone = _eigen_cone(req.params)
        if "applicable" in req.expect:
            gap = eigenvalue_gap_check(cone, mesh_h)
            result, applicable = gap.eigen, gap.liouville_applicable
        else:
            result, applicable = lambda1_spherical(SphericalDomain.from_cone(cone), mesh_h), None
    out.output = result.model_dump(mode="json")
    out.output["liouville_applicable"] = applicable
    if result.ladder:
        out.series["eigen-ladder"] = eigen_series(result)
    if "lambda1" in req.expect:
        target = float(req.expect["lambda1"])
        tol = ctx.threshold(req, "lambda_rel_tol", 0.01) * target
        out.check(req, "lambda1", _close(result.lambda1, target, tol), result.lambda1, target)
    if "exponent_mu" in req.expect:
        target = float(req.expect["exponent_mu"])
        tol = ctx.threshold(req, "lambda_rel_tol", 0.01) * target
        out.check(req, "exponent_mu", _close(result.exponent_mu, target, tol), result.exponent_mu, target)
    if "applicable" in req.expect:
        out.check(req, "liouville_applicable", applicable == bool(req.expect["applicable"]), applicable, req.expect["applicable"])
    return out


def edge(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Singular-coefficient fit along the wedge edge, optionally against an oracle"""
    out = AnalysisOutcome()
    mu = float(req.params.get("mu", ctx.config.domain.mu if ctx.config.domain else 0.4))
    samples = [float(s) for s in req.params.get("x3_samples", [0.0])]
    window = tuple(req.params["window"]) if "window" in req.params else None
    fit = None

    if "oracle_c" in req.params:
        c = float(req.params["oracle_c"])
        h = float(req.params.get("h", ctx.config.grids[-1] if ctx.config.grids else 1.0 / 32))
        oracle = sample_field(ctx.domain, h, edge_oracle_field(mu, c, float(req.params.get("oracle_q", 0.0))), ctx.settings)
        oracle_fit = edge_expansion_fit(oracle, mu, samples, window, ctx.settings)
        out.output["oracle"] = oracle_fit.model_dump(mode="json")
        err = max(abs(v - c) for v in oracle_fit.coefficient_c)
        out.check(req, "oracle_recovery", err <= ctx.threshold(req, "oracle_tol", 1e-3), err, c)
        fit = oracle_fit

    if ctx.solutions:
        fit = edge_expansion_fit(ctx.finest, mu, samples, window, ctx.settings)
        out.output["fit"] = fit.model_dump(mode="json")
        zero = coefficient_is_zero(fit, ctx.settings)
        out.output["coefficient_is_zero"] = zero
        if "c_zero" in req.expect:
            out.check(req, "c_zero", zero == bool(req.expect["c_zero"]), fit.coefficient_c, f"|c| < {ctx.settings.c_noise_floor:g}")
        if "c_below" in req.expect:
            bound = float(req.expect["c_below"])
            k = int(np.argmin(np.abs(np.asarray(fit.x3_samples))))
            out.check(req, "c_below", fit.coefficient_c[k] < bound, fit.coefficient_c[k], f"< {bound:g}")
    if fit is None:
        raise ConfigError("edge analysis needs a solved wedge or an oracle", {"id": ctx.config.id})
    out.series["edge-coefficient"] = edge_series(fit)
    return out


def geometry(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Combinatorics of the polytope and the closed-form corner angle oracle"""
    out = AnalysisOutcome()
    P = ctx.need_polytope()
    simple = is_simple(P)
    out.output = {"dim": P.dim, "f_vector": P.f_vector(), "simple": simple, "simplicial": is_simplicial(P)}
    if "simple" in req.expect:
        out.check(req, "simple", simple == bool(req.expect["simple"]), simple, req.expect["simple"])
    thetas = {}
    for b in req.params.get("corner_b", []):
        b = float(b)
        H = np.eye(P.dim)
        H[0, 1] = H[1, 0] = b
        theta = theta_functionals(SecondOrderJet.quadratic(H, np.zeros(P.dim)), P).theta_max
        thetas[f"{b:g}"] = theta
        target = angle_of_quadratic_corner(b)
        out.check(req, f"theta[b={b:g}]", _close(theta, target, 1e-9), theta, target)
    if thetas:
        out.output["theta"] = thetas
    return out


def _subsolution(P: Polytope, params: Dict[str, Any], settings: Settings):
    kwargs = {k: params[k] for k in ("C0", "lambda0", "eps0", "delta0", "cos_target") if k in params}
    build = simple_subsolution_3d if P.dim == 3 else planar_subsolution
    return build(P, params.get("quadratics"), settings=settings, **kwargs)


def conditions(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """(C1)-(C5) with phi jets from a constant Hessian or from phi itself"""
    out = AnalysisOutcome()
    P = ctx.need_polytope()
    jets: Any = None
    if "phi_hessian" in req.params:
        H = np.asarray(req.params["phi_hessian"], dtype=float)
        jets = jets_from_hessian(H, skeleton_points(P, req.params.get("per_edge"), ctx.settings)[0])
    elif ctx.phi is not None:
        jets = jets_from_field(ctx.phi, skeleton_points(P, req.params.get("per_edge"), ctx.settings)[0])
    f = ctx.f if ctx.f is not None else ScalarField.constant(float(req.params.get("f", 1.0)))
    sub = _subsolution(P, req.params.get("subsolution_params", {}), ctx.settings).barrier if req.params.get("subsolution") else None
    report = condition_report(P, jets, f, sub, req.params.get("per_edge"), settings=ctx.settings)
    out.output = report.model_dump(mode="json")
    for name, expected in req.expect.items():
        if name == "simple":
            out.check(req, "simple", report.simple == bool(expected), report.simple, expected)
        elif name in report.conditions:
            got = report.conditions[name].passed
            out.check(req, name, got == bool(expected), got, expected)
    return out


def subsolution(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Bump sub-solution on a simple polytope, certified by sampling"""
    out = AnalysisOutcome()
    P = ctx.need_polytope()
    sub = _subsolution(P, req.params, ctx.settings)
    out.output = {"report": sub.report.model_dump(), "barrier": sub.barrier.describe()}
    out.check(req, "strong_a_condition", sub.report.strong_a_condition, max(sub.report.vertex_theta), "< pi/2")
    out.check(req, "convex", sub.report.convex, sub.report.min_hessian_eigenvalue, ">= 0")
    if "derivative_tol" in req.params:
        probes = interior_grid(P, 512, cap=9)
        dc = derivative_check(sub.barrier, probes, float(req.params.get("derivative_step", 1e-5)), float(req.params["derivative_tol"]))
        out.output["derivative_check"] = dc.model_dump()
        out.check(req, "derivatives", dc.passed, max(dc.gradient_error, dc.hessian_error), req.params["derivative_tol"])
    return out


def barrier(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Explicit small-f barrier; an expected error code counts as the outcome"""
    out = AnalysisOutcome()
    P = ctx.need_polytope()
    keys = ("delta", "anchor", "kappa", "omega", "eps0", "C0", "bulk", "bulk_weight", "ramp_start", "ramp_width")
    kwargs = {k: req.params[k] for k in keys if k in req.params}
    expected_error = req.expect.get("error")
    try:
        result = small_f_barrier(P, ctx.f, ctx.phi, strict=False, settings=ctx.settings, **kwargs)
    except MapolyError as e:
        if expected_error is None:
            raise
        out.output = {"error": e.to_dict()}
        out.check(req, "error", e.code == expected_error, e.code, expected_error)
        return out
    out.output = {"report": result.report.model_dump(), "barrier": result.barrier.describe()}
    if expected_error is not None:
        out.check(req, "error", False, None, expected_error)
    if "passed" in req.expect:
        out.check(req, "certified", result.report.passed == bool(req.expect["passed"]), result.report.passed, req.expect["passed"])
    return out


def counterexample(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Exactness of the profile anchors and the ordering F <= F~ <= det D2phi"""
    out = AnalysisOutcome()
    k_max = int(req.params.get("k_max", 10))
    profiles = counterexample_rhs(k_max)
    anchors = [3.0 / 2.0 ** (k + 2) for k in range(1, k_max + 1)]
    G_err = float(np.max(np.abs(profiles.G(np.array(anchors)) - (1.0 - np.array(anchors)))))
    Gt_err = float(np.max(np.abs(profiles.G_tilde(np.array(anchors)) - (1.0 - np.array(anchors)))))
    out.check(req, "G_anchors", G_err == 0.0, G_err, 0.0)
    out.check(req, "G_tilde_anchors", Gt_err == 0.0, Gt_err, 0.0)

    t = np.linspace(0.0, 0.5, 20001)
    order_gap = float(np.max(profiles.G(t) - profiles.G_tilde(t)))
    out.check(req, "G_below_G_tilde", order_gap <= 1e-15, order_gap, "<= 0")
    lips = {"G": profiles.G.lipschitz_constant(), "G_tilde": profiles.G_tilde.lipschitz_constant()}
    out.check(req, "lipschitz", max(lips.values()) <= 3.0, lips, "<= 3")

    eps0 = float(req.params.get("eps0", 0.1))
    delta = float(req.params.get("delta", 0.5))
    bump, h_profile = corner_bump(eps0), barrier_h_profile(delta)
    jumps = [bump.jump(nu)[0] for nu in range(3)] + [h_profile.jump(nu)[0] for nu in range(3)]
    out.check(req, "profile_continuity", max(jumps) <= 0.0, max(jumps), "<= 1e-12 relative")

    mus = [mu_k(k) for k in range(1, k_max + 1)]
    out.check(req, "mu_increasing", all(b > a for a, b in zip(mus, mus[1:])) and mus[-1] < 0.5, mus[-1], "< 1/2")

    bundle = counterexample_bundle(int(req.params.get("bundle_k_max", 6)), float(req.params.get("lambda0", 0.02)))
    pts = interior_grid(bundle.polytope, int(req.params.get("samples", 20**3)))
    F, Ft, D = bundle.F(pts), bundle.F_tilde(pts), bundle.det_phi(pts)
    out.check(req, "F_below_F_tilde", float(np.max(F - Ft)) <= 1e-12, float(np.max(F - Ft)), "<= 0")
    out.check(req, "F_tilde_below_det", float(np.max(Ft - D)) <= 1e-12, float(np.max(Ft - D)), "<= 0")
    V = bundle.polytope.vertices
    vertex_gap = float(np.max(np.abs(bundle.F(V) - bundle.det_phi(V))))
    out.check(req, "vertex_equality", vertex_gap <= 1e-12, vertex_gap, 0.0)
    out.output = {"k_max": k_max, "anchors": anchors, "lipschitz": lips, "mu": mus, "samples": len(pts)}
    return out


def interpolation(ctx: ExperimentContext, req: AnalysisRequest) -> AnalysisOutcome:
    """Measured derivative norms never exceed the interpolation bounds"""
    out = AnalysisOutcome()
    family = polynomial_family(int(req.params.get("count", 100)), int(req.params.get("max_degree", 5)), int(req.params.get("seed", ctx.settings.seed)))
    alphas = [float(a) for a in req.params.get("alphas", [1.0, 0.5])]
    violations = 0
    worst_ratio = 0.0
    for alpha in alphas:
        for f in family:
            result = check_interpolation(f, alpha)
            violations += not result.passed
            q, b = result.quantities, result.bounds
            worst_ratio = max(worst_ratio, q.derivative_sup / b.sup_bound, q.derivative_holder_half / b.holder_half_bound)
    out.output = {"functions": len(family), "alphas": alphas, "violations": violations, "worst_ratio": worst_ratio}
    out.check(req, "violations", violations == 0, violations, 0)
    return out


ANALYSES: Dict[str, Callable[[ExperimentContext, AnalysisRequest], AnalysisOutcome]] = {
    "refinement": refinement,
    "sandwich": sandwich,
    "pin": pin,
    "corner": corner,
    "hessian-trend": hessian_trend,
    "comparison": comparison,
    "eigen": eigen,
    "edge": edge,
    "geometry": geometry,
    "conditions": conditions,
    "subsolution": subsolution,
    "barrier": barrier,
    "counterexample": counterexample,
    "interpolation": interpolation,
}
