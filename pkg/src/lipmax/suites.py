"""Verification suites driven by a RunConfig; each returns a BoundCheckReport."""
import warnings
from functools import cached_property

import numpy as np

from .calderon import calderon_norm_lower_bound, verify_calderon_properties
from .config import SUITES
from .errors import ConfigurationError
from .extension import build_bump, compute_k1, extend_h12, verify_eta
from .fem import FESpace
from .geometry import (build_partition_of_unity, graph_character, lipschitz_character, make_wedge,
                       propose_chart_directions, star_character)
from .maxwell import (MaterialTensors, MultipoleIncident, SphereScattering, assemble, coercivity_constants,
                      hcurl_error, material_deviation, solution_bound_constants, solve_interior,
                      verify_form_bounds, verify_solution_bounds)
from .meshes import ball_mesh, shell_mesh, slab_mesh, unit_cube_mesh, wedge_mesh
from .meshfile import load_mesh
from .reports import BoundCheckReport
from .scattering import PanelQuadrature, PlaneWave, evaluate_scattered, exterior_residual, scattered_bounds
from .sobolev import DualNorm, TraceNorm, interpolation_norm
from .surface import GagliardoRule, Surface
from .traces import (TraceDomain, TraceGram, boundary_trace_suite, green_residual, random_smooth_p2,
                     verify_pi_bounds, verify_tangential_trace, verify_trace_inequality)

# published normalization of the cutoff, checked to this absolute tolerance
C_G_REFERENCE = 0.133086
C_G_TOL = 1e-5


def random_smooth_vector(space, rng, n_modes=4, kmax=2.0):
    """Interpolant of a random smooth complex vector field (a few cosine modes)."""
    K = rng.uniform(-kmax, kmax, (n_modes, 3))
    ph = rng.uniform(0, 2 * np.pi, n_modes)
    A = rng.standard_normal((n_modes, 3)) + 1j * rng.standard_normal((n_modes, 3))
    return space.interpolate(lambda x: np.cos(x @ K.T + ph) @ A)


def smooth_boundary_data(mesh, rng, n_modes=4, kmax=2.0):
    """Random smooth real values at the mesh vertices."""
    K = rng.uniform(-kmax, kmax, (n_modes, 3))
    ph = rng.uniform(0, 2 * np.pi, n_modes)
    a = rng.standard_normal(n_modes)
    return np.cos(mesh.vertices @ K.T + ph) @ a


class Context:
    """Lazily built shared objects (mesh, character, k1, ...) for one run."""

    def __init__(self, cfg):
        self.cfg = cfg

    def rng(self, suite):
        return np.random.default_rng([self.cfg["seed"], SUITES.index(suite)])

    @cached_property
    def domain_label(self):
        kind = self.cfg["domain.kind"]
        return f"wedge:{self.cfg['domain.alpha']:.6g}" if kind == "wedge" else kind

    @cached_property
    def mesh(self):
        c = self.cfg
        kind, n = c["domain.kind"], c["domain.n"]
        if kind == "wedge":
            return wedge_mesh(c["domain.alpha"], n=n)
        if kind == "cube":
            return unit_cube_mesh(n)
        if kind == "slab":
            return slab_mesh(c["domain.depth"], c["domain.h"])
        if kind == "sphere":
            return ball_mesh(2 * max(1, n // 2))
        return load_mesh(c["mesh.path"])

    @cached_property
    def graph_roles(self):
        """(graph charts, truncation charts, charts where graph-test fields vanish)."""
        kind = self.cfg["domain.kind"]
        if kind == "wedge":
            return (0, 1), (2,), (2, 3, 4, 5, 6)
        if kind in ("cube", "slab"):
            return (4,), (5,), (0, 1, 2, 3, 5)
        return None, (), ()

    @cached_property
    def directions(self):
        return propose_chart_directions(self.mesh)

    @cached_property
    def character(self):
        return lipschitz_character(self.mesh, self.directions)

    @cached_property
    def cover_character(self):
        """Character of the vertex-star cover: admissible for the whole boundary."""
        return star_character(self.mesh)

    @cached_property
    def graph_char(self):
        graph = self.graph_roles[0]
        return None if graph is None else graph_character(self.mesh, graph)

    @cached_property
    def bump(self):
        return build_bump()

    @cached_property
    def k1_info(self):
        return compute_k1(self.bump)

    @property
    def k1(self):
        return self.k1_info.k1

    @cached_property
    def partition(self):
        return build_partition_of_unity(self.mesh)

    @cached_property
    def material(self):
        c = self.cfg
        return MaterialTensors(c["material.epsilon"], c["material.mu"], c["material.k0"])

    @cached_property
    def incident(self):
        c = self.cfg
        k0, L = c["material.k0"], c["calderon.L"]
        kind = c["incident.kind"]
        if kind == "none":
            return None
        if kind == "plane":
            return PlaneWave(c["incident.direction"], c["incident.polarization"], k0).scaled(c["incident.amplitude"])
        l, m = c["incident.l"], c["incident.m"]
        if l > L or abs(m) > l:
            raise ConfigurationError(f"incident.l/incident.m: ({l}, {m}) is not a multipole with l <= calderon.L")
        idx = l * l - 1 + (m + l)
        A = np.zeros(L * (L + 2), complex)
        B = np.zeros_like(A)
        (A if c["incident.type"] == "M" else B)[idx] = c["incident.amplitude"]
        return MultipoleIncident(L, A, B, k0)

    @cached_property
    def ball(self):
        return ball_mesh(self.cfg["maxwell.mesh_n"])

    @cached_property
    def ball_character(self):
        return star_character(self.ball)

    @cached_property
    def system(self):
        c = self.cfg
        return assemble(self.material, self.ball, c["calderon.L"], incident=self.incident)

    @cached_property
    def solution(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return solve_interior(self.system, self.cfg["solver.method"], self.cfg["solver.tol"])

    @cached_property
    def C_est(self):
        c = self.cfg
        return calderon_norm_lower_bound(c["calderon.L"], c["material.k0"], self.system.projector.R)["C_est"]


# --- suites -------------------------------------------------------------------------

def run_geometry(ctx):
    mesh, ch, cfg = ctx.mesh, ctx.character, ctx.cfg
    rep = BoundCheckReport(meta={"domain": ctx.domain_label})
    vol = mesh.signed_volumes
    rep.add("mesh_orientation", 0.0, float(vol.min()), constants={"n_tets": len(mesh.tets)}, mesh_h=mesh.h)
    for name, c in (("chart", ch), ("cover", ctx.cover_character)):
        rep.add(f"character_graph_constant_{name}", abs(c.M - np.tan(c.theta)), 1e-12 * max(1.0, c.M),
                constants={"M": c.M, "theta": c.theta, "beta": c.beta}, mesh_h=mesh.h)
    # the cover of the whole boundary is at least as steep as any single chart direction
    rep.add("cover_dominates_graph", ctx.graph_char.theta if ctx.graph_char else 0.0,
            ctx.cover_character.theta + 1e-12, mesh_h=mesh.h)
    if cfg["domain.kind"] == "wedge":
        a = cfg["domain.alpha"]
        gc = ctx.graph_char
        err = abs(np.cos(gc.theta) - np.sin(a / 2))
        rep.add("wedge_angle_identity", err, 1e-12, constants={"alpha": a, "theta": gc.theta}, mesh_h=mesh.h)
    pu = ctx.partition
    x, _ = mesh.quadrature_points(cfg["quad.volume_order"])
    eta = pu.evaluate(x.reshape(-1, 3))
    rep.add("partition_unity", float(np.abs((eta ** 2).sum(axis=1) - 1.0).max()), 1e-12,
            constants={"n_charts": len(pu.chart_ids)}, mesh_h=mesh.h)
    cent = mesh.vertices[mesh.bfaces].mean(axis=1)
    eta_c = pu.evaluate(cent)
    foreign = max(float(np.abs(eta_c[mesh.bface_chart != k, j]).max(initial=0.0))
                  for j, k in enumerate(pu.chart_ids))
    rep.add("partition_support", foreign, 1e-12, constants={}, mesh_h=mesh.h)
    return rep


def run_norms(ctx):
    cfg, rng = ctx.cfg, ctx.rng("norms")
    rep = BoundCheckReport(meta={"domain": ctx.domain_label})
    info = ctx.k1_info
    rep.add("bump_normalization", abs(ctx.bump.C_g - C_G_REFERENCE), C_G_TOL,
            constants={"C_g": ctx.bump.C_g, "reference": C_G_REFERENCE})
    rep.add("k1_routes", abs(info.k1_fft - info.k1_quad) / info.k1_quad, 1e-3,
            constants={"k1_fft": info.k1_fft, "k1_quad": info.k1_quad})
    n_eta = min(cfg["samples"], 5)
    g = np.arange(16) / 16 * cfg["eta.box"]
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    for i in range(n_eta):
        k = rng.integers(-3, 4, (3, 2))
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        w = sum(a[j] * np.exp(2j * np.pi * (k[j, 0] * X1 + k[j, 1] * X2) / cfg["eta.box"]) for j in range(3))
        _, r = verify_eta(w, ctx.bump, cfg["eta.box"], ctx.k1)
        for c in r.checks:
            c.seed = cfg["seed"]
        rep.extend(r)
    mesh = ctx.mesh
    dual = DualNorm(Surface.from_mesh(mesh), order=cfg["quad.surface_order"], levels=cfg["gagliardo.levels"])
    V = FESpace(mesh, "P1")
    for i in range(cfg["samples"]):
        F = rng.standard_normal(len(dual.used)) + 1j * rng.standard_normal(len(dual.used))
        v = rng.standard_normal(len(dual.used)) + 1j * rng.standard_normal(len(dual.used))
        lhs = abs(np.vdot(v, F))
        rhs = dual.norm_of_functional(F) * np.sqrt(np.real(np.vdot(v, dual.gram @ v)))
        rep.add("dual_pairing", lhs, rhs, mesh_h=mesh.h, seed=cfg["seed"], tol=1e-10 * rhs)
        u = V.random(rng)
        n0, nh, n1 = (interpolation_norm(u, s) for s in (0.0, 0.5, 1.0))
        rep.add("interpolation_monotone_low", n0, nh, mesh_h=mesh.h, seed=cfg["seed"], tol=1e-10 * nh)
        rep.add("interpolation_monotone_high", nh, n1, mesh_h=mesh.h, seed=cfg["seed"], tol=1e-10 * n1)
    return rep


def trace_suite(mesh, character, k1, graph_roles, n_fields, rng, seed=0, levels=1, graph_char=None):
    """All trace inequalities on ``n_fields`` seeded random fields of one domain.

    ``character`` must come from an admissible cover of the boundary (see
    :func:`star_character`); ``graph_char`` is the character of the graph faces.
    """
    graph, trunc, vanish = graph_roles
    dom = TraceDomain(mesh, character, graph, trunc, graph_char)
    gram = TraceGram(FESpace(mesh, "P2"), levels=levels)
    rep = BoundCheckReport()
    fields = [random_smooth_p2(mesh, rng) for _ in range(n_fields)]
    for u in fields:
        rep.extend(verify_trace_inequality(u, dom, "h12_trace", seed=seed, rule=gram))
    rep.extend(boundary_trace_suite(fields, dom, seed=seed))
    if graph is not None:
        for _ in range(n_fields):
            u = random_smooth_p2(mesh, rng, vanish_charts=vanish)
            rep.extend(verify_trace_inequality(u, dom, "graph_trace", seed=seed))
    E = FESpace(mesh, "edge")
    dual = DualNorm(Surface.from_mesh(mesh), levels=levels)
    tn = TraceNorm(mesh)
    for _ in range(n_fields):
        u = random_smooth_vector(E, rng)
        v = random_smooth_vector(E, rng)
        rep.extend(verify_pi_bounds(u, character, k1, dual=dual, seed=seed))
        rep.extend(verify_tangential_trace(u, character, k1, tn, seed=seed))
        g = green_residual(u, v)
        scale = max(abs(g["volume"]), abs(g["boundary"]), 1.0)
        rep.add("green_formula", g["residual"], 1e-10 * scale,
                constants={"volume": abs(g["volume"]), "opposite_sign_residual": g["residual_opposite_sign"]},
                mesh_h=mesh.h, seed=seed)
    return rep


def run_traces(ctx):
    cfg = ctx.cfg
    rep = trace_suite(ctx.mesh, ctx.cover_character, ctx.k1, ctx.graph_roles, cfg["samples"], ctx.rng("traces"),
                      cfg["seed"], cfg["gagliardo.levels"], ctx.graph_char)
    rep.meta["domain"] = ctx.domain_label
    return rep


def run_extension(ctx):
    cfg, mesh, rng = ctx.cfg, ctx.mesh, ctx.rng("extension")
    rep = BoundCheckReport(meta={"domain": ctx.domain_label})
    rule = GagliardoRule(Surface.from_mesh(mesh), 0.5, cfg["quad.surface_order"], cfg["gagliardo.levels"])
    for _ in range(cfg["samples"]):
        g = smooth_boundary_data(mesh, rng)
        _, r = extend_h12(g, mesh, ctx.partition, ctx.directions, ctx.character, ctx.bump, ctx.k1,
                          grid_n=cfg["eta.grid_n"], seed=cfg["seed"], rule=rule)
        rep.extend(r)
    return rep


def run_calderon(ctx):
    cfg = ctx.cfg
    rep = BoundCheckReport(meta={"L": cfg["calderon.L"]})
    for x in cfg["calderon.k0R"]:
        r = verify_calderon_properties(cfg["calderon.L"], x, 1.0, seed=cfg["seed"], n_samples=cfg["samples"])
        for c in r.checks:
            c.constants = dict(c.constants, k0R=x)
        rep.extend(r)
    return rep


def run_maxwell(ctx):
    cfg = ctx.cfg
    inc = ctx.incident
    if inc is None:
        raise ConfigurationError("incident.kind: the maxwell suite needs an incident field")
    rep = BoundCheckReport(meta={"domain": "ball", "mesh_n": cfg["maxwell.mesh_n"]})
    rep.extend(verify_form_bounds(ctx.system, ctx.ball_character, ctx.k1, seed=cfg["seed"],
                                  n_samples=cfg["samples"], C_est=ctx.C_est))
    rep.extend(verify_solution_bounds(ctx.solution, inc, ctx.ball_character, ctx.k1, ctx.C_est, seed=cfg["seed"]))
    if isinstance(inc, MultipoleIncident):
        eps, mu = cfg["material.epsilon"], cfg["material.mu"]
        sc = SphereScattering(inc.L, inc.A, inc.B, inc.k0, ctx.system.projector.R, eps, mu)
        err, rel = hcurl_error(ctx.solution.E, sc.interior_E, sc.interior_curl_E)
        rep.add("manufactured_hcurl_error", rel, np.nan, mesh_h=ctx.ball.h, seed=cfg["seed"],
                constants={"absolute": err}, note="informational: no bound asserted", skipped=True)
    return rep


def run_scattering(ctx):
    cfg = ctx.cfg
    inc = ctx.incident
    if inc is None:
        raise ConfigurationError("incident.kind: the scattering suite needs an incident field")
    rep = BoundCheckReport(meta={"domain": "ball"})
    R, k0, L = ctx.system.projector.R, cfg["material.k0"], cfg["calderon.L"]
    obs = shell_mesh(cfg["observe.radius"], cfg["observe.radius"] + 1.0, level=cfg["observe.region_level"], layers=2)
    rep.extend(scattered_bounds(ctx.solution, inc, ctx.ball_character, ctx.k1, ctx.C_est, obs, seed=cfg["seed"]))
    # representation formula against the closed-form outgoing field of the computed trace
    m = ctx.system.projector.coefficients(ctx.solution.E.coeffs - ctx.system.space.interpolate(inc.E).coeffs, k0)
    rng = ctx.rng("scattering")
    d = rng.standard_normal((cfg["observe.points"], 3))
    x = cfg["observe.radius"] * R * d / np.linalg.norm(d, axis=1, keepdims=True)
    quad = PanelQuadrature.sphere(3, R, order=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        Es = evaluate_scattered(x, m, quad, k0)
    exact = m.field(x)[0]
    rel = float(np.linalg.norm(Es - exact) / max(np.linalg.norm(exact), 1e-300))
    rep.add("representation_formula", rel, 1e-3, constants={"panels": 20 * 4 ** 3, "radius": cfg["observe.radius"]},
            seed=cfg["seed"])
    res = exterior_residual(m.field, x[: min(len(x), 10)], k0)
    for key in ("curl_E_rel", "curl_H_rel", "helmholtz_rel"):
        rep.add(f"exterior_residual_{key[:-4]}", float(res[key].max()), 1e-4, constants={"h_fd": res["h_fd"]},
                seed=cfg["seed"])
    return rep


def sweep_constant(alpha, k1, C, C_est, dev, k0):
    """Main-bound constant for the wedge of opening ``alpha`` (graph character of the wedge)."""
    _, ch = make_wedge(alpha)
    return solution_bound_constants(ch, k1, C, C_est, dev, k0), ch


def run_sweep(ctx):
    cfg = ctx.cfg
    k0, L = cfg["material.k0"], cfg["calderon.L"]
    mat = ctx.material
    C = coercivity_constants(mat, strict=False)
    probe = unit_cube_mesh(1)
    dev = material_deviation(mat, probe)
    C_est = calderon_norm_lower_bound(L, k0, 1.0)["C_est"]
    rep = BoundCheckReport(meta={"k0": k0, "L": L})
    alphas, consts = [], []
    for a in cfg["sweep.alphas"]:
        c, ch = sweep_constant(a, ctx.k1, C, C_est, dev, k0)
        mesh = wedge_mesh(a, n=cfg["domain.n"])
        dom = TraceDomain(mesh, star_character(mesh), (0, 1), (2,), graph_character(mesh, (0, 1)))
        rng = np.random.default_rng([cfg["seed"], SUITES.index("sweep"), len(alphas)])
        u = random_smooth_p2(mesh, rng, vanish_charts=(2, 3, 4, 5, 6))
        r = verify_trace_inequality(u, dom, "graph_trace", seed=cfg["seed"])
        chk = r.checks[0]
        chk.inequality_id = "sweep_graph_trace"
        chk.constants = dict(chk.constants, alpha=a, main_constant=float(c["main_constant"]),
                             M=ch.M, M_factor=ch.lipschitz_factor)
        rep.extend(r)
        alphas.append(a)
        consts.append(float(c["main_constant"]))
    if len(alphas) >= 2 and np.all(np.isfinite(consts)):
        slope = float(np.polyfit(np.log(alphas), np.log(consts), 1)[0])
        rep.add("sweep_slope", abs(slope + 2.0) / 2.0, 0.15,
                constants={"slope": slope, "expected": -2.0, "alphas": alphas, "main_constants": consts})
    return rep


RUNNERS = {"geometry": run_geometry, "norms": run_norms, "traces": run_traces, "extension": run_extension,
           "calderon": run_calderon, "maxwell": run_maxwell, "scattering": run_scattering, "sweep": run_sweep}
