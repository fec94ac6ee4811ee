"""Trace operators, flattening maps, surface calculus, Green's formula and the trace
inequality verifiers."""
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigurationError, ScopeError
from .fem import DiscreteField, FESpace, boundary_points, volume_points
from .geometry import TetMesh
from .quadrature import tri_rule
from .reports import BoundCheckReport
from .sobolev import DualNorm, TraceNorm, gagliardo_norm, volume_norms
from .surface import BoundaryField, GagliardoRule, Surface, trace_sampler

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class TraceBundle:
    x: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    faces: np.ndarray
    gamma: np.ndarray = None
    gamma_t: np.ndarray = None
    pi: np.ndarray = None
    gamma_n: np.ndarray = None


def traces_of_values(values, normals):
    """(gamma_t, pi, gamma_n) of vector values against unit normals."""
    gt = np.cross(normals, values)
    gn = np.einsum("nd,nd->n", normals, values)
    pi = values - gn[:, None] * normals  # equals nu x (u x nu)
    return gt, pi, gn


def boundary_traces(u, order=3):
    """Traces of a discrete field at boundary quadrature points (owner-tet limits)."""
    ps = boundary_points(u.mesh, order)
    val = u.values_at(ps.tets, ps.bary)
    if val.ndim == 1:
        return TraceBundle(ps.x, ps.w, ps.normals, ps.faces, gamma=val)
    gt, pi, gn = traces_of_values(val, ps.normals)
    return TraceBundle(ps.x, ps.w, ps.normals, ps.faces, gamma_t=gt, pi=pi, gamma_n=gn)


# --- trace inequalities ---------------------------------------------------------------

@dataclass(frozen=True)
class TraceDomain:
    """A meshed domain with its Lipschitz character and the roles of its boundary charts.

    ``graph_charts`` carry the Lipschitz graph; ``truncation_charts`` are artificial
    faces where test fields must be negligible.  Remaining charts are lateral faces of
    a periodic cell and are ignored (per-unit-area statements).  ``character`` is the
    character of an admissible cover of the whole boundary; ``graph_character`` (defaults
    to ``character``) is that of the graph part alone.
    """

    mesh: TetMesh
    character: object
    graph_charts: tuple = None
    truncation_charts: tuple = ()
    graph_character: object = None


class TraceGram:
    """Precomputed H^{1/2}(boundary) Gram for traces of one scalar nodal space.

    Equivalent to evaluating the Gagliardo rule on each trace, but amortized over a
    suite of fields on the same mesh.
    """

    def __init__(self, space, order=3, levels=1):
        self.space = space
        self.rule = GagliardoRule(Surface.from_mesh(space.mesh), 0.5, order, levels)
        self.dofs, self.G = self.rule.trace_gram(space)

    def norm(self, u):
        c = u.coeffs[self.dofs]
        return float(np.sqrt(max(np.real(np.vdot(c, self.G @ c)), 0.0)))


def _boundary_l2sq(u, mesh, charts=None, order=3):
    faces = None if charts is None else np.nonzero(np.isin(mesh.bface_chart, list(charts)))[0]
    ps = boundary_points(mesh, order, faces)
    val = u.values_at(ps.tets, ps.bary)
    return float(np.sum(ps.w * np.abs(val) ** 2))


def verify_trace_inequality(u, domain, which="graph_trace", C=None, truncation_tol=1e-4,
                            seed=None, order=4, gagliardo_levels=1, rule=None):
    """Check one of the scalar trace inequalities for the nodal field ``u``.

    graph_trace: ``||u||^2_{L2(graph)} <= (2 / cos theta) ||u|| ||grad u||``, plus the explicit
    allowance ``sec(theta) ||u||^2_{L2(truncation)}`` for the artificial top face.
    boundary_trace: ``||u||^2_{L2(boundary)} <= (1/beta) ||u|| (2 ||grad u|| + C ||u||)``; when ``C``
    is None the smallest admissible C for this field is reported and used.
    h12_trace: ``||u||_{H^1/2(boundary)} <= pi sqrt(1 + 2 M^2) max_k sec(theta_k) ||u||_{H1}``.
    """
    if domain.character is None:
        raise ConfigurationError("domain has no Lipschitz character")
    if u.space.kind not in ("P1", "P2"):
        raise CapabilityError("trace inequalities need a scalar nodal field")
    mesh, ch = domain.mesh, domain.character
    norms = volume_norms(u, order)
    nu, ng = norms["L2"], norms["H1_semi"]
    rep = BoundCheckReport(meta={"which": which})
    if which == "graph_trace":
        ch = domain.graph_character if domain.graph_character is not None else ch
        if ng <= 1e-14 * max(nu, 1e-300):
            raise ScopeError("the graph trace bound needs a field decaying away from the graph; "
                             "constant fields are outside its scope")
        graph = domain.graph_charts
        lhs = _boundary_l2sq(u, mesh, graph)
        if domain.truncation_charts:
            trunc = _boundary_l2sq(u, mesh, domain.truncation_charts)
            if trunc > truncation_tol * lhs:
                raise ScopeError(f"field is not negligible on truncation faces "
                                 f"(ratio {trunc / lhs:.2e} > {truncation_tol:.1e})")
        else:
            trunc = 0.0
        sec = 1.0 / np.cos(ch.theta)
        core = 2.0 * sec * nu * ng
        # vertical segments end on the truncation face: the 1D identity behind the
        # bound picks up exactly sec(theta) * ||u||^2 there, reported as an allowance
        allowance = sec * trunc
        rep.add("graph_trace", lhs, core + allowance,
                constants={"sec_theta": sec, "norm_L2": nu, "norm_grad": ng, "rhs_core": core,
                           "truncation_allowance": allowance,
                           "truncation_ratio": trunc / lhs if lhs else 0.0,
                           "ratio_lhs_rhs_core": lhs / core},
                mesh_h=mesh.h, seed=seed, tol=1e-12 * core)
    elif which == "boundary_trace":
        lhs = _boundary_l2sq(u, mesh)
        beta = ch.beta
        c_emp = max(0.0, (beta * lhs - 2.0 * nu * ng) / nu ** 2) if nu > 0 else 0.0
        Cuse = c_emp if C is None else C
        rhs = (nu * (2.0 * ng + Cuse * nu)) / beta
        rep.add("boundary_trace", lhs, rhs, constants={"beta": beta, "C": Cuse, "C_empirical": c_emp,
                                               "norm_L2": nu, "norm_grad": ng},
                mesh_h=mesh.h, seed=seed, tol=1e-10 * max(rhs, lhs))
    elif which == "h12_trace":
        if rule is None:
            lhs = gagliardo_norm(u, 0.5, levels=gagliardo_levels)
        elif isinstance(rule, TraceGram):
            lhs = rule.norm(u)
        else:
            lhs = rule.norm(trace_sampler(rule.surface, u))
        fac = np.pi * ch.lipschitz_factor * ch.max_sec
        rhs = fac * norms["H1"]
        rep.add("h12_trace", lhs, rhs, constants={"pi": np.pi, "lipschitz_factor": ch.lipschitz_factor,
                                               "max_sec_theta_k": ch.max_sec, "norm_H1": norms["H1"]},
                mesh_h=mesh.h, seed=seed)
    else:
        raise ConfigurationError(f"unknown trace inequality '{which}'")
    return rep


def boundary_trace_suite(fields, domain, seed=None):
    """Run the boundary trace bound over a field suite with the smallest constant valid for all fields."""
    reps = [verify_trace_inequality(u, domain, "boundary_trace", seed=seed) for u in fields]
    c_suite = max(r.checks[0].constants["C_empirical"] for r in reps)
    out = BoundCheckReport(meta={"C_suite": c_suite})
    for u in fields:
        out.extend(verify_trace_inequality(u, domain, "boundary_trace", C=c_suite, seed=seed))
    out.meta["C_suite"] = c_suite
    return out


def random_smooth_p2(mesh, rng, n_modes=6, kmax=3.0, vanish_charts=()):
    """Random smooth P2 field (a few random cosine modes) with zero dofs on given charts."""
    V = FESpace(mesh, "P2")
    K = rng.uniform(-kmax, kmax, (n_modes, 3))
    ph = rng.uniform(0, 2 * np.pi, n_modes)
    a = rng.standard_normal(n_modes)
    u = V.interpolate(lambda x: np.cos(x @ K.T + ph) @ a)
    c = u.coeffs.copy()
    if vanish_charts:
        c[p2_face_dofs(mesh, vanish_charts)] = 0.0
    return DiscreteField(V, c.real.astype(complex))


def p2_face_dofs(mesh, charts):
    """P2 dof ids (vertices and edge midpoints) lying on faces of the given charts."""
    sel = np.isin(mesh.bface_chart, list(charts))
    f = mesh.bfaces[sel]
    verts = np.unique(f)
    uniq, _ = mesh.edges
    lookup = {tuple(e): i for i, e in enumerate(uniq)}
    ed = np.sort(f[:, [[0, 1], [1, 2], [0, 2]]].reshape(-1, 2), axis=1)
    eids = np.unique([lookup[tuple(e)] for e in ed])
    return np.concatenate([verts, len(mesh.vertices) + eids])


# --- flattening -----------------------------------------------------------------------

def flatten_maps(u, mesh, phi, graph_charts, g=None, order=4, gagliardo_levels=1):
    """Flattening ``T_phi u(x', x3) = u(x', x3 + phi(x'))`` and ``S_phi`` on the graph face.

    ``phi`` maps (n, 2) horizontal points to heights and must be affine on every tet.
    Returns the flattened field, the flat surface data and a report with the H1 check
    ``||T_phi u||_{H1} <= sqrt(1 + 2 M^2) ||u||_{H1}`` and the boundary check
    ``||S_phi^{-1} w||_{H^1/2(graph)} <= sec(theta) ||w||_{H^1/2(flat)}`` for ``w = g``
    (defaults to the trace of ``u`` pulled to the plane).
    """
    v = mesh.vertices
    flat_v = v - np.column_stack([np.zeros((len(v), 2)), phi(v[:, :2])])
    try:
        flat = TetMesh(flat_v, mesh.tets, mesh.bfaces, mesh.bface_chart, dict(mesh.chart_names))
    except Exception as exc:  # the shear folded some tet: not a graph mesh
        raise CapabilityError(f"mesh is not a graph mesh for this phi: {exc}") from exc
    gsel = np.isin(mesh.bface_chart, list(graph_charts))
    base = flat_v[mesh.bfaces[gsel]][..., 2]
    if np.abs(base).max() > 1e-10 * max(1.0, np.abs(v).max()):
        raise CapabilityError("graph faces do not flatten onto x3 = 0")
    # affine shear per tet: P2 interpolant pulls back to the same coefficients
    Tu = DiscreteField(FESpace(flat, u.space.kind), u.coeffs)
    n_u = volume_norms(u, order)["H1"]
    n_t = volume_norms(Tu, order)["H1"]

    faces = mesh.bfaces[gsel]
    graph_surf = Surface(v, faces)
    flat_surf = Surface(flat_v, faces)
    if g is None:
        samp = trace_sampler(Surface.from_mesh(mesh), u)
        idx = np.nonzero(gsel)[0]

        def g_graph(fid, bary):
            return samp(idx[fid], bary)
        g_flat = g_graph  # same values at corresponding (face, bary) points
    else:
        def g_graph(fid, bary):
            x = graph_surf.points(fid, bary)
            return np.asarray(g(x[:, :2]), complex)
        g_flat = g_graph
    lhs_b = GagliardoRule(graph_surf, 0.5, 3, gagliardo_levels).norm(g_graph)
    rhs_w = GagliardoRule(flat_surf, 0.5, 3, gagliardo_levels).norm(g_flat)
    nrm = mesh.normals[gsel]
    cos_t = float(np.min(np.abs(nrm[:, 2])))
    M = float(np.max(np.sqrt(1.0 / cos_t ** 2 - 1.0)))
    fac = np.sqrt(1.0 + 2.0 * M ** 2)
    rep = BoundCheckReport()
    rep.add("flatten_H1", n_t, fac * n_u, constants={"sqrt(1+2M^2)": fac, "M": M,
                                                    "norm_u_H1": n_u, "norm_Tu_H1": n_t},
            mesh_h=mesh.h, tol=1e-10 * n_u)
    rep.add("flatten_H12", lhs_b, rhs_w / cos_t, constants={"sec_theta": 1.0 / cos_t,
                                                           "norm_flat": rhs_w},
            mesh_h=mesh.h, tol=1e-10 * rhs_w)
    return {"T_phi_u": Tu, "flat_mesh": flat, "graph_surface": graph_surf,
            "flat_surface": flat_surf, "report": rep}


# --- Green's formula ------------------------------------------------------------------

def _as_pair(f):
    """(values(tets, bary, x), curl(tets, bary, x)) accessors for a field or callable pair."""
    if isinstance(f, DiscreteField):
        return (lambda t, b, x: f.values_at(t, b)), (lambda t, b, x: f.curl_at(t, b))
    val, curl = f
    return (lambda t, b, x: np.asarray(val(x), complex)), (lambda t, b, x: np.asarray(curl(x), complex))


def green_residual(u, v, mesh=None, vol_order=4, surf_order=3):
    """Residual of Green's formula for the curl.

    With ``V = int (u . curl v - v . curl u) dx`` and ``B = int pi(u) . gamma_t(v) dsigma``
    the divergence theorem gives ``V = B``.  Returns the residual ``|V - B|`` together
    with ``V``, ``B`` and ``|V + B|`` (the opposite sign convention) so a sign mismatch is
    visible.  ``u``, ``v`` are DiscreteFields or (field, curl) callable pairs.
    """
    mesh = mesh if mesh is not None else (u.mesh if isinstance(u, DiscreteField) else v.mesh)
    uv, uc = _as_pair(u)
    vv, vc = _as_pair(v)
    ps = volume_points(mesh, vol_order)
    V = np.sum(ps.w * (np.einsum("nd,nd->n", uv(ps.tets, ps.bary, ps.x), vc(ps.tets, ps.bary, ps.x))
                       - np.einsum("nd,nd->n", vv(ps.tets, ps.bary, ps.x), uc(ps.tets, ps.bary, ps.x))))
    bs = boundary_points(mesh, surf_order)
    _, pi_u, _ = traces_of_values(uv(bs.tets, bs.bary, bs.x), bs.normals)
    gt_v, _, _ = traces_of_values(vv(bs.tets, bs.bary, bs.x), bs.normals)
    B = np.sum(bs.w * np.einsum("nd,nd->n", pi_u, gt_v))
    return {"residual": float(abs(V - B)), "volume": complex(V), "boundary": complex(B),
            "residual_opposite_sign": float(abs(V + B))}


# --- surface calculus -----------------------------------------------------------------

def _face_bary_grads(surface):
    p = surface.vertices[surface.faces]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    n = np.cross(e1, e2)
    a2 = np.einsum("nd,nd->n", n, n)
    g1 = np.cross(e2, n) / a2[:, None]
    g2 = np.cross(n, e1) / a2[:, None]
    return np.stack([-g1 - g2, g1, g2], axis=1)  # (nf, 3, 3)


def surface_diff(g, surface):
    """Facetwise surface gradient and vector surface curl (grad_s g x nu) of P1 data."""
    G = _face_bary_grads(surface)
    c = np.asarray(g)[surface.faces]
    grad = np.einsum("fa,fad->fd", c, G)
    return {"grad_surface": grad, "curl_surface": np.cross(grad, surface.normals)}


def surface_div(m, surface=None):
    """Weak surface divergence as a P1 functional: ``<div m, phi_a> = -int m . grad_s phi_a``."""
    surface = surface if surface is not None else m.surface
    G = _face_bary_grads(surface)
    vals = np.asarray(m.values)
    contrib = -np.einsum("n,nd,nad->na", m.weights, vals, G[m.face_ids])
    F = np.zeros(len(surface.vertices), complex)
    np.add.at(F, surface.faces[m.face_ids], contrib)
    return F


def surface_curl_weak(m, surface=None):
    """Weak scalar surface curl ``<curl_s m, phi_a> = -int (m x nu) . grad_s phi_a``."""
    surface = surface if surface is not None else m.surface
    nu = surface.normals[m.face_ids]
    rot = BoundaryField(surface, m.face_ids, m.bary, m.weights, np.cross(np.asarray(m.values), nu),
                        tangential=False)
    return surface_div(rot, surface)


def pi_field(u, order=3):
    """pi(u) as a tangential BoundaryField on the mesh boundary."""
    mesh = u.mesh
    ps = boundary_points(mesh, order)
    _, pi, _ = traces_of_values(u.values_at(ps.tets, ps.bary), ps.normals)
    b, _ = tri_rule(order)
    return BoundaryField(Surface.from_mesh(mesh), ps.faces, np.tile(b, (len(mesh.bfaces), 1)),
                         ps.w, pi, tangential=True)


def extension_constant(character, k1, convention="linear"):
    """The product ``M k1`` with M the H1 distortion factor of the flattening maps."""
    kk = k1 if convention == "linear" else np.sqrt(k1)
    return character.lipschitz_factor * kk


def verify_pi_bounds(u, character, k1, dual=None, seed=None, convention="linear"):
    """Dual-norm bounds for pi(u) and its weak surface curl against ``M k1 ||u||_Hcurl``."""
    mesh = u.mesh
    dual = dual if dual is not None else DualNorm(Surface.from_mesh(mesh))
    pu = pi_field(u)
    lhs1 = dual(pu)
    lhs2 = dual.norm_of_functional(surface_curl_weak(pu)[dual.used])
    nrm = volume_norms(u)["Hcurl"]
    Mk = extension_constant(character, k1, convention)
    rep = BoundCheckReport()
    consts = {"M_factor": character.lipschitz_factor, "k1": k1, "convention": convention,
              "norm_Hcurl": nrm}
    rep.add("pi_dual", lhs1, Mk * nrm, constants=consts, mesh_h=mesh.h, seed=seed)
    rep.add("pi_curl_dual", lhs2, Mk * nrm, constants=consts, mesh_h=mesh.h, seed=seed)
    return rep


def verify_tangential_trace(u, character, k1, trace_norm=None, seed=None, convention="linear"):
    """t_norm(gamma_t u) <= (1 + sqrt 2) M k1 ||u||_Hcurl."""
    tn = trace_norm if trace_norm is not None else TraceNorm(u.mesh)
    lhs = tn.norm_from_dofs(u.coeffs[tn.bdofs])
    nrm = volume_norms(u)["Hcurl"]
    C1 = (1.0 + SQRT2) * extension_constant(character, k1, convention)
    rep = BoundCheckReport()
    rep.add("tangential_trace", lhs, C1 * nrm, constants={"C1": C1, "k1": k1, "norm_Hcurl": nrm,
                                                      "convention": convention},
            mesh_h=u.mesh.h, seed=seed, tol=1e-10 * nrm)
    return rep
