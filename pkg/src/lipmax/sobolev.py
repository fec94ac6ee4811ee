"""Volume Sobolev norms, the Gagliardo boundary norm, and discrete surrogates for the
infimum-type trace norm and the dual H^{-1/2} norm."""
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapabilityError, ConditioningError, InfeasibleTraceError, ParameterError
from .fem import DiscreteField, FESpace, boundary_points, volume_points
from .quadrature import tri_rule
from .surface import BoundaryField, GagliardoRule, Surface, function_sampler, p1_sampler, trace_sampler

NORMS = ("L2", "H1_semi", "H1", "Hcurl")


def volume_norms(u, order=4, which=None):
    """L2, H1 seminorm, H1 and H(curl) graph norms of a discrete field by Gauss quadrature.

    Entries that do not apply to the field's space are omitted, unless requested
    explicitly through ``which``, in which case a CapabilityError is raised.
    """
    kind = u.space.kind
    has_grad = kind in ("P1", "P2", "vectorP1")
    has_curl = kind in ("edge", "vectorP1")
    if which is not None:
        for w in which:
            if w not in NORMS:
                raise ParameterError(f"unknown norm '{w}'")
            if w in ("H1_semi", "H1") and not has_grad:
                raise CapabilityError(f"{w} norm needs a nodal space, got {kind}")
            if w == "Hcurl" and not has_curl:
                raise CapabilityError(f"Hcurl norm needs a vector space, got {kind}")
    ps = volume_points(u.mesh, order)
    val = u.values_at(ps.tets, ps.bary)
    l2 = np.sum(ps.w * np.sum(np.abs(val.reshape(len(ps.w), -1)) ** 2, axis=1))
    out = {"L2": np.sqrt(l2)}
    if has_grad:
        g = u.grad_at(ps.tets, ps.bary)
        semi = np.sum(ps.w * np.sum(np.abs(g.reshape(len(ps.w), -1)) ** 2, axis=1))
        out["H1_semi"] = np.sqrt(semi)
        out["H1"] = np.sqrt(l2 + semi)
    if has_curl:
        c = u.curl_at(ps.tets, ps.bary)
        out["Hcurl"] = np.sqrt(l2 + np.sum(ps.w * np.sum(np.abs(c) ** 2, axis=1)))
    out = {k: float(v) for k, v in out.items()}
    if which is not None:
        out = {k: out[k] for k in which}
    return out


def interpolation_norm(u, s, order=None):
    """Discrete Hilbert-scale norm between L2 (s = 0) and H1 (s = 1) of a nodal field.

    With mass M and H1 Gram K = M + stiffness, ``||u||_s^2 = sum_i lambda_i^s |v_i^T M u|^2``
    over the generalized eigenpairs ``K v = lambda M v``.  Dense; meant for small meshes.
    """
    if u.space.kind not in ("P1", "P2", "vectorP1"):
        raise CapabilityError(f"interpolation norm needs a nodal space, got {u.space.kind}")
    if not (0.0 <= s <= 1.0):
        raise ParameterError(f"s must lie in [0, 1], got {s}")
    M = u.space.assemble("mass", order=order).toarray()
    if s == 0.0:
        return float(np.sqrt(max(np.real(np.vdot(u.coeffs, M @ u.coeffs)), 0.0)))
    K = M + u.space.assemble("grad", order=order).toarray()
    if s == 1.0:
        return float(np.sqrt(max(np.real(np.vdot(u.coeffs, K @ u.coeffs)), 0.0)))
    lam, V = sla.eigh(K, M)
    a = V.T @ (M @ u.coeffs)
    return float(np.sqrt(np.sum(np.maximum(lam, 0.0) ** s * np.abs(a) ** 2)))


def _sampler(g, surface):
    if isinstance(g, DiscreteField):
        return trace_sampler(surface, g)
    if callable(g):
        return function_sampler(surface, g)
    return p1_sampler(surface, g)


def gagliardo_norm(g, s=0.5, surface=None, order=3, levels=1, return_parts=False):
    """``(||g||_{L2}^2 + |g|_{s}^2)^{1/2}`` on a triangulated boundary.

    ``g`` may be a volume DiscreteField (its trace is used), a callable of points, or
    an array of surface P1 nodal values (scalar or (nv, 3) componentwise).
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    if surface is None:
        if not isinstance(g, DiscreteField):
            raise ParameterError("surface is required unless g is a DiscreteField")
        surface = Surface.from_mesh(g.mesh)
    rule = GagliardoRule(surface, s, order, levels)
    sam = _sampler(g, surface)
    l2, semi = rule.l2_norm2(sam), rule.seminorm2(sam)
    val = float(np.sqrt(l2 + max(semi, 0.0)))
    if return_parts:
        return val, {"L2": float(np.sqrt(l2)), "seminorm": float(np.sqrt(max(semi, 0.0)))}
    return val


# --- H^{1/2} dual norm ------------------------------------------------------------

class DualNorm:
    """Riesz representation of the discrete H^{1/2}(boundary) dual norm.

    The primal space is surface P1 with Gram matrix ``mass + Gagliardo seminorm Gram``;
    ``||G||' = sup_v |<G, v>| / ||v||_{H^{1/2}} = sqrt(G^H S^{-1} G)``.
    """

    def __init__(self, surface, s=0.5, order=3, levels=1, cond_max=1e12):
        self.surface = surface
        self.rule = GagliardoRule(surface, s, order, levels)
        mass, semi = self.rule.p1_gram()
        used = surface.used_vertices
        S = (mass + semi)[np.ix_(used, used)]
        S = 0.5 * (S + S.T)
        ev = np.linalg.eigvalsh(S)
        if ev[0] <= 0 or ev[-1] / ev[0] > cond_max:
            raise ConditioningError(f"Gram matrix is singular or ill-conditioned (eigenvalues "
                                    f"{ev[0]:.3e}..{ev[-1]:.3e})")
        self.used = used
        self.gram = S
        self._chol = sla.cho_factor(S)

    def functional(self, g):
        """Load vector ``<g, phi_a>`` of a BoundaryField (or P1 coefficients) against the hat basis."""
        surf = self.surface
        if isinstance(g, BoundaryField):
            A = surf.p1_matrix(g.face_ids, g.bary)
            vals = np.asarray(g.values).reshape(len(g.face_ids), -1)
            F = A.T @ (g.weights[:, None] * vals)
        else:
            c = np.asarray(g, complex)
            fid, bary, w = surf.quadrature(self.rule.order)
            A = surf.p1_matrix(fid, bary)
            vals = (A @ c.reshape(len(surf.vertices), -1))
            F = A.T @ (w[:, None] * vals)
        return np.asarray(F)[self.used]

    def norm_of_functional(self, F):
        F = np.asarray(F).reshape(len(self.used), -1)
        y = sla.cho_solve(self._chol, F)
        return float(np.sqrt(max(np.real(np.sum(np.conj(F) * y)), 0.0)))

    def __call__(self, g):
        return self.norm_of_functional(self.functional(g))


def dual_norm(g, surface=None, s=0.5, order=3, levels=1):
    """Discrete H^{-1/2}-type dual norm of boundary data ``g`` (componentwise for vectors)."""
    if surface is None:
        if isinstance(g, BoundaryField):
            surface = g.surface
        else:
            raise ParameterError("surface is required for nodal data")
    return DualNorm(surface, s, order, levels)(g)


# --- infimum (Tartar-space) surrogate -----------------------------------------------

def _solve_real(lu, b):
    # real factorization applied to complex data
    b = np.asarray(b)
    if np.iscomplexobj(b):
        return lu.solve(np.ascontiguousarray(b.real)) + 1j * lu.solve(np.ascontiguousarray(b.imag))
    return lu.solve(b)


class TraceNorm:
    """Minimum H(curl) norm over discrete edge fields with prescribed boundary-edge dofs.

    The minimum is the Schur complement of the H(curl) Gram matrix onto boundary edges.
    """

    def __init__(self, mesh, order=None):
        self.mesh = mesh
        self.space = FESpace(mesh, "edge")
        G = self.space.hcurl_gram(order).tocsc()
        nb = mesh.boundary_edges
        ni = np.setdiff1d(np.arange(self.space.ndof), nb)
        self.bdofs, self.idofs = nb, ni
        self.G_bb = G[nb][:, nb]
        self.G_bi = G[nb][:, ni]
        self.G_ib = G[ni][:, nb]
        self._lu = spla.splu(G[ni][:, ni].tocsc()) if len(ni) else None
        self._fit = None

    def minimizer(self, xb):
        """Interior dofs minimizing the H(curl) norm for boundary dofs ``xb``."""
        xb = np.asarray(xb, complex)
        if self._lu is None:
            return np.zeros(0, complex)
        return -_solve_real(self._lu, self.G_ib @ xb)

    def norm_from_dofs(self, xb):
        xb = np.asarray(xb, complex)
        if self._lu is None:
            val = np.vdot(xb, self.G_bb @ xb)
        else:
            xi = self.minimizer(xb)
            val = np.vdot(xb, self.G_bb @ xb) + np.vdot(xb, self.G_bi @ xi)
        return float(np.sqrt(max(val.real, 0.0)))

    def schur(self):
        """Dense Schur complement ``S`` with ``||m||_T^2 = xb^H S xb`` (cached)."""
        if getattr(self, "_schur", None) is None:
            S = self.G_bb.toarray().astype(complex)
            if self._lu is not None:
                X = self._lu.solve(self.G_ib.toarray())
                S = S - self.G_bi @ X
            self._schur = 0.5 * (S + S.conj().T)
        return self._schur

    def _trace_matrix(self, order=3):
        """Sparse map from boundary-edge dofs to gamma_t at boundary quadrature points."""
        mesh, V = self.mesh, self.space
        ps = boundary_points(mesh, order)
        phi = V.basis(ps.tets, ps.bary)                      # (n, 6, 3)
        gt = np.cross(ps.normals[:, None, :], phi)           # (n, 6, 3)
        dofs = V.dofmap[ps.tets]
        pos = np.full(V.ndof, -1)
        pos[self.bdofs] = np.arange(len(self.bdofs))
        n = len(ps.w)
        sw = np.sqrt(ps.w)
        rows = (3 * np.arange(n)[:, None, None] + np.arange(3)[None, None, :]).repeat(6, axis=1)
        cols = np.broadcast_to(pos[dofs][:, :, None], rows.shape)
        vals = gt * sw[:, None, None]
        keep = cols >= 0  # interior edges have zero tangential trace on boundary faces
        T = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(3 * n, len(self.bdofs)))
        return ps, T

    def dofs_from_trace(self, m, rtol=1e-6):
        """Boundary-edge dofs whose tangential trace fits ``m`` (a tangential BoundaryField
        or a callable giving nu x U) in the weighted least-squares sense."""
        if self._fit is None:
            ps, T = self._trace_matrix()
            self._fit = (ps, T, spla.splu((T.T @ T).tocsc()))
        ps, T, lu = self._fit
        if isinstance(m, BoundaryField):
            vals = np.asarray(m.values, complex)
            if len(vals) != len(ps.w):
                raise ParameterError("boundary field must use the order-3 boundary rule of the mesh")
        else:
            vals = np.asarray(m(ps.x, ps.normals), complex)
        rhs = (vals * np.sqrt(ps.w)[:, None]).ravel()
        xb = _solve_real(lu, T.T @ rhs)
        res = np.linalg.norm(T @ xb - rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0 and res > rtol * scale:
            raise InfeasibleTraceError(f"data is not a discrete tangential trace "
                                       f"(relative residual {res / scale:.2e})")
        return xb

    def __call__(self, m):
        return self.norm_from_dofs(self.dofs_from_trace(m))


def t_norm(m, mesh=None):
    """Discrete surrogate of the trace-space norm of tangential boundary data ``m``.

    ``m`` is either a DiscreteField on the edge space (its tangential trace is used)
    or a tangential BoundaryField sampled with the order-3 rule on ``mesh``.
    """
    if isinstance(m, DiscreteField):
        tn = TraceNorm(m.mesh)
        return tn.norm_from_dofs(m.coeffs[tn.bdofs])
    if mesh is None:
        mesh = m.surface.mesh
    return TraceNorm(mesh)(m)


def tangential_trace_field(u, order=3):
    """gamma_t(u) = nu x u as a tangential BoundaryField on the mesh boundary."""
    mesh = u.mesh
    ps = boundary_points(mesh, order)
    vals = np.cross(ps.normals, u.values_at(ps.tets, ps.bary))
    vals -= np.einsum("nd,nd->n", vals, ps.normals)[:, None] * ps.normals
    b, _ = tri_rule(order)
    return BoundaryField(Surface.from_mesh(mesh), ps.faces, np.tile(b, (len(mesh.bfaces), 1)),
                         ps.w, vals, tangential=True)
