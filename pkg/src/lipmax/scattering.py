"""Incident plane waves, Helmholtz and dyadic kernels, integral representation of the
scattered field, finite-difference residual checks and the scattered-field bounds.

Representation of a radiating field outside a closed surface with outward normal nu::

    E_s(x) = int F1(x, y) C(m)(y) dsigma(y) + int F2(x, y) m(y) dsigma(y),  m = nu x E_s

with ``F1 = (i/k0)(grad grad g + k0^2 g I)`` and ``F2 a = grad_x g x a``.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .calderon import MultipoleCoefficients, apply_calderon
from .errors import ParameterError, SingularityError
from .fem import volume_points
from .maxwell import coercivity_constants, material_deviation
from .quadrature import line_rule, tri_rule
from .reports import BoundCheckReport
from .sobolev import TraceNorm

SQ2 = np.sqrt(2.0)


@dataclass
class PlaneWave:
    """``E = p exp(i k0 d.x)``, ``H = (d x p) exp(i k0 d.x)``."""

    d: np.ndarray
    p: np.ndarray
    k0: float = 1.0

    def __post_init__(self):
        self.d = np.asarray(self.d, float)
        self.p = np.asarray(self.p, complex)
        if abs(np.linalg.norm(self.d) - 1.0) > 1e-12:
            raise ParameterError("propagation direction must be a unit vector")
        if abs(np.dot(self.d, self.p)) > 1e-12:
            raise ParameterError("polarization must be orthogonal to the direction")

    def _phase(self, x):
        return np.exp(1j * self.k0 * (np.atleast_2d(x) @ self.d))

    def E(self, x):
        return self._phase(x)[:, None] * self.p

    def H(self, x):
        return self._phase(x)[:, None] * np.cross(self.d, self.p)

    def scaled(self, a):
        return PlaneWave(self.d, a * self.p, self.k0)


def incident_fields(pw, x):
    return {"E_i": pw.E(x), "H_i": pw.H(x)}


def _cross_matrix(v):
    z = np.zeros(v.shape[:-1])
    return np.stack([np.stack([z, -v[..., 2], v[..., 1]], -1),
                     np.stack([v[..., 2], z, -v[..., 0]], -1),
                     np.stack([-v[..., 1], v[..., 0], z], -1)], -2)


def kernels(x, y, k0):
    """``g``, ``F1`` and ``F2`` for all pairs (broadcast over leading axes of x and y).

    ``F1`` is None for k0 = 0 (static kernel only).
    """
    r = np.asarray(x, float) - np.asarray(y, float)
    R = np.linalg.norm(r, axis=-1)
    if np.any(R < 1e-12):
        raise SingularityError("kernel evaluated at coincident points")
    g = np.exp(1j * k0 * R) / (4.0 * np.pi * R)
    rh = r / R[..., None]
    dg = (g * (1j * k0 - 1.0 / R))[..., None] * rh
    F2 = _cross_matrix(dg)
    if k0 == 0:
        return {"g": g, "F1": None, "F2": F2, "grad_g": dg}
    a = (3.0 / R ** 2 - 3j * k0 / R - k0 ** 2) * g
    b = (1j * k0 / R - 1.0 / R ** 2) * g
    hess = a[..., None, None] * rh[..., :, None] * rh[..., None, :] + b[..., None, None] * np.eye(3)
    F1 = (1j / k0) * (hess + (k0 ** 2 * g)[..., None, None] * np.eye(3))
    return {"g": g, "F1": F1, "F2": F2, "grad_g": dg}


@dataclass
class PanelQuadrature:
    """Surface quadrature: points, unit normals, weights and the panel diameter."""

    x: np.ndarray
    normals: np.ndarray
    w: np.ndarray
    diameter: float

    @classmethod
    def sphere(cls, level=3, R=1.0, order=3):
        """Curved panels: a flat icosahedral rule projected radially onto the sphere.

        The area element of the radial projection of a flat panel with unit normal n is
        ``R^2 (p . n) / |p|^3`` times the flat one.
        """
        from .meshes import sphere_surface
        v, f = sphere_surface(level, 1.0)
        b, w = tri_rule(order)
        tri = v[f]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        area = 0.5 * np.linalg.norm(n, axis=1)
        n /= 2.0 * area[:, None]
        p = np.einsum("qa,mad->mqd", b, tri)
        pn = np.linalg.norm(p, axis=-1)
        jac = np.einsum("mqd,md->mq", p, n) / pn ** 3
        ww = (area[:, None] * w[None] * jac * R ** 2).ravel()
        d = (p / pn[..., None]).reshape(-1, 3)
        diam = float(np.linalg.norm(tri[:, 1] - tri[:, 0], axis=1).max()) * R
        return cls(R * d, d, ww, diam)

    @classmethod
    def from_mesh(cls, mesh, order=3):
        """Flat boundary panels of a tetrahedral mesh."""
        from .fem import boundary_points
        ps = boundary_points(mesh, order)
        p = mesh.vertices[mesh.bfaces]
        diam = float(np.max(np.linalg.norm(p[:, [0, 1, 2]] - p[:, [1, 2, 0]], axis=2)))
        return cls(ps.x, ps.normals, ps.w, diam)


def evaluate_scattered(x, data, quad, k0, chunk=256):
    """E_s at exterior points x from boundary data.

    ``data`` is MultipoleCoefficients (traces evaluated on the quadrature points) or a pair
    ``(m, Cm)`` of tangential samples at ``quad.x``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    if isinstance(data, MultipoleCoefficients):
        m, cm = data.evaluate(quad.x), apply_calderon(data).evaluate(quad.x)
    else:
        m, cm = (np.asarray(a, complex) for a in data)
    out = np.zeros((len(x), 3), complex)
    if not (np.any(m) or np.any(cm)):
        return out
    for s in range(0, len(x), chunk):
        xs = x[s:s + chunk]
        dist = np.min(np.linalg.norm(xs[:, None, :] - quad.x[None], axis=-1), axis=1)
        if np.any(dist < 2.0 * quad.diameter):
            warnings.warn(f"near-boundary evaluation: distance / panel diameter = "
                          f"{dist.min() / quad.diameter:.2f} < 2")
        K = kernels(xs[:, None, :], quad.x[None], k0)
        out[s:s + chunk] = (np.einsum("q,nqij,qj->ni", quad.w, K["F1"], cm)
                            + np.einsum("q,nqij,qj->ni", quad.w, K["F2"], m))
    return out


def _fd_curl(f, x, h):
    J = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        J.append((f(x + e) - f(x - e)) / (2.0 * h))
    J = np.stack(J, axis=-1)            # (n, 3 comp, 3 deriv)
    return np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=-1)


def exterior_residual(sampler, x, k0, h_fd=None):
    """Centered-difference residuals of the exterior Maxwell system at points x.

    ``sampler(x)`` returns (E, H).  Relative residuals are scaled by ``k0 |H|``,
    ``k0 |E|`` and ``k0^2 |E|`` respectively.
    """
    x = np.atleast_2d(np.asarray(x, float))
    h = 1e-3 / k0 if h_fd is None else h_fd
    E, H = sampler(x)
    cE = _fd_curl(lambda y: sampler(y)[0], x, h)
    cH = _fd_curl(lambda y: sampler(y)[1], x, h)
    ccE = _fd_curl(lambda y: _fd_curl(lambda z: sampler(z)[0], y, h), x, h)
    r1 = np.linalg.norm(cE - 1j * k0 * H, axis=1)
    r2 = np.linalg.norm(cH + 1j * k0 * E, axis=1)
    r3 = np.linalg.norm(ccE - k0 ** 2 * E, axis=1)

    def rel(r, s):
        s = np.where(s > 0, s, 1.0)
        return r / s
    nE, nH = np.linalg.norm(E, axis=1), np.linalg.norm(H, axis=1)
    return {"curl_E": r1, "curl_H": r2, "helmholtz": r3,
            "curl_E_rel": rel(r1, k0 * nH), "curl_H_rel": rel(r2, k0 * nE), "helmholtz_rel": rel(r3, k0 ** 2 * nE),
            "h_fd": h}


# --- bounds on the scattered field -------------------------------------------------

def _line_dofs(mesh, edges_idx, f, order=5):
    """Edge dofs ``int_e f . t`` (t = xb - xa, parameter in [0, 1]) for selected edges."""
    t, w = line_rule(order)
    e = mesh.edges[0][edges_idx]
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    vals = f(pts.reshape(-1, 3)).reshape(len(e), len(t), 3)
    return np.einsum("q,eqd,ed->e", w, vals, b - a)


def kernel_dual_norms(tn, x, k0, order=1, chunk=64):
    """Surrogate dual norms ``sup_m |int F(x, y) m(y) dsigma| / ||m||_T`` for F1 and F2.

    ``m`` ranges over discrete tangential traces (boundary-edge dofs) with the discrete
    trace norm of ``tn``; the supremum is the largest singular value of the 3 x nb map after
    whitening by the Cholesky factor of the Schur complement.
    """
    ps, T = tn._trace_matrix(order)
    S = tn.schur()
    Lc = sla.cholesky(S, lower=True)
    Tw = sla.solve_triangular(Lc, T.toarray().conj().T, lower=True).conj().T   # T L^{-H}
    sw = np.sqrt(ps.w)
    out = np.zeros((len(x), 2))
    for s in range(0, len(x), chunk):
        K = kernels(x[s:s + chunk, None, :], ps.x[None], k0)
        for j, name in enumerate(("F1", "F2")):
            Kx = (K[name] * sw[None, :, None, None]).transpose(0, 2, 1, 3).reshape(len(K[name]), 3, -1)
            Psi = Kx @ Tw
            out[s:s + chunk, j] = np.linalg.norm(Psi, ord=2, axis=(1, 2))
    return out[:, 0], out[:, 1]


def scattered_bounds(solution, incident, character, k1, C_est, observe_mesh, order=2, seed=None,
                     tn=None):
    """Scattered-trace and observation-region bounds of the lossy run.

    * ``scattered_trace_E``: ``||gamma_t E_s||_T <= C1 ||E_i||_Hcurl``
    * ``scattered_trace_H``: ``||gamma_t H_s||_T <= C2 ||E_i||_Hcurl``
    * ``scattered_field_L2``: ``||E_s||_{L2(obs)} <= C3 ||E_i||_Hcurl``

    ``||.||_T`` is the discrete trace norm of the mesh; ``E_s`` outside is the outgoing
    multipole field of the projected discrete scattered trace.
    """
    system = solution.system
    mesh, mat, proj = system.space.mesh, system.mat, system.projector
    k0 = mat.k0
    C = coercivity_constants(mat, mesh=mesh, strict=False)
    dev = material_deviation(mat, mesh)
    alt = max(k0 * dev[0], dev[1] / k0)
    C1 = (1 + SQ2) * character.lipschitz_factor * k1 * alt / C.min
    C2 = C_est * C1
    tn = TraceNorm(mesh) if tn is None else tn
    Ei_h = system.space.interpolate(incident.E)
    Ep = solution.E.coeffs - Ei_h.coeffs
    tE = tn.norm_from_dofs(Ep[tn.bdofs])
    m = proj.coefficients(Ep, k0)
    Hs = lambda y: m.field(y)[1]
    tH = tn.norm_from_dofs(_line_dofs(mesh, tn.bdofs, Hs))
    ps = volume_points(mesh, 4)
    Ei, cEi = incident.E(ps.x), 1j * k0 * incident.H(ps.x)
    nEi = float(np.sqrt(np.sum(ps.w * (np.sum(np.abs(Ei) ** 2, 1) + np.sum(np.abs(cEi) ** 2, 1)))))
    po = volume_points(observe_mesh, order)
    Es = m.field(po.x)[0]
    lhs3 = float(np.sqrt(np.sum(po.w * np.sum(np.abs(Es) ** 2, 1))))
    f1, f2 = kernel_dual_norms(tn, po.x, k0)
    Ct1 = float(np.sqrt(np.sum(po.w * (C_est * f1 + f2) ** 2)))
    C3 = C1 * Ct1
    consts = {"M_factor": character.lipschitz_factor, "k1": k1, "k0": k0, "eps_dev": dev[0], "muinv_dev": dev[1],
              "alt_numerator": alt, "C0": C.C0, "C0_tilde": C.C0_tilde, "min_C0": C.min, "C_est": C_est,
              "C1": C1, "C2": C2, "C1_tilde": Ct1, "C3": C3, "norm_Ei": nEi}
    rep = BoundCheckReport(meta=dict(consts, coupling=system.meta.get("coupling"),
                                     dual_norm_surrogate="whitened discrete trace norm, order-1 panels"))
    h = mesh.h
    rep.add("scattered_trace_E", tE, C1 * nEi, constants=consts, mesh_h=h, seed=seed, tol=1e-12 * max(tE, 1.0))
    rep.add("scattered_trace_H", tH, C2 * nEi, constants=consts, mesh_h=h, seed=seed, tol=1e-12 * max(tH, 1.0))
    rep.add("scattered_field_L2", lhs3, C3 * nEi, constants=consts, mesh_h=h, seed=seed,
            tol=1e-12 * max(lhs3, 1.0))
    return rep
