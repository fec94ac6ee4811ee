"""Finite-element spaces on tetrahedral meshes and the discrete fields living in them.

Spaces: scalar ``P1`` and ``P2`` (nodal), ``edge`` (lowest-order Nedelec, Whitney
1-forms) and ``vectorP1`` (componentwise P1).  Every evaluation goes through
``(tet ids, barycentric coordinates)`` pairs so volume and boundary quadrature
share one code path.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import CapabilityError, ParameterError
from .geometry import TET_EDGES
from .quadrature import line_rule, tet_rule, tri_rule

SPACES = ("P1", "P2", "edge", "vectorP1")


# --- quadrature point sets -------------------------------------------------------

@dataclass(frozen=True)
class PointSet:
    """Evaluation points with their host tets, barycentrics and weights."""

    tets: np.ndarray
    bary: np.ndarray
    x: np.ndarray
    w: np.ndarray
    normals: np.ndarray = None
    faces: np.ndarray = None
    chart: np.ndarray = None


def volume_points(mesh, order=4):
    bary, w = tet_rule(order)
    m, q = len(mesh.tets), len(w)
    x = np.einsum("qa,mad->mqd", bary, mesh.vertices[mesh.tets]).reshape(-1, 3)
    return PointSet(np.repeat(np.arange(m), q), np.tile(bary, (m, 1)), x,
                    (mesh.signed_volumes[:, None] * w[None]).ravel())


def boundary_points(mesh, order=3, faces=None):
    """Quadrature on boundary faces; barycentrics refer to each face's owner tet."""
    faces = np.arange(len(mesh.bfaces)) if faces is None else np.asarray(faces)
    b, w = tri_rule(order)
    q = len(w)
    x = np.einsum("qa,mad->mqd", b, mesh.vertices[mesh.bfaces[faces]]).reshape(-1, 3)
    fid = np.repeat(faces, q)
    tets = mesh.bface_owner[fid, 0]
    return PointSet(tets, mesh.barycentric(tets, x), x,
                    (mesh.bface_areas[faces][:, None] * w[None]).ravel(),
                    mesh.normals[fid], fid, mesh.bface_chart[fid])


def locate(mesh, x, tol=1e-10):
    """Host tet of each point (first match); raises if a point lies outside the mesh."""
    x = np.atleast_2d(np.asarray(x, float))
    cen = mesh.vertices[mesh.tets].mean(axis=1)
    k = min(32, len(cen))
    _, cand = cKDTree(cen).query(x, k=k)
    cand = cand.reshape(len(x), k)
    out = np.full(len(x), -1)
    for j in range(k):
        todo = out < 0
        if not todo.any():
            break
        t = cand[todo, j]
        lam = mesh.barycentric(t, x[todo])
        ok = lam.min(axis=1) >= -tol
        idx = np.nonzero(todo)[0][ok]
        out[idx] = t[ok]
    for i in np.nonzero(out < 0)[0]:  # exhaustive fallback
        lam = mesh.barycentric(np.arange(len(mesh.tets)), np.broadcast_to(x[i], (len(mesh.tets), 3)))
        good = np.nonzero(lam.min(axis=1) >= -tol)[0]
        if len(good) == 0:
            raise ParameterError(f"point {x[i].tolist()} lies outside the mesh")
        out[i] = good[0]
    return out


# --- spaces -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FESpace:
    mesh: object
    kind: str

    def __post_init__(self):
        if self.kind not in SPACES:
            raise ParameterError(f"unknown space '{self.kind}', expected one of {SPACES}")

    @property
    def is_vector(self):
        return self.kind in ("edge", "vectorP1")

    @cached_property
    def dofmap(self):
        """(m, nloc) global dof ids of each tet."""
        mesh = self.mesh
        if self.kind == "P1":
            return mesh.tets
        if self.kind == "P2":
            return np.hstack([mesh.tets, len(mesh.vertices) + mesh.edges[1]])
        if self.kind == "edge":
            return mesh.edges[1]
        return (3 * mesh.tets[:, :, None] + np.arange(3)).reshape(-1, 12)

    @cached_property
    def signs(self):
        if self.kind != "edge":
            return np.ones(self.dofmap.shape)
        t = self.mesh.tets
        return np.where(t[:, TET_EDGES[:, 0]] < t[:, TET_EDGES[:, 1]], 1.0, -1.0)

    @property
    def ndof(self):
        mesh = self.mesh
        return {"P1": len(mesh.vertices), "P2": len(mesh.vertices) + len(mesh.edges[0]),
                "edge": len(mesh.edges[0]), "vectorP1": 3 * len(mesh.vertices)}[self.kind]

    def basis(self, tets, bary):
        """Local basis values at points: (n, nloc) scalar or (n, nloc, 3) vector."""
        lam = bary
        if self.kind == "P1":
            return lam.copy()
        if self.kind == "P2":
            i, j = TET_EDGES.T
            return np.hstack([lam * (2 * lam - 1), 4 * lam[:, i] * lam[:, j]])
        g = self.mesh.bary_gradients[tets]
        if self.kind == "edge":
            i, j = TET_EDGES.T
            w = lam[:, i, None] * g[:, j] - lam[:, j, None] * g[:, i]
            return w * self.signs[tets][:, :, None]
        out = np.zeros((len(tets), 4, 3, 3))
        for c in range(3):
            out[:, :, c, c] = lam
        return out.reshape(len(tets), 12, 3)

    def basis_grad(self, tets, bary):
        """Gradients (n, nloc, 3) for scalar spaces; (n, nloc, 3, 3) Jacobians for vectorP1."""
        g = self.mesh.bary_gradients[tets]
        if self.kind == "P1":
            return g.copy()
        if self.kind == "P2":
            i, j = TET_EDGES.T
            lam = bary
            gv = (4 * lam - 1)[:, :, None] * g
            ge = 4 * (lam[:, i, None] * g[:, j] + lam[:, j, None] * g[:, i])
            return np.concatenate([gv, ge], axis=1)
        if self.kind == "vectorP1":
            out = np.zeros((len(tets), 4, 3, 3, 3))
            for c in range(3):
                out[:, :, c, c, :] = g
            return out.reshape(len(tets), 12, 3, 3)
        raise CapabilityError("gradient is not defined for the edge space")

    def basis_curl(self, tets, bary):
        """Curls (n, nloc, 3) for vector spaces."""
        g = self.mesh.bary_gradients[tets]
        if self.kind == "edge":
            i, j = TET_EDGES.T
            return 2 * np.cross(g[:, i], g[:, j]) * self.signs[tets][:, :, None]
        if self.kind == "vectorP1":
            J = self.basis_grad(tets, bary)
            return np.stack([J[..., 2, 1] - J[..., 1, 2], J[..., 0, 2] - J[..., 2, 0],
                             J[..., 1, 0] - J[..., 0, 1]], axis=-1)
        raise CapabilityError(f"curl is not defined for the scalar space {self.kind}")

    # --- interpolation ---
    def interpolate(self, f, n_line=3):
        """Canonical interpolant of a callable ``f(x)`` (x of shape (n, 3))."""
        mesh = self.mesh
        v = mesh.vertices
        if self.kind == "P1":
            return DiscreteField(self, np.asarray(f(v), complex).reshape(-1))
        if self.kind == "P2":
            e = mesh.edges[0]
            mid = 0.5 * (v[e[:, 0]] + v[e[:, 1]])
            return DiscreteField(self, np.concatenate([np.asarray(f(v), complex).reshape(-1),
                                                       np.asarray(f(mid), complex).reshape(-1)]))
        if self.kind == "vectorP1":
            return DiscreteField(self, np.asarray(f(v), complex).reshape(-1))
        e = mesh.edges[0]
        a, b = v[e[:, 0]], v[e[:, 1]]
        s, w = line_rule(2 * n_line - 1)
        t = b - a
        vals = np.zeros(len(e), complex)
        for sk, wk in zip(s, w):
            vals += wk * np.einsum("ij,ij->i", np.asarray(f(a + sk * t), complex), t)
        return DiscreteField(self, vals)

    def zero(self):
        return DiscreteField(self, np.zeros(self.ndof, complex))

    def random(self, rng, scale=1.0):
        c = rng.standard_normal(self.ndof) + 1j * rng.standard_normal(self.ndof)
        return DiscreteField(self, scale * c)

    # --- assembly ---
    def _local(self, kind, order, coef):
        ps = volume_points(self.mesh, order)
        if kind == "mass":
            phi = self.basis(ps.tets, ps.bary)
        elif kind == "grad":
            phi = self.basis_grad(ps.tets, ps.bary)
            if self.kind == "vectorP1":
                phi = phi.reshape(len(ps.tets), 12, 9)
        elif kind == "curl":
            phi = self.basis_curl(ps.tets, ps.bary)
        else:
            raise ParameterError(f"unknown form '{kind}'")
        m = len(self.mesh.tets)
        q = len(ps.w) // m
        w = ps.w.reshape(m, q)
        nloc = self.dofmap.shape[1]
        phi = phi.reshape(m, q, nloc, -1)
        if coef is None:
            return np.einsum("mq,mqad,mqbd->mba", w, phi, phi)
        coef = np.asarray(coef)
        if coef.ndim == 0:
            return coef * np.einsum("mq,mqad,mqbd->mba", w, phi, phi)
        if coef.ndim == 2:
            coef = np.broadcast_to(coef, (m, 3, 3))
        return np.einsum("mq,mqbd,mde,mqae->mba", w, phi, coef, phi)

    def assemble(self, kind, coef=None, order=None):
        """Sparse matrix ``A[b, a] = int (D phi_b)^T coef (D phi_a)`` for D in {id, grad, curl}.

        ``coef`` is None, a scalar, a 3x3 matrix or an (m, 3, 3) per-element array.
        """
        if order is None:
            order = 2 if self.kind in ("P1", "edge", "vectorP1") else 4
        loc = self._local(kind, order, coef)
        dm = self.dofmap
        rows = np.repeat(dm[:, :, None], dm.shape[1], axis=2)
        cols = np.repeat(dm[:, None, :], dm.shape[1], axis=1)
        A = sp.coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(self.ndof, self.ndof))
        return A.tocsr()

    def hcurl_gram(self, order=None):
        return self.assemble("mass", order=order) + self.assemble("curl", order=order)

    def h1_gram(self, order=None):
        return self.assemble("mass", order=order) + self.assemble("grad", order=order)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    space: FESpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, complex).reshape(-1)
        if len(c) != self.space.ndof:
            raise ParameterError(f"coefficient length {len(c)} does not match ndof {self.space.ndof}")
        object.__setattr__(self, "coeffs", c)

    @property
    def mesh(self):
        return self.space.mesh

    def _local_coeffs(self, tets):
        return self.coeffs[self.space.dofmap[tets]]

    def values_at(self, tets, bary):
        c = self._local_coeffs(tets)
        phi = self.space.basis(tets, bary)
        if phi.ndim == 2:
            return np.einsum("na,na->n", phi, c)
        return np.einsum("nad,na->nd", phi, c)

    def grad_at(self, tets, bary):
        c = self._local_coeffs(tets)
        d = self.space.basis_grad(tets, bary)
        return np.einsum("na...,na->n...", d, c)

    def curl_at(self, tets, bary):
        c = self._local_coeffs(tets)
        return np.einsum("nad,na->nd", self.space.basis_curl(tets, bary), c)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        t = locate(self.mesh, x)
        return self.values_at(t, self.mesh.barycentric(t, x))

    def curl(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        t = locate(self.mesh, x)
        return self.curl_at(t, self.mesh.barycentric(t, x))

    def __add__(self, other):
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return DiscreteField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return DiscreteField(self.space, a * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return DiscreteField(self.space, -self.coeffs)
