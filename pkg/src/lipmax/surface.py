"""Triangulated boundary surfaces, boundary fields and the Gagliardo double-integral rule.

The seminorm ``|g|_s^2 = int int |g(x) - g(y)|^2 / |x - y|^(2 + 2s)`` is written as
a weighted sum over point pairs.  Panel pairs that share no vertex use a dense
product Gauss rule.  A panel paired with itself uses the self-similarity of the
4-to-1 refinement: for data affine on the panel the four diagonal sub-pairs reproduce
the whole integral scaled by ``2^(2s - 2)``, so the panel integral equals the sum over
off-diagonal sub-pairs divided by ``1 - 2^(2s - 2)``.  Pairs sharing a vertex or an
edge are subdivided ``levels`` times toward the contact before the product rule is used.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .quadrature import tri_rule

# 4-to-1 refinement of a triangle in barycentric corners: (child, corner, bary)
_MID = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1],
                 [.5, .5, 0], [0, .5, .5], [.5, 0, .5]])
_CHILDREN = _MID[np.array([[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]])]


@dataclass(frozen=True, eq=False)
class Surface:
    """Closed (or open) triangulated surface; optionally tied to a tet mesh boundary."""

    vertices: np.ndarray
    faces: np.ndarray
    mesh: object = None

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.vertices, mesh.bfaces, mesh)

    @cached_property
    def areas(self):
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @cached_property
    def normals(self):
        if self.mesh is not None:
            return self.mesh.normals
        p = self.vertices[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def used_vertices(self):
        return np.unique(self.faces)

    @cached_property
    def adjacency(self):
        """Dense (nf, nf) bool: faces sharing at least one vertex (diagonal included)."""
        nf = len(self.faces)
        inc = sp.csr_matrix((np.ones(3 * nf), (np.repeat(np.arange(nf), 3), self.faces.ravel())),
                            shape=(nf, len(self.vertices)))
        return (inc @ inc.T).toarray() > 0

    def points(self, face_ids, bary):
        return np.einsum("na,nad->nd", bary, self.vertices[self.faces[face_ids]])

    def p1_matrix(self, face_ids, bary):
        """Sparse evaluation matrix of surface P1 hat functions at (face, bary) points."""
        n = len(face_ids)
        return sp.csr_matrix((bary.ravel(), (np.repeat(np.arange(n), 3), self.faces[face_ids].ravel())),
                             shape=(n, len(self.vertices)))

    def quadrature(self, order=3):
        b, w = tri_rule(order)
        nf, q = len(self.faces), len(w)
        fid = np.repeat(np.arange(nf), q)
        bary = np.tile(b, (nf, 1))
        return fid, bary, (self.areas[:, None] * w[None]).ravel()

    def refine(self, project=None):
        """Uniform 1-to-4 refinement; ``project`` optionally maps new vertices (e.g. to a sphere)."""
        f = self.faces
        e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [0, 2]]]), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        mid = len(self.vertices) + inv.ravel().reshape(3, -1).T
        v = np.vstack([self.vertices, 0.5 * self.vertices[uniq].sum(axis=1)])
        if project is not None:
            v = project(v)
        a, b, c = f.T
        m01, m12, m02 = mid.T
        new = np.concatenate([np.column_stack(t) for t in
                              [(a, m01, m02), (m01, b, m12), (m02, m12, c), (m01, m12, m02)]])
        return Surface(v, new)


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Values of a scalar or vector field at surface quadrature points.

    ``values`` has shape (n,) or (n, 3).  Tangential fields satisfy ``nu . value = 0``.
    """

    surface: Surface
    face_ids: np.ndarray
    bary: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    tangential: bool = False

    def __post_init__(self):
        if self.tangential:
            v = np.asarray(self.values)
            nu = self.surface.normals[self.face_ids]
            scale = max(1.0, float(np.abs(v).max(initial=0.0)))
            if np.abs(np.einsum("nd,nd->n", v, nu)).max(initial=0.0) > 1e-12 * scale:
                raise ParameterError("tangential boundary field has a normal component")

    @property
    def x(self):
        return self.surface.points(self.face_ids, self.bary)

    @property
    def chart(self):
        m = self.surface.mesh
        return None if m is None else m.bface_chart[self.face_ids]

    @classmethod
    def from_function(cls, surface, f, order=3, tangential=False):
        fid, bary, w = surface.quadrature(order)
        vals = np.asarray(f(surface.points(fid, bary)), complex)
        if tangential:
            nu = surface.normals[fid]
            vals = vals - np.einsum("nd,nd->n", vals, nu)[:, None] * nu
        return cls(surface, fid, bary, w, vals, tangential)

    def l2_norm(self):
        v = np.asarray(self.values)
        a2 = np.abs(v) ** 2 if v.ndim == 1 else np.sum(np.abs(v) ** 2, axis=1)
        return float(np.sqrt(np.sum(self.weights * a2)))

    def scaled(self, a):
        return BoundaryField(self.surface, self.face_ids, self.bary, self.weights,
                             a * np.asarray(self.values), self.tangential)


def trace_sampler(surface, field):
    """Sampler ``(face ids, bary) -> values`` for the trace of a volume DiscreteField."""
    mesh = surface.mesh

    def sample(fid, bary):
        x = surface.points(fid, bary)
        tets = mesh.bface_owner[fid, 0]
        return field.values_at(tets, mesh.barycentric(tets, x))
    return sample


def function_sampler(surface, f):
    def sample(fid, bary):
        return np.asarray(f(surface.points(fid, bary)), complex)
    return sample


def p1_sampler(surface, coeffs):
    c = np.asarray(coeffs)

    def sample(fid, bary):
        return np.einsum("na,na...->n...", bary, c[surface.faces[fid]])
    return sample


# --- Gagliardo pair rule ------------------------------------------------------------

def _subdivide(corners):
    # corners (P, 3, 3) -> (P, 4, 3, 3) child corners in the same barycentric frame
    return np.einsum("cij,pjk->pcik", _CHILDREN, corners)


@dataclass(frozen=True, eq=False)
class GagliardoRule:
    surface: Surface
    s: float
    order: int = 3
    levels: int = 1

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")

    @cached_property
    def points(self):
        return self.surface.quadrature(self.order)

    def _kernel(self, x, y):
        d = np.linalg.norm(x - y, axis=-1)
        return d ** (-(2.0 + 2.0 * self.s))

    @cached_property
    def near_pairs(self):
        """(face_a, bary_a, face_b, bary_b, weight) for coincident and touching panels."""
        surf = self.surface
        nf = len(surf.faces)
        I3 = np.eye(3)
        # coincident: 6 unordered off-diagonal child pairs, doubled, closed by self-similarity
        iu, ju = np.triu_indices(4, 1)
        closure = 1.0 / (1.0 - 2.0 ** (2.0 * self.s - 2.0))
        fa = np.repeat(np.arange(nf), 6)
        ca = np.tile(_CHILDREN[iu], (nf, 1, 1))
        cb = np.tile(_CHILDREN[ju], (nf, 1, 1))
        mult = np.full(len(fa), 2.0 * closure)
        # distinct touching panels, unordered, doubled
        A = np.triu(surf.adjacency, 1)
        pa, pb = np.nonzero(A)
        fa = np.concatenate([fa, pa])
        fb = np.concatenate([np.repeat(np.arange(nf), 6), pb])
        ca = np.concatenate([ca, np.tile(I3, (len(pa), 1, 1))])
        cb = np.concatenate([cb, np.tile(I3, (len(pa), 1, 1))])
        mult = np.concatenate([mult, np.full(len(pa), 2.0)])
        out = []
        h = float(np.sqrt(surf.areas.max()))
        for depth in range(self.levels + 1):
            if len(fa) == 0:
                break
            if depth == self.levels:
                out.append(self._product(fa, ca, fb, cb, mult))
                break
            sa, sb = _subdivide(ca), _subdivide(cb)
            P = len(fa)
            fa2, fb2 = np.repeat(fa, 16), np.repeat(fb, 16)
            ca2 = np.repeat(sa, 4, axis=1).reshape(P * 16, 3, 3)
            cb2 = np.tile(sb, (1, 4, 1, 1)).reshape(P * 16, 3, 3)
            m2 = np.repeat(mult, 16)
            xa = np.einsum("pij,pjd->pid", ca2, surf.vertices[surf.faces[fa2]])
            xb = np.einsum("pij,pjd->pid", cb2, surf.vertices[surf.faces[fb2]])
            dmin = np.linalg.norm(xa[:, :, None] - xb[:, None, :], axis=-1).min(axis=(1, 2))
            touch = dmin < 1e-10 * h
            out.append(self._product(fa2[~touch], ca2[~touch], fb2[~touch], cb2[~touch], m2[~touch]))
            fa, ca, fb, cb, mult = fa2[touch], ca2[touch], fb2[touch], cb2[touch], m2[touch]
        return tuple(np.concatenate([o[i] for o in out]) for i in range(5))

    def _product(self, fa, ca, fb, cb, mult):
        surf = self.surface
        b, w = tri_rule(self.order)
        q = len(w)
        ba = np.einsum("qi,pij->pqj", b, ca)
        bb = np.einsum("qi,pij->pqj", b, cb)
        area_a = surf.areas[fa] * np.abs(np.linalg.det(ca))
        area_b = surf.areas[fb] * np.abs(np.linalg.det(cb))
        P = len(fa)
        BA = np.repeat(ba, q, axis=1).reshape(P * q * q, 3)
        BB = np.tile(bb, (1, q, 1)).reshape(P * q * q, 3)
        FA, FB = np.repeat(fa, q * q), np.repeat(fb, q * q)
        ww = (np.outer(w, w).ravel()[None, :] * (mult * area_a * area_b)[:, None]).ravel()
        K = self._kernel(surf.points(FA, BA), surf.points(FB, BB))
        return FA, BA, FB, BB, ww * K

    def _dense_blocks(self, chunk=2048):
        fid, bary, w = self.points
        x = self.surface.points(fid, bary)
        adj = self.surface.adjacency
        for s0 in range(0, len(w), chunk):
            sl = slice(s0, s0 + chunk)
            d = np.sqrt(np.maximum(((x[sl, None, :] - x[None, :, :]) ** 2).sum(-1), 0.0))
            with np.errstate(divide="ignore"):
                K = np.where(adj[fid[sl]][:, fid], 0.0, d ** (-(2.0 + 2.0 * self.s)))
            yield sl, K * w[sl, None] * w[None, :]

    @cached_property
    def _far_matrix(self):
        # the far-field kernel is reused across fields; cache it when it fits comfortably
        if len(self.points[2]) > 4096:
            return None
        K = np.concatenate([blk for _, blk in self._dense_blocks()])
        return K, K.sum(axis=1)

    def seminorm2(self, sampler):
        """Squared seminorm of the field given by ``sampler(face ids, bary)``."""
        fid, bary, _ = self.points
        g = np.asarray(sampler(fid, bary))
        g2 = g.reshape(len(g), -1)
        total = 0.0
        far = self._far_matrix
        blocks = [(slice(None), far[0])] if far is not None else self._dense_blocks()
        for sl, K in blocks:
            gi = g2[sl]
            total += 2.0 * (np.sum(K.sum(axis=1) * np.sum(np.abs(gi) ** 2, axis=1))
                            - np.real(np.sum(np.conj(gi) * (K @ g2))))
        fa, ba, fb, bb, W = self.near_pairs
        ga = np.asarray(sampler(fa, ba)).reshape(len(fa), -1)
        gb = np.asarray(sampler(fb, bb)).reshape(len(fb), -1)
        total += np.sum(W * np.sum(np.abs(ga - gb) ** 2, axis=1))
        return float(total)

    def l2_norm2(self, sampler):
        fid, bary, w = self.points
        g = np.asarray(sampler(fid, bary)).reshape(len(fid), -1)
        return float(np.sum(w * np.sum(np.abs(g) ** 2, axis=1)))

    def norm(self, sampler):
        return float(np.sqrt(self.l2_norm2(sampler) + self.seminorm2(sampler)))

    def gram(self, matrix):
        """(mass, seminorm Gram) of a linear family sampled by ``matrix(face ids, bary)``.

        ``matrix`` returns a sparse (n_points, n_basis) evaluation matrix.
        """
        fid, bary, w = self.points
        A = sp.csr_matrix(matrix(fid, bary))
        mass = (A.T @ sp.diags(w) @ A).toarray()
        semi = np.zeros_like(mass)
        for sl, K in self._dense_blocks():
            As = A[sl]
            semi += 2.0 * ((As.T @ sp.diags(K.sum(axis=1)) @ As).toarray() - (As.T @ (K @ A)))
        fa, ba, fb, bb, W = self.near_pairs
        D = sp.csr_matrix(matrix(fa, ba)) - sp.csr_matrix(matrix(fb, bb))
        semi += (D.T @ sp.diags(W) @ D).toarray()
        return mass, semi

    def p1_gram(self):
        """(mass, seminorm Gram) matrices of surface P1 hat functions (dense, real)."""
        return self.gram(self.surface.p1_matrix)

    def trace_gram(self, space):
        """Gram of the H^s norm on traces of a scalar nodal space, restricted to the dofs
        that touch the boundary.  Returns ``(dofs, G)`` with ``||u||^2 = c^H G c``."""
        mesh = self.surface.mesh
        owner = mesh.bface_owner[:, 0]
        dofs = np.unique(space.dofmap[owner])
        pos = np.full(space.ndof, -1)
        pos[dofs] = np.arange(len(dofs))

        def matrix(fid, bary):
            tets = owner[fid]
            phi = space.basis(tets, self.surface.mesh.barycentric(tets, self.surface.points(fid, bary)))
            cols = pos[space.dofmap[tets]]
            rows = np.repeat(np.arange(len(fid))[:, None], cols.shape[1], axis=1)
            return sp.csr_matrix((phi.ravel(), (rows.ravel(), cols.ravel())), shape=(len(fid), len(dofs)))
        mass, semi = self.gram(matrix)
        G = mass + semi
        return dofs, 0.5 * (G + G.T)
