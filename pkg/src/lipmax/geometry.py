"""Lipschitz domains: graph domains, tetrahedral meshes with boundary charts,
the Lipschitz character, and partitions of unity subordinate to the charts."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (ChartInadmissibleError, CoverageError, DomainParameterError,
                     MeshInvariantError, OrientationError)
from .quadrature import tet_rule

# local vertex pairs of the six tetrahedron edges and the four faces (face i omits vertex i)
TET_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
TET_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


@dataclass(frozen=True)
class GraphDomain:
    """Region above a piecewise-linear height field ``x3 > phi(x1, x2)``."""

    points: np.ndarray      # (n, 2) horizontal vertex coordinates
    heights: np.ndarray     # (n,)
    triangles: np.ndarray   # (m, 3)
    box: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        area = self._signed_areas()
        if np.any(np.abs(area) <= 1e-14 * max(1.0, np.max(np.abs(area)))):
            bad = int(np.argmin(np.abs(area)))
            raise DomainParameterError(f"degenerate height-field triangle {bad}")

    def _signed_areas(self):
        p = self.points[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def gradients(self):
        """Per-triangle gradient of the affine interpolant, shape (m, 2)."""
        p = self.points[self.triangles]
        z = self.heights[self.triangles]
        A = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=1)
        b = np.stack([z[:, 1] - z[:, 0], z[:, 2] - z[:, 0]], axis=1)
        return np.linalg.solve(A, b[..., None])[..., 0]

    @property
    def M(self):
        return float(np.max(np.linalg.norm(self.gradients, axis=1)))

    @property
    def theta(self):
        g2 = np.sum(self.gradients ** 2, axis=1)
        return float(np.arccos(np.clip(np.min(1.0 / np.sqrt(1.0 + g2)), -1.0, 1.0)))

    def phi(self, x):
        """Evaluate the height field at horizontal points ``x`` (k, 2)."""
        from scipy.interpolate import LinearNDInterpolator
        return LinearNDInterpolator(self.points, self.heights)(x)

    def normals(self):
        """Outward unit normals (grad phi, -1)/sqrt(1 + |grad phi|^2) per triangle."""
        g = self.gradients
        n = np.column_stack([g, -np.ones(len(g))])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def refine(self):
        """Uniform 1-to-4 refinement; the piecewise-linear phi is unchanged."""
        tri = self.triangles
        edges = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.ravel()
        n = len(self.points)
        mids = n + inv.reshape(3, -1).T  # (m, 3): m01, m12, m02
        pts = np.vstack([self.points, 0.5 * self.points[uniq].sum(axis=1)])
        hts = np.concatenate([self.heights, 0.5 * self.heights[uniq].sum(axis=1)])
        a, b, c = tri.T
        m01, m12, m02 = mids.T
        new = np.concatenate([np.column_stack([a, m01, m02]), np.column_stack([m01, b, m12]),
                              np.column_stack([m02, m12, c]), np.column_stack([m01, m12, m02])])
        return GraphDomain(pts, hts, new, self.box)


@dataclass(frozen=True)
class Chart:
    direction: np.ndarray   # unit vector e_k pointing into the domain
    theta: float


@dataclass(frozen=True)
class LipschitzCharacter:
    """(M, theta, charts, beta). ``M`` is the graph Lipschitz constant."""

    M: float
    theta: float
    charts: tuple
    beta: float

    @property
    def lipschitz_factor(self):
        """sqrt(1 + 2 M^2): the H^1 distortion of the flattening map.

        This is the factor that multiplies k1 in every extension-based constant.
        """
        return float(np.sqrt(1.0 + 2.0 * self.M ** 2))

    @property
    def max_sec(self):
        return float(max(1.0 / np.cos(c.theta) for c in self.charts))

    def as_dict(self):
        return {"M": self.M, "theta": self.theta, "beta": self.beta,
                "theta_k": [c.theta for c in self.charts]}


def make_wedge(alpha, extent=1.0, n=8):
    """Wedge ``x3 > cot(alpha/2) |x1|`` as a graph domain plus its character.

    ``alpha = pi`` is accepted as the flat half-space limit.
    """
    if not (0.0 < alpha <= np.pi) or not np.isfinite(alpha):
        raise DomainParameterError(f"alpha must lie in (0, pi], got {alpha}")
    if extent <= 0:
        raise DomainParameterError(f"extent must be positive, got {extent}")
    slope = 1.0 / np.tan(alpha / 2.0) if alpha < np.pi else 0.0
    x1 = np.linspace(-extent, extent, 2 * n + 1)
    x2 = np.linspace(0.0, extent, n + 1)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    idx = np.arange(len(pts)).reshape(X1.shape)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    dom = GraphDomain(pts, slope * np.abs(pts[:, 0]), tris, (2 * extent, extent, extent))
    theta = np.pi / 2 - alpha / 2
    up = np.array([0.0, 0.0, 1.0])
    char = LipschitzCharacter(M=slope, theta=theta,
                              charts=(Chart(up, theta), Chart(up, theta)),
                              beta=float(np.cos(theta)))
    return dom, char


def wedge_normals(alpha):
    """Outward normals of the two wedge faces, extruded (x2 is the extrusion axis)."""
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    return np.array([-c, 0.0, -s]), np.array([c, 0.0, -s])


@dataclass(frozen=True)
class TetMesh:
    vertices: np.ndarray
    tets: np.ndarray
    bfaces: np.ndarray
    bface_chart: np.ndarray
    chart_names: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "tets", np.ascontiguousarray(self.tets, dtype=np.int64))
        object.__setattr__(self, "bfaces", np.ascontiguousarray(self.bfaces, dtype=np.int64))
        object.__setattr__(self, "bface_chart", np.ascontiguousarray(self.bface_chart, dtype=np.int64))
        self.validate()

    # --- invariants -----------------------------------------------------
    def validate(self):
        nv = len(self.vertices)
        for name, arr in (("tet", self.tets), ("boundary face", self.bfaces)):
            if arr.size and (arr.min() < 0 or arr.max() >= nv):
                bad = int(np.nonzero((arr < 0).any(1) | (arr >= nv).any(1))[0][0])
                raise MeshInvariantError(f"{name} {bad} references a missing vertex", bad)
        vol = self.signed_volumes
        if np.any(vol <= 0):
            bad = int(np.nonzero(vol <= 0)[0][0])
            raise OrientationError(f"tet {bad} has non-positive signed volume {vol[bad]:.3e}", bad)
        owner = self.bface_owner  # raises if a face is not owned by exactly one tet
        del owner

    @cached_property
    def signed_volumes(self):
        p = self.vertices[self.tets]
        return np.einsum("ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
                         p[:, 3] - p[:, 0]) / 6.0

    @cached_property
    def bary_gradients(self):
        """Gradients of the four barycentric coordinates per tet, shape (m, 4, 3)."""
        p = self.vertices[self.tets]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], p[:, 3] - p[:, 0]], axis=2)
        Jinv = np.linalg.inv(J)  # rows: gradients of lambda_1..3
        return np.concatenate([-Jinv.sum(axis=1, keepdims=True), Jinv], axis=1)

    def barycentric(self, tet_ids, x):
        """Barycentric coordinates (n, 4) of points ``x`` with respect to tets ``tet_ids``."""
        g = self.bary_gradients[tet_ids]
        d = np.asarray(x, float) - self.vertices[self.tets[tet_ids, 0]]
        lam = np.einsum("nij,nj->ni", g[:, 1:], d)
        return np.column_stack([1.0 - lam.sum(axis=1), lam])

    @cached_property
    def _face_table(self):
        faces = np.sort(self.tets[:, TET_FACES].reshape(-1, 3), axis=1)
        uniq, inv, counts = np.unique(faces, axis=0, return_inverse=True, return_counts=True)
        return uniq, inv.ravel(), counts

    @cached_property
    def bface_owner(self):
        """(tet id, local face id) owning each boundary face."""
        uniq, inv, counts = self._face_table
        key = {tuple(f): i for i, f in enumerate(uniq)}
        first = np.full(len(uniq), -1)
        first[inv[::-1]] = np.arange(len(inv))[::-1]
        owner = np.empty((len(self.bfaces), 2), dtype=np.int64)
        for i, f in enumerate(np.sort(self.bfaces, axis=1)):
            j = key.get(tuple(f))
            if j is None:
                raise MeshInvariantError(f"boundary face {i} is not a face of any tet", i)
            if counts[j] != 1:
                raise MeshInvariantError(f"boundary face {i} is shared by {counts[j]} tets", i)
            owner[i] = divmod(first[j], 4)
        return owner

    @cached_property
    def normals(self):
        p = self.vertices[self.bfaces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        tet, loc = self.bface_owner.T
        opposite = self.vertices[self.tets[tet, loc]]
        flip = np.einsum("ij,ij->i", n, opposite - p[:, 0]) > 0
        n[flip] *= -1
        return n

    @cached_property
    def bface_areas(self):
        p = self.vertices[self.bfaces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @cached_property
    def edges(self):
        """Unique edges (sorted vertex pairs) and the (m, 6) tet-to-edge map."""
        e = np.sort(self.tets[:, TET_EDGES].reshape(-1, 2), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 6)

    @cached_property
    def boundary_edges(self):
        """Sorted unique ids of edges lying on boundary faces."""
        uniq, _ = self.edges
        lookup = {tuple(e): i for i, e in enumerate(uniq)}
        be = np.sort(self.bfaces[:, [[0, 1], [1, 2], [0, 2]]].reshape(-1, 2), axis=1)
        return np.unique([lookup[tuple(e)] for e in be])

    @cached_property
    def boundary_vertices(self):
        return np.unique(self.bfaces)

    @property
    def h(self):
        p = self.vertices[self.tets[:, TET_EDGES]]
        return float(np.max(np.linalg.norm(p[:, :, 1] - p[:, :, 0], axis=2)))

    @property
    def volume(self):
        return float(self.signed_volumes.sum())

    @property
    def charts(self):
        return np.unique(self.bface_chart)

    def boundary_area(self, charts=None):
        mask = np.ones(len(self.bfaces), bool) if charts is None else np.isin(self.bface_chart, list(charts))
        return float(self.bface_areas[mask].sum())

    def quadrature_points(self, order=4):
        """Physical points (m, q, 3) and weights (m, q) including the volume factor."""
        bary, w = tet_rule(order)
        x = np.einsum("qa,mad->mqd", bary, self.vertices[self.tets])
        return x, self.signed_volumes[:, None] * w[None, :]

    def mapped(self, fn):
        """Mesh with vertices replaced by ``fn(vertices)`` and identical connectivity."""
        v = np.asarray(fn(self.vertices), dtype=float)
        tets = self.tets
        vol = np.einsum("ij,ij->i", np.cross(v[tets[:, 1]] - v[tets[:, 0]], v[tets[:, 2]] - v[tets[:, 0]]),
                        v[tets[:, 3]] - v[tets[:, 0]])
        if np.all(vol < 0):  # orientation-reversing map
            tets = tets[:, [0, 2, 1, 3]]
        return TetMesh(v, tets, self.bfaces, self.bface_chart, dict(self.chart_names))

    @classmethod
    def from_tets(cls, vertices, tets, chart_fn=None, chart_names=None):
        """Build a mesh, extracting boundary faces; ``chart_fn(centroids, normals)`` labels them."""
        vertices = np.asarray(vertices, float)
        tets = np.asarray(tets, np.int64)
        faces = tets[:, TET_FACES].reshape(-1, 3)
        s = np.sort(faces, axis=1)
        _, inv, counts = np.unique(s, axis=0, return_inverse=True, return_counts=True)
        bf = faces[counts[inv.ravel()] == 1]
        tmp = cls(vertices, tets, bf, np.zeros(len(bf), np.int64))
        if chart_fn is None:
            chart = np.zeros(len(bf), np.int64)
        else:
            chart = np.asarray(chart_fn(vertices[bf].mean(axis=1), tmp.normals), np.int64)
        return cls(vertices, tets, bf, chart, chart_names or {})


def propose_chart_directions(mesh):
    """Negated, normalized average outward normal of each chart's facets."""
    out = {}
    for k in mesh.charts:
        sel = mesh.bface_chart == k
        avg = (mesh.normals[sel] * mesh.bface_areas[sel, None]).sum(axis=0)
        out[int(k)] = -avg / np.linalg.norm(avg)
    return out


def lipschitz_character(domain, directions=None):
    """Lipschitz character of a graph domain or a charted tetrahedral mesh.

    For meshes, ``theta_k = arccos(min over chart-k facets of -e_k . nu)`` and the
    graph constant of chart ``k`` is ``tan(theta_k)``; ``M`` is their maximum.
    """
    if isinstance(domain, GraphDomain):
        th = domain.theta
        up = np.array([0.0, 0.0, 1.0])
        return LipschitzCharacter(M=domain.M, theta=th, charts=(Chart(up, th),), beta=float(np.cos(th)))
    mesh = domain
    if directions is None:
        directions = propose_chart_directions(mesh)
    charts = []
    for k in mesh.charts:
        e = np.asarray(directions[int(k)], float)
        e = e / np.linalg.norm(e)
        c = -mesh.normals[mesh.bface_chart == k] @ e
        if np.any(c <= 0):
            bad = int(np.nonzero(mesh.bface_chart == k)[0][np.argmin(c)])
            raise ChartInadmissibleError(
                f"chart {int(k)}: facet {bad} has -e_k.nu = {c.min():.3g} <= 0")
        charts.append(Chart(e, float(np.arccos(min(1.0, c.min())))))
    thetas = np.array([c.theta for c in charts])
    return LipschitzCharacter(M=float(np.max(np.tan(thetas))), theta=float(thetas.max()),
                              charts=tuple(charts), beta=float(np.min(np.cos(thetas))))


def best_chart_direction(normals):
    """Direction ``e`` maximizing ``min_i -e . nu_i`` (center of the smallest spherical cap
    containing the points ``-nu_i``) and that minimum.

    The optimal cap is fixed by one, two or three of the points, so all such candidates
    are enumerated; meant for the handful of distinct normals around a vertex.
    """
    p = -np.unique(np.round(np.asarray(normals, float), 12), axis=0)
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    cands = [q for q in p]
    n = len(p)
    for i in range(n):
        for j in range(i + 1, n):
            cands.append(p[i] + p[j])
            for k in range(j + 1, n):
                c = np.cross(p[j] - p[i], p[k] - p[i])
                cands += [c, -c]
    C = np.array([c for c in cands if np.linalg.norm(c) > 1e-12])
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    score = (C @ p.T).min(axis=1)
    best = int(np.argmax(score))
    return C[best], float(score[best])


def star_character(mesh):
    """Lipschitz character of the cover by open vertex stars of the boundary.

    Every boundary point lies in the open star of some boundary vertex, so the stars form
    an admissible chart cover (charts overlap across edges and corners).  Each star chart
    uses the direction of :func:`best_chart_direction` for the normals of its facets.
    """
    nrm = mesh.normals
    stars = {}
    for f, tri in enumerate(mesh.bfaces):
        for v in tri:
            stars.setdefault(int(v), []).append(f)
    cache = {}
    thetas, dirs = [], []
    for v in sorted(stars):
        key = tuple(sorted(set(map(tuple, np.round(nrm[stars[v]], 12)))))
        if key not in cache:
            cache[key] = best_chart_direction(np.array(key))
        e, c = cache[key]
        if c <= 0:
            raise ChartInadmissibleError(f"vertex star at {v} is not a graph over any plane")
        thetas.append(float(np.arccos(min(1.0, c))))
        dirs.append(e)
    thetas = np.array(thetas)
    # one chart per distinct angle keeps the record compact
    idx = np.unique(np.round(thetas, 12), return_index=True)[1]
    charts = tuple(Chart(dirs[i], float(thetas[i])) for i in idx)
    th = float(thetas.max())
    return LipschitzCharacter(M=float(np.tan(th)), theta=th, charts=charts, beta=float(np.cos(th)))


def graph_character(mesh, charts, direction=(0.0, 0.0, 1.0)):
    """Character of the graph part (facets of ``charts``) seen along ``direction``."""
    e = np.asarray(direction, float)
    e = e / np.linalg.norm(e)
    sel = np.isin(mesh.bface_chart, list(charts))
    c = -mesh.normals[sel] @ e
    if np.any(c <= 0):
        raise ChartInadmissibleError("graph facets are not a graph along the given direction")
    th = float(np.arccos(min(1.0, c.min())))
    return LipschitzCharacter(M=float(np.tan(th)), theta=th, charts=(Chart(e, th),), beta=float(np.cos(th)))


# --- partition of unity -------------------------------------------------------

def point_triangle_distance(p, a, b, c):
    """Euclidean distance from points ``p`` (k, 3) to triangles (a, b, c) (t, 3); returns (k, t)."""
    p = p[:, None, :]
    ab, ac = (b - a)[None], (c - a)[None]
    ap = p - a[None]
    d1 = np.einsum("kti,kti->kt", np.broadcast_to(ab, ap.shape), ap)
    d2 = np.einsum("kti,kti->kt", np.broadcast_to(ac, ap.shape), ap)
    bp = p - b[None]
    d3 = np.einsum("kti,kti->kt", np.broadcast_to(ab, bp.shape), bp)
    d4 = np.einsum("kti,kti->kt", np.broadcast_to(ac, bp.shape), bp)
    cp = p - c[None]
    d5 = np.einsum("kti,kti->kt", np.broadcast_to(ab, cp.shape), cp)
    d6 = np.einsum("kti,kti->kt", np.broadcast_to(ac, cp.shape), cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        # edge parameters
        t_ab = np.clip(np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0), 0, 1)
        t_ac = np.clip(np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0), 0, 1)
        t_bc = np.clip(np.where((d4 - d3) + (d5 - d6) != 0, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0), 0, 1)
    A, B, C = a[None], b[None], c[None]
    inside = A + v[..., None] * ab + w[..., None] * ac
    cand = [
        inside,
        A + t_ab[..., None] * ab,
        A + t_ac[..., None] * ac,
        B + t_bc[..., None] * (C - B),
    ]
    is_inside = (va >= 0) & (vb >= 0) & (vc >= 0)
    dist = np.stack([np.linalg.norm(p - q, axis=-1) for q in cand[1:]], axis=0).min(axis=0)
    d_in = np.linalg.norm(p - cand[0], axis=-1)
    return np.where(is_inside, d_in, dist)


def quadratic_bspline_bump(r):
    """Quadratic B-spline bump normalized to 1 at 0, supported on |r| < 1."""
    r = np.abs(np.asarray(r, float))
    return np.where(r <= 0.5, 1 - 2 * r ** 2, np.where(r < 1, 2 * (1 - r) ** 2, 0.0))


def _min_distance(points, tris, chunk=4096):
    if len(tris) == 0:
        return np.full(len(points), np.inf)
    out = np.empty(len(points))
    per = max(1, chunk * 64 // max(1, len(tris)))
    for s in range(0, len(points), per):
        out[s:s + per] = point_triangle_distance(points[s:s + per], tris[:, 0], tris[:, 1], tris[:, 2]).min(axis=1)
    return out


@dataclass(frozen=True)
class PartitionOfUnity:
    """Pointwise weights eta_k with sum_k eta_k^2 = 1, one per boundary chart.

    Raw weights are ``B(d_k / (d_k + d_other))`` where ``d_k`` is the distance to the
    chart's facets and ``d_other`` the distance to all other boundary facets, so eta_k
    vanishes on facets outside the closure of chart ``k``.  An optional support radius
    multiplies in ``B(d_k / radius)``.
    """

    mesh: TetMesh
    chart_ids: tuple
    support_radius: dict
    support: np.ndarray   # (N, m) bool: element touches the support of eta_k

    def raw_weights(self, x):
        x = np.asarray(x, float).reshape(-1, 3)
        mesh = self.mesh
        tri = mesh.vertices[mesh.bfaces]
        W = np.empty((len(x), len(self.chart_ids)))
        for j, k in enumerate(self.chart_ids):
            sel = mesh.bface_chart == k
            dk = _min_distance(x, tri[sel])
            do = _min_distance(x, tri[~sel])
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(dk + do > 0, dk / (dk + do), 0.0)
            ratio = np.where(np.isinf(do), 0.0, ratio)
            w = quadratic_bspline_bump(ratio)
            rad = self.support_radius.get(k)
            if rad is not None:
                w = w * quadratic_bspline_bump(dk / rad)
            W[:, j] = w
        return W

    def evaluate(self, x):
        W = self.raw_weights(x)
        s = np.sqrt((W ** 2).sum(axis=1, keepdims=True))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(s > 0, W / s, np.nan)


def build_partition_of_unity(mesh, charts=None, support_radius=None, order=2):
    """Partition of unity subordinate to the boundary charts of ``mesh``.

    ``charts`` defaults to every chart id present on the boundary.  Raises
    CoverageError listing elements where some quadrature point has no weight.
    """
    chart_ids = tuple(int(k) for k in (mesh.charts if charts is None else charts))
    pu = PartitionOfUnity(mesh, chart_ids, dict(support_radius or {}), np.zeros((0, 0), bool))
    x, _ = mesh.quadrature_points(order)
    m, q, _ = x.shape
    W = pu.raw_weights(x.reshape(-1, 3)).reshape(m, q, -1)
    uncovered = np.nonzero((W ** 2).sum(axis=2).min(axis=1) <= 0)[0]
    if len(uncovered):
        raise CoverageError(f"{len(uncovered)} elements not covered by any chart: "
                            f"{uncovered[:20].tolist()}", uncovered)
    support = (W > 0).any(axis=1).T
    return PartitionOfUnity(mesh, chart_ids, pu.support_radius, support)
