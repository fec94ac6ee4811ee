"""Bundled mesh generators: box/cube/slab, extruded wedge, ball and spherical shell."""
import numpy as np

from .errors import DomainParameterError
from .geometry import TetMesh

# Kuhn split of the unit hex into six tets along the (0,0,0)-(1,1,1) diagonal; corner
# index = i + 2 j + 4 k
_KUHN = np.array([[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7],
                  [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]])

BOX_CHARTS = {0: "x-", 1: "x+", 2: "y-", 3: "y+", 4: "z-", 5: "z+"}


def _orient(v, tets):
    p = v[tets]
    vol = np.einsum("ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), p[:, 3] - p[:, 0])
    tets = tets.copy()
    neg = vol < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]
    return tets


def _grid_tets(nx, ny, nz):
    idx = np.arange((nx + 1) * (ny + 1) * (nz + 1)).reshape(nx + 1, ny + 1, nz + 1)
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    corners = np.stack([idx[i + a, j + b, k + c] for c in (0, 1) for b in (0, 1) for a in (0, 1)], axis=1)
    return corners[:, _KUHN].reshape(-1, 4)


def _box_chart(lo, hi):
    def label(centroids, normals):
        ax = np.argmax(np.abs(normals), axis=1)
        sign = normals[np.arange(len(normals)), ax] > 0
        return 2 * ax + sign
    return label


def box_mesh(lengths=(1.0, 1.0, 1.0), counts=(1, 1, 1), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box split into Kuhn tetrahedra; six face charts (see BOX_CHARTS)."""
    nx, ny, nz = counts
    axes = [np.linspace(o, o + L, n + 1) for o, L, n in zip(origin, lengths, counts)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    v = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    tets = _orient(v, _grid_tets(nx, ny, nz))
    return TetMesh.from_tets(v, tets, _box_chart(origin, None), dict(BOX_CHARTS))


def unit_cube_mesh(n=1):
    """Unit cube with n^3 hexes (6 n^3 tets); n = 1 gives 8 vertices, 6 tets, 12 faces."""
    return box_mesh((1.0, 1.0, 1.0), (n, n, n))


def slab_mesh(depth=5.0, h=0.1, lateral=1.0, n_lateral=2):
    """Slab ``[0, lateral]^2 x [0, depth]``; chart 4 (z-) is the graph face x3 = 0."""
    nz = int(round(depth / h))
    return box_mesh((lateral, lateral, depth), (n_lateral, n_lateral, nz))


WEDGE_CHARTS = {0: "graph-left", 1: "graph-right", 2: "top", 3: "x1-", 4: "x1+", 5: "x2-", 6: "x2+"}


def wedge_mesh(alpha, width=1.0, depth=1.0, thickness=0.5, n=4, n_depth=None, n_thick=None):
    """Truncated wedge ``cot(alpha/2)|x1| < x3 < cot(alpha/2)|x1| + depth``.

    The region is the image of a box under the shear ``x3 -> x3 + phi(x1)``, which is
    affine on each side of ``x1 = 0`` so the Kuhn tets stay valid.  The wedge lives in
    the (x1, x3) plane and is extruded along x2.  Charts 0/1 are the two graph faces;
    the others are truncation faces (see WEDGE_CHARTS).
    """
    if not (0.0 < alpha <= np.pi):
        raise DomainParameterError(f"alpha must lie in (0, pi], got {alpha}")
    slope = 1.0 / np.tan(alpha / 2) if alpha < np.pi else 0.0
    n_depth = n_depth or n
    n_thick = n_thick or max(1, n // 2)
    m = box_mesh((2 * width, thickness, depth), (2 * n, n_thick, n_depth), (-width, 0.0, 0.0))
    v = m.vertices.copy()
    v[:, 2] += slope * np.abs(v[:, 0])

    box_to_wedge = np.array([3, 4, 5, 6, -1, 2])
    chart = box_to_wedge[m.bface_chart]
    bottom = m.bface_chart == 4
    cx = m.vertices[m.bfaces].mean(axis=1)[:, 0]
    chart[bottom & (cx < 0)] = 0
    chart[bottom & (cx >= 0)] = 1
    return TetMesh(v, m.tets, m.bfaces, chart, dict(WEDGE_CHARTS))


# --- ball and shell ---------------------------------------------------------

def _icosahedron():
    t = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t],
                  [0, -1, -t], [0, 1, -t], [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], float)
    v /= np.linalg.norm(v[0])
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v, f


def _edge_midpoints(v, cells, pairs):
    e = np.sort(cells[:, pairs].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    mid = len(v) + inv.reshape(len(cells), len(pairs))
    return np.vstack([v, 0.5 * v[uniq].sum(axis=1)]), mid


def refine_tets(v, tets):
    """Red (1-to-8) refinement; returns new vertices and tets (orientation not fixed)."""
    pairs = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    v2, mid = _edge_midpoints(v, tets, pairs)
    x0, x1, x2, x3 = tets.T
    m01, m02, m03, m12, m13, m23 = mid.T
    new = [
        (x0, m01, m02, m03), (m01, x1, m12, m13), (m02, m12, x2, m23), (m03, m13, m23, x3),
        (m01, m02, m03, m13), (m01, m02, m12, m13), (m02, m03, m13, m23), (m02, m12, m13, m23),
    ]
    return v2, np.concatenate([np.column_stack(t) for t in new])


def _sphere_charts(c, n):
    ax = np.argmax(np.abs(n), axis=1)
    return 2 * ax + (n[np.arange(len(n)), ax] > 0)


def sphere_mesh(level=2, radius=1.0):
    """Ball mesh: refined icosahedral ball mapped radially so boundary nodes lie on the sphere.

    Level ``l`` has ``20 * 8**l`` tets (level 2: 1280, level 3: 10240).  Boundary charts
    are the six cube directions chosen by the dominant normal component.
    """
    iv, faces = _icosahedron()
    v = np.vstack([np.zeros(3), iv])
    tets = np.column_stack([np.zeros(len(faces), np.int64), faces + 1])
    for _ in range(level):
        v, tets = refine_tets(v, tets)
    # gauge of the icosahedron: equals 1 on its surface
    fn = np.cross(iv[faces[:, 1]] - iv[faces[:, 0]], iv[faces[:, 2]] - iv[faces[:, 0]])
    fn /= np.linalg.norm(fn, axis=1, keepdims=True)
    inr = np.einsum("ij,ij->i", fn, iv[faces[:, 0]])
    fn = fn * np.sign(inr)[:, None]
    gauge = np.max(v @ fn.T, axis=1) / np.abs(inr).max()
    r = np.linalg.norm(v, axis=1)
    scale = np.where(r > 0, gauge / np.where(r > 0, r, 1.0), 0.0)
    v = radius * v * scale[:, None]
    tets = _orient(v, tets)
    return TetMesh.from_tets(v, tets, _sphere_charts,
                             {0: "x-", 1: "x+", 2: "y-", 3: "y+", 4: "z-", 5: "z+"})


def ball_mesh(n=6, radius=1.0):
    """Ball mesh from a Kuhn-split cube grid ``[-1, 1]^3`` (n cells per axis, 6 n^3 tets).

    Vertices are mapped by ``p -> p |p|_inf / |p|_2`` so cube shells become spheres and the
    boundary nodes lie on the sphere.  Unlike :func:`sphere_mesh` the size steps freely
    with n.
    """
    if n < 2 or n % 2:
        raise DomainParameterError("ball_mesh needs an even n >= 2")
    a = np.linspace(-1.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(a, a, a, indexing="ij")
    p = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    r2 = np.linalg.norm(p, axis=1)
    rinf = np.abs(p).max(axis=1)
    v = radius * p * np.where(r2 > 0, rinf / np.where(r2 > 0, r2, 1.0), 0.0)[:, None]
    # Kuhn diagonal reflected per octant so it always points away from the centre;
    # otherwise the corner cells of the cube collapse into slivers on the sphere
    idx = np.arange((n + 1) ** 3).reshape(n + 1, n + 1, n + 1)
    i, j, k = (c.ravel() for c in np.meshgrid(*(np.arange(n),) * 3, indexing="ij"))
    corners = np.stack([idx[i + a, j + b, k + c] for c in (0, 1) for b in (0, 1) for a in (0, 1)], axis=1)
    flip = np.column_stack([i < n // 2, j < n // 2, k < n // 2]).astype(np.int64)
    loc = np.arange(8)
    bits = np.column_stack([loc & 1, (loc >> 1) & 1, (loc >> 2) & 1])
    perm = ((bits[None] ^ flip[:, None]) * np.array([1, 2, 4])).sum(axis=2)   # (cells, 8)
    kuhn = np.take_along_axis(perm, np.broadcast_to(_KUHN.ravel(), (len(perm), 24)), axis=1)
    tets = np.take_along_axis(corners, kuhn, axis=1).reshape(-1, 4)
    tets = _orient(v, tets)
    return TetMesh.from_tets(v, tets, _sphere_charts,
                             {0: "x-", 1: "x+", 2: "y-", 3: "y+", 4: "z-", 5: "z+"})


def sphere_surface(level=3, radius=1.0):
    """Triangulated sphere (icosahedral refinement); vertices on the sphere."""
    v, f = _icosahedron()
    pairs = np.array([(0, 1), (1, 2), (0, 2)])
    for _ in range(level):
        v, mid = _edge_midpoints(v, f, pairs)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        a, b, c = f.T
        m01, m12, m02 = mid.T
        f = np.concatenate([np.column_stack(t) for t in
                            [(a, m01, m02), (m01, b, m12), (m02, m12, c), (m01, m12, m02)]])
    return radius * v, f


def shell_mesh(r_inner=2.0, r_outer=3.0, level=2, layers=4):
    """Spherical shell: radially extruded sphere triangulation, prisms split into 3 tets.

    The prism split uses global vertex order so neighbouring prisms stay conforming.
    """
    sv, sf = sphere_surface(level)
    ns = len(sv)
    radii = np.linspace(r_inner, r_outer, layers + 1)
    v = np.concatenate([r * sv for r in radii])
    tets = []
    for L in range(layers):
        lo, hi = L * ns, (L + 1) * ns
        for tri in sf:
            t = tri[np.argsort(tri)]  # sorted by global id -> consistent diagonals
            a, b, c = t
            A, B, C = a + hi, b + hi, c + hi
            a, b, c = a + lo, b + lo, c + lo
            tets += [(a, b, c, C), (a, b, B, C), (a, A, B, C)]
    tets = _orient(v, np.array(tets, np.int64))

    def label(cen, n):
        return (np.einsum("ij,ij->i", cen, n) > 0).astype(np.int64)

    return TetMesh.from_tets(v, tets, label, {0: "inner", 1: "outer"})
