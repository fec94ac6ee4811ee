"""Smooth cutoff, the extension constant k1, the Fourier lifting eta, the boundary-to-volume
extension E and the bi-Lipschitz pullback check.

Fourier convention: ``w_hat(xi) = int w(y) exp(-2 pi i xi . y) dy``.  Sobolev weights are
``(1 + |xi|^2)^s`` in this convention, so the H1 norm is ``||u||^2 + ||grad u||^2 / (4 pi^2)``.
"""
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from .errors import CapabilityError, NumericError, ParameterError
from .fem import DiscreteField, FESpace, boundary_points
from .geometry import lipschitz_character, point_triangle_distance, propose_chart_directions
from .quadrature import tri_rule
from .reports import BoundCheckReport
from .sobolev import interpolation_norm, volume_norms
from .surface import GagliardoRule, Surface, p1_sampler

TWO_PI = 2.0 * np.pi


# --- bump ------------------------------------------------------------------------------

def g1(x):
    x = np.asarray(x, float)
    out = np.zeros_like(x)
    pos = x > -2.0
    out[pos] = np.exp(-1.0 / (x[pos] + 2.0))
    return out


def g2(x):
    """Smooth bump supported in (-3, -1)."""
    x = np.asarray(x, float)
    return g1(1.0 + x) * g1(-3.0 - x)


@dataclass(frozen=True)
class BumpFunction:
    """Even cutoff with f = 1 on |y| <= 1 and f = 0 on |y| >= 3.

    ``g3(x) = int_{-inf}^x g2``, ``g4(x) = g3(x) g3(-x)`` and ``f = g4 / C_g^2`` where
    ``C_g = g3(-1)``; ``g4`` equals ``C_g^2`` on |x| <= 1, so this normalization makes f(0) = 1.
    """

    C_g: float
    n_gauss: int = 80
    support: float = 3.0

    def g3(self, x):
        x = np.asarray(x, float)
        out = np.where(x >= -1.0, self.C_g, 0.0)
        mid = (x > -3.0) & (x < -1.0)
        if mid.any():
            t, w = roots_legendre(self.n_gauss)
            xm = x[mid]
            half = 0.5 * (xm + 3.0)
            nodes = -3.0 + half[:, None] * (t + 1.0)
            out[mid] = np.sum(w * g2(nodes), axis=-1) * half
        return out

    def g4(self, x):
        return self.g3(x) * self.g3(-np.asarray(x, float))

    def f(self, y):
        # f is even: 1 on |y| <= 1, g3(-|y|) / C_g on the transition band, 0 beyond 3
        a = np.abs(np.asarray(y, float))
        return self.g3(-a) / self.C_g

    def df(self, y):
        y = np.asarray(y, float)
        # on (1, 3): f = g3(-y)/C_g, f' = -g2(-y)/C_g; odd extension to (-3, -1)
        return np.where(y > 0, -g2(-y), g2(y)) / self.C_g

    __call__ = f


def build_bump(tol=1e-12):
    """Construct the cutoff; C_g by adaptive quadrature of g2."""
    val, err = integrate.quad(lambda s: float(g2(np.array(s))), -3.0, -1.0, epsabs=tol, epsrel=tol, limit=200)
    if not np.isfinite(val) or err > 1e-9:
        raise NumericError(f"quadrature of g2 did not converge (estimate {val}, error {err})")
    b = BumpFunction(C_g=val)
    if abs(b.g3(-1.0 - 1e-15) - val) > 1e-11:
        raise NumericError("Gauss and adaptive quadrature of g2 disagree")
    return b


@dataclass(frozen=True)
class GaussianProfile:
    """exp(-pi y^2): a closed-form test profile for the k1 routes."""

    support: float = 8.0

    def f(self, y):
        return np.exp(-np.pi * np.asarray(y, float) ** 2)

    def df(self, y):
        y = np.asarray(y, float)
        return -TWO_PI * y * np.exp(-np.pi * y ** 2)

    __call__ = f


@dataclass(frozen=True)
class ScaledProfile:
    base: object
    scale: float

    @property
    def support(self):
        return self.base.support

    def f(self, y):
        return self.scale * self.base.f(y)

    def df(self, y):
        return self.scale * self.base.df(y)

    __call__ = f


@dataclass(frozen=True)
class ExtensionConstant:
    k1: float
    k1_fft: float
    k1_quad: float
    meta: dict = field(default_factory=dict)


def _k1_fft(bump, n=2 ** 16, length=None):
    L = length if length is not None else 4.0 * bump.support + 4.0
    dx = L / n
    y = (np.arange(n) - n // 2) * dx
    fh = dx * np.fft.fft(bump.f(y))
    t = np.fft.fftfreq(n, dx)
    dt = 1.0 / L
    p = np.abs(fh) ** 2
    total = np.sum((1.0 + t ** 2) * p) * dt
    top = np.abs(t) > 0.5 * np.abs(t).max()
    tail = np.sum((1.0 + t[top] ** 2) * p[top]) * dt
    return float(total), float(tail / total)


def _k1_quad(bump):
    a = bump.support
    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    f2 = sum(integrate.quad(lambda y: float(bump.f(np.array(y))) ** 2, lo, hi, **opts)[0]
             for lo, hi in ((-a, -1.0), (-1.0, 1.0), (1.0, a)))
    d2 = sum(integrate.quad(lambda y: float(bump.df(np.array(y))) ** 2, lo, hi, **opts)[0]
             for lo, hi in ((-a, -1.0), (-1.0, 1.0), (1.0, a)))
    return float(f2 + d2 / TWO_PI ** 2)


def compute_k1(bump=None, rtol=1e-3):
    """``k1 = int (1 + t^2) |f_hat(t)|^2 dt`` by an FFT route and a Parseval/quadrature route."""
    bump = bump if bump is not None else build_bump()
    a, tail = _k1_fft(bump)
    b = _k1_quad(bump)
    if abs(a - b) > rtol * abs(b):
        raise NumericError(f"k1 routes disagree: fft {a!r}, quadrature {b!r}")
    return ExtensionConstant(k1=b, k1_fft=a, k1_quad=b, meta={"fft_tail_fraction": tail})


_K1_CACHE = {}


def default_k1():
    if "k1" not in _K1_CACHE:
        _K1_CACHE["k1"] = compute_k1().k1
    return _K1_CACHE["k1"]


# --- eta -------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EtaExtension:
    """``eta w(x', x3) = sum_xi c_xi f(lambda_xi x3) exp(2 pi i xi . x')`` on a periodic box."""

    coeffs: np.ndarray   # (n, n) Fourier coefficients of w
    box: float
    bump: object

    @cached_property
    def freqs(self):
        n = self.coeffs.shape[0]
        k = np.fft.fftfreq(n, 1.0 / n) / self.box
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def lam(self):
        X1, X2 = self.freqs
        return np.sqrt(1.0 + X1 ** 2 + X2 ** 2)

    def __call__(self, xp, x3):
        """Evaluate at horizontal points xp (k, 2) and heights x3 (k,)."""
        X1, X2 = self.freqs
        ph = np.exp(TWO_PI * 1j * (np.multiply.outer(xp[:, 0], X1.ravel()) + np.multiply.outer(xp[:, 1], X2.ravel())))
        prof = self.bump.f(np.multiply.outer(np.asarray(x3, float), self.lam.ravel()))
        return np.sum(ph * prof * self.coeffs.ravel(), axis=1)

    def on_grid(self, x3):
        """Samples on the periodic grid at height x3 (inverse FFT)."""
        n = self.coeffs.shape[0]
        return np.fft.ifft2(self.coeffs * self.bump.f(self.lam * x3)) * n * n

    def h12_norm(self):
        return float(np.sqrt(self.box ** 2 * np.sum(self.lam * np.abs(self.coeffs) ** 2)))

    def h1_norm(self, n_gauss=64):
        """H1 norm on box x (0, inf): Parseval in x', Gauss quadrature in x3 per mode."""
        t, w = roots_legendre(n_gauss)
        lam = self.lam.ravel()
        c2 = np.abs(self.coeffs.ravel()) ** 2
        total = 0.0
        # profile pieces: constant on y in [0, 1], smooth on [1, 3]
        for lo, hi in ((0.0, 1.0), (1.0, self.bump.support)):
            y = lo + 0.5 * (hi - lo) * (t + 1.0)
            wy = 0.5 * (hi - lo) * w
            F = self.bump.f(y)
            dF = self.bump.df(y)
            per_y = np.sum(wy * (F ** 2 + dF ** 2 / TWO_PI ** 2))
            # x3 = y / lam: (1 + |xi|^2) f^2 + lam^2 f'^2 / (4 pi^2), dx3 = dy / lam
            total += np.sum(c2 * lam * per_y)
        return float(np.sqrt(self.box ** 2 * total))


def eta_extend(w, bump=None, box=1.0, check=True):
    """Fourier lifting of periodic samples ``w`` (n, n) on ``[0, box)^2``."""
    bump = bump if bump is not None else build_bump()
    w = np.asarray(w, complex)
    n = w.shape[0]
    c = np.fft.fft2(w) / (n * n)
    ext = EtaExtension(c, box, bump)
    if check:
        k = np.abs(np.fft.fftfreq(n, 1.0 / n))
        K = np.maximum.outer(k, k)
        e = np.abs(c) ** 2
        top = e[K > n / 4].sum()
        if e.sum() > 0 and top > 0.01 * e.sum():
            warnings.warn(f"aliasing: {top / e.sum():.1%} of the energy sits in the top frequency octave")
    return ext


def verify_eta(w, bump=None, box=1.0, k1=None):
    """Trace identity and ``||eta w||_{H1} <= sqrt(k1) ||w||_{H^1/2}`` on the grid norms."""
    bump = bump if bump is not None else build_bump()
    k1 = k1 if k1 is not None else compute_k1(bump).k1
    ext = eta_extend(w, bump, box)
    tr = np.abs(ext.on_grid(0.0) - np.asarray(w)).max()
    lhs, nw = ext.h1_norm(), ext.h12_norm()
    rep = BoundCheckReport()
    rep.add("eta_trace", tr, 1e-8, constants={})
    rep.add("eta_H1_sqrt", lhs, np.sqrt(k1) * nw, constants={"k1": k1, "norm_w_H12": nw,
                                                           "ratio": lhs / nw if nw else 0.0})
    rep.add("eta_H1_linear", lhs, k1 * nw, constants={"k1": k1, "norm_w_H12": nw})
    return ext, rep


# --- boundary-to-volume extension --------------------------------------------------------

def _frame(e):
    e = np.asarray(e, float) / np.linalg.norm(e)
    a = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(e, a)
    t1 /= np.linalg.norm(t1)
    return np.stack([t1, np.cross(e, t1), e])


@dataclass(frozen=True, eq=False)
class ChartExtension:
    """Extension from one chart: flatten along ``e``, lift with eta, evaluate in the volume."""

    frame: np.ndarray       # rows t1, t2, e
    tri_y: np.ndarray       # (t, 3, 2) chart facets in local horizontal coordinates
    planes: np.ndarray      # (t, 3): s = a . y + b per facet
    origin: np.ndarray
    box: float
    coeffs: np.ndarray      # (n+1)^2 Fourier coefficients
    kvec: np.ndarray        # ((n+1)^2, 2) frequencies
    bump: object

    def height(self, y):
        # phi_k on the chart facets, continued outside by the plane of the nearest facet
        tri = self.tri_y
        tri3 = np.concatenate([tri, np.zeros(tri.shape[:2] + (1,))], axis=2)
        y3 = np.column_stack([y, np.zeros(len(y))])
        d = point_triangle_distance(y3, tri3[:, 0], tri3[:, 1], tri3[:, 2])
        best = np.argmin(d, axis=1)
        p = self.planes[best]
        return p[:, 0] * y[:, 0] + p[:, 1] * y[:, 1] + p[:, 2]

    def __call__(self, x):
        loc = x @ self.frame.T
        y, s = loc[:, :2], loc[:, 2]
        x3 = s - self.height(y)
        lam = np.sqrt(1.0 + np.sum(self.kvec ** 2, axis=1))
        ph = np.exp(TWO_PI * 1j * ((y - self.origin) @ self.kvec.T))
        return np.sum(ph * self.bump.f(np.multiply.outer(x3, lam)) * self.coeffs, axis=1)


def _chart_extension(mesh, k, direction, g_nodes, bump, grid_n):
    frame = _frame(direction)
    sel = mesh.bface_chart == k
    faces = mesh.bfaces[sel]
    loc = mesh.vertices @ frame.T
    tri_y = loc[faces][:, :, :2]
    s = loc[faces][:, :, 2]
    A = np.concatenate([tri_y, np.ones(tri_y.shape[:2] + (1,))], axis=2)
    planes = np.linalg.solve(A, s[..., None])[..., 0]
    nodes = np.unique(faces)
    y = loc[nodes, :2]
    lo, hi = y.min(axis=0), y.max(axis=0)
    ext = float(np.max(hi - lo))
    box = 2.0 * ext
    origin = lo - 0.5 * ext
    m = np.arange(-(grid_n // 2), grid_n // 2 + 1)
    K1, K2 = np.meshgrid(m, m, indexing="ij")
    kvec = np.column_stack([K1.ravel(), K2.ravel()]) / box
    weight = 1.0 + np.sum(kvec ** 2, axis=1)
    Phi = np.exp(TWO_PI * 1j * ((y - origin) @ kvec.T))
    if len(nodes) > len(kvec):
        raise ParameterError(f"chart {k}: {len(nodes)} nodes exceed {len(kvec)} Fourier modes; raise eta.grid_n")
    G = (Phi / weight) @ Phi.conj().T
    rhs = np.asarray(g_nodes, complex)[nodes]
    c = (Phi.conj() / weight).T @ np.linalg.solve(G, rhs)
    return ChartExtension(frame, tri_y, planes, origin, box, c, kvec, bump)


def extend_h12(g, mesh, partition, directions=None, character=None, bump=None, k1=None,
               grid_n=24, seed=None, gagliardo_levels=1, rule=None):
    """Extension of boundary P1 data ``g`` (values at mesh vertices) into volume P1.

    Each chart is flattened along its direction ``e_k``, lifted by eta, and the chart
    extensions are blended as ``E g = sum_k eta_k^2 E_k g``; since ``sum_k eta_k^2 = 1`` the
    trace is restored exactly at boundary nodes.  The report checks
    ``||E g||_{H1} <= M k1 ||g||_{H^1/2}`` (linear convention) and the sqrt(k1) variant.
    """
    bump = bump if bump is not None else build_bump()
    k1 = k1 if k1 is not None else default_k1()
    if directions is None:
        directions = propose_chart_directions(mesh)
    if character is None:
        character = lipschitz_character(mesh, directions)
    g = np.asarray(g, complex)
    v = mesh.vertices
    eta = partition.evaluate(v)
    if np.any(~np.isfinite(eta)):
        raise CapabilityError("partition of unity does not cover every vertex")
    total = np.zeros(len(v), complex)
    for j, k in enumerate(partition.chart_ids):
        wk = eta[:, j] ** 2
        active = wk > 0
        if not active.any():
            continue
        ce = _chart_extension(mesh, k, directions[k], g, bump, grid_n)
        total[active] += wk[active] * ce(v[active])
    Eg = DiscreteField(FESpace(mesh, "P1"), total)

    surf = Surface.from_mesh(mesh)
    rule = rule if rule is not None else GagliardoRule(surf, 0.5, 3, gagliardo_levels)
    samp_g = p1_sampler(surf, g)
    ng = rule.norm(samp_g)
    ps = boundary_points(mesh, 3)
    tr = Eg.values_at(ps.tets, ps.bary)
    gv = samp_g(ps.faces, np.tile(tri_rule(3)[0], (len(mesh.bfaces), 1)))
    den = np.sqrt(np.sum(ps.w * np.abs(gv) ** 2))
    trace_err = float(np.sqrt(np.sum(ps.w * np.abs(tr - gv) ** 2)) / den) if den > 0 else \
        float(np.sqrt(np.sum(ps.w * np.abs(tr) ** 2)))
    nE = volume_norms(Eg)["H1"]
    fac = character.lipschitz_factor
    rep = BoundCheckReport(meta={"trace_error": trace_err})
    consts = {"M_factor": fac, "k1": k1, "norm_g_H12": ng, "norm_Eg_H1": nE}
    rep.add("extension_h1", nE, fac * k1 * ng, constants=dict(consts, convention="linear"),
            mesh_h=mesh.h, seed=seed)
    rep.add("extension_h1_sqrt", nE, fac * np.sqrt(k1) * ng,
            constants=dict(consts, convention="sqrt"), mesh_h=mesh.h, seed=seed)
    rep.add("extension_trace_restoration", trace_err, 1e-6, constants={}, mesh_h=mesh.h, seed=seed)
    return Eg, rep


# --- pullback ---------------------------------------------------------------------------

def pullback_check(u, A, b=None, s_values=(0.0, 0.5, 1.0), seed=None):
    """Check ``||u o phi||_{H^s(phi^-1(Omega))} <= M ||u||_{H^s(Omega)}`` for affine ``phi(x) = A x + b``.

    ``u`` is a nodal DiscreteField on Omega; the composition has the same coefficients on
    the pulled-back mesh.  ``M = max(||A||, ||A^-1||)``.  H^{1/2} is the discrete
    interpolation norm between L2 and H1.
    """
    A = np.asarray(A, float)
    b = np.zeros(3) if b is None else np.asarray(b, float)
    if abs(np.linalg.det(A)) < 1e-14:
        raise ParameterError("affine map is singular")
    Ainv = np.linalg.inv(A)
    M = max(np.linalg.norm(A, 2), np.linalg.norm(Ainv, 2))
    mesh = u.mesh
    pulled = mesh.mapped(lambda x: (x - b) @ Ainv.T)
    up = DiscreteField(FESpace(pulled, u.space.kind), u.coeffs)
    rep = BoundCheckReport(meta={"M": M, "det": float(np.linalg.det(A))})
    for s in s_values:
        lhs = interpolation_norm(up, s)
        rhs = M * interpolation_norm(u, s)
        rep.add(f"pullback_s{s:g}", lhs, rhs, constants={"M": M, "s": s},
                mesh_h=mesh.h, seed=seed, tol=1e-10 * max(rhs, 1e-300))
    return rep
