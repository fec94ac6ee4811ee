"""Interior Maxwell problem coupled to the spherical exterior Calderon operator.

Sesquilinear form on lowest-order edge elements::

    A(u, v) = int (i/k0) curl v* . mu^{-1} curl u - i k0 v* . eps u dx
              - int_{boundary} pi(v)* . C(gamma_t u) dsigma

The boundary integral is evaluated on multipole coefficients: discrete tangential traces
are projected by least squares onto the Z/X harmonics of the circumscribing sphere,
``pi(v) = -nu x gamma_t(v)`` and the closed-form pairing is used.  This makes the boundary
part a rank-2K Hermitian-free correction ``P^H D P`` (K = L(L+2)), which the solver handles
by the Sherman-Morrison-Woodbury identity around a sparse LU of the volume part.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .calderon import MultipoleCoefficients, apply_calderon, calderon_blocks, calderon_norm_lower_bound
from .errors import MaterialError, ParameterError, SolverError
from .fem import DiscreteField, FESpace, boundary_points, volume_points
from .reports import BoundCheckReport
from .special import expand, lm_index, riccati, sphere_quadrature, vsh

SQ2 = np.sqrt(2.0)


# --- materials --------------------------------------------------------------------

def _as_tensor(a, x):
    """Evaluate a material description at points x (n, 3) -> (n, 3, 3) complex."""
    n = len(x)
    if callable(a):
        t = np.asarray(a(x), complex)
    else:
        t = np.asarray(a, complex)
    if t.ndim == 0:
        t = t * np.eye(3)
    if t.ndim == 2:
        t = np.broadcast_to(t, (n, 3, 3))
    if t.shape != (n, 3, 3):
        raise MaterialError(f"material tensor has shape {t.shape}, expected ({n}, 3, 3)")
    return t


@dataclass
class MaterialTensors:
    """Permittivity and permeability (scalar, 3x3, per-element array or callable) and k0.

    Per-element arrays must have shape (m, 3, 3); callables take points (n, 3).
    """

    epsilon: object
    mu: object
    k0: float = 1.0

    def __post_init__(self):
        if not self.k0 > 0:
            raise ParameterError("k0 must be positive")

    def _eval(self, a, mesh, tets, x):
        a_arr = None if callable(a) else np.asarray(a, complex)
        if a_arr is not None and a_arr.ndim == 3:
            if a_arr.shape != (len(mesh.tets), 3, 3):
                raise MaterialError("per-element material array does not match the mesh")
            return a_arr[tets]
        return _as_tensor(a, x)

    def at_elements(self, mesh):
        """(eps, mu) as (m, 3, 3) arrays, sampled at element centroids."""
        c = mesh.vertices[mesh.tets].mean(axis=1)
        t = np.arange(len(mesh.tets))
        return self._eval(self.epsilon, mesh, t, c), self._eval(self.mu, mesh, t, c)

    def at_points(self, mesh, ps):
        return self._eval(self.epsilon, mesh, ps.tets, ps.x), self._eval(self.mu, mesh, ps.tets, ps.x)

    def mu_inverse(self, mu):
        cond = np.linalg.cond(mu)
        if not np.all(np.isfinite(cond)) or cond.max() > 1e12:
            raise MaterialError(f"permeability singular or ill-conditioned (cond = {cond.max():.3g})")
        return np.linalg.inv(mu), float(cond.max())

    def coercivity_margin(self, mesh):
        """Smallest eigenvalue of ``diag(-i k0 (eps - eps^H), -i k0 (mu - mu^H))`` over elements."""
        eps, mu = self.at_elements(mesh)
        a = -1j * self.k0 * (eps - _herm(eps))
        b = -1j * self.k0 * (mu - _herm(mu))
        return float(min(np.linalg.eigvalsh(a).min(), np.linalg.eigvalsh(b).min()))


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class CoercivityConstants:
    C0: float
    C0_tilde: float

    @property
    def min(self):
        return min(self.C0, self.C0_tilde)


def coercivity_constants(mat, eps=None, mu=None, mesh=None, strict=True):
    """``C0 = min eig(-i k0 (eps - eps^H))`` and ``C0~ = min eig(i/k0 (mu^-1 - mu^-H))``.

    Samples come from ``eps``/``mu`` arrays (n, 3, 3) or from the elements of ``mesh``.
    With ``strict`` a nonpositive constant raises MaterialError.
    """
    if eps is None or mu is None:
        if mesh is None:
            eps, mu = _as_tensor(mat.epsilon, np.zeros((1, 3))), _as_tensor(mat.mu, np.zeros((1, 3)))
        else:
            eps, mu = mat.at_elements(mesh)
    k0 = mat.k0
    a = -1j * k0 * (eps - _herm(eps))
    mi, _ = mat.mu_inverse(mu)
    b = 1j / k0 * (mi - _herm(mi))
    for h, name in ((a, "epsilon"), (b, "mu")):
        if np.abs(h - _herm(h)).max() > 1e-12 * max(1.0, np.abs(h).max()):
            raise MaterialError(f"coercivity matrix for {name} is not Hermitian")
    C = CoercivityConstants(float(np.linalg.eigvalsh(a).min()), float(np.linalg.eigvalsh(b).min()))
    if strict and (C.C0 <= 0 or C.C0_tilde <= 0):
        raise MaterialError(f"inadmissible (lossless) material: C0 = {C.C0:.3g}, C0~ = {C.C0_tilde:.3g}")
    return C


# --- boundary coupling -------------------------------------------------------------

class TraceProjector:
    """Least-squares projection of discrete tangential traces onto sphere harmonics.

    ``P`` (2K, ndof) maps edge coefficients to (a, b) trace coefficients; rows
    ``[:K]`` are the Z (a) part and ``[K:]`` the X (b) part.
    """

    def __init__(self, space, L=10, R=None, order=3):
        mesh = space.mesh
        self.space, self.L = space, L
        self.R = float(np.linalg.norm(mesh.vertices, axis=1).max()) if R is None else float(R)
        ps = boundary_points(mesh, order)
        self.ps = ps
        phi = space.basis(ps.tets, ps.bary)                     # (nq, 6, 3)
        gt = np.cross(ps.normals[:, None, :], phi)
        _, X, Z = vsh(L, ps.x)
        Phi = np.concatenate([Z, X], axis=1)                    # (nq, 2K, 3)
        F = Phi.transpose(0, 2, 1).reshape(-1, Phi.shape[1])    # (3 nq, 2K)
        G = F.conj().T @ (np.repeat(ps.w, 3)[:, None] * F)
        self.gram_cond = float(np.linalg.cond(G))
        # rhs for every local basis function, then scatter to global dofs
        loc = ps.w[:, None, None] * (Phi.conj() @ gt.transpose(0, 2, 1))   # (nq, 2K, 6)
        dofs = space.dofmap[ps.tets]                            # (nq, 6)
        nk = Phi.shape[1]
        rows = np.repeat(np.arange(nk)[None, :, None], len(ps.w), axis=0)
        rows = np.broadcast_to(rows, loc.shape)
        cols = np.broadcast_to(dofs[:, None, :], loc.shape)
        Bm = sp.coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(nk, space.ndof)).tocsc()
        self.bdofs = np.unique(dofs)
        self.P = np.linalg.solve(G, Bm[:, self.bdofs].toarray())   # (2K, nb)
        self._Phi, self._gt_basis, self._dofs = Phi, gt, dofs

    @property
    def K(self):
        return self.L * (self.L + 2)

    def coefficients(self, coeffs, k0=1.0):
        c = self.P @ np.asarray(coeffs)[self.bdofs]
        return MultipoleCoefficients(self.L, c[:self.K], c[self.K:], self.R, k0)

    def residual(self, coeffs):
        """Relative L2 residual of the projected trace on the mesh boundary."""
        c = np.asarray(coeffs)
        gt = np.einsum("qad,qa->qd", self._gt_basis, c[self._dofs])
        fit = np.einsum("qkd,k->qd", self._Phi, self.P @ c[self.bdofs])
        w = self.ps.w
        num = np.sum(w * np.sum(np.abs(gt - fit) ** 2, axis=1))
        den = np.sum(w * np.sum(np.abs(gt) ** 2, axis=1))
        return float(np.sqrt(num / den)) if den > 0 else 0.0


def sphere_traces(field, L, R, k0, n_theta=None):
    """Trace coefficients of ``nu x field`` on the sphere of radius R (exact quadrature)."""
    d, w = sphere_quadrature(n_theta or L + 8)
    v = field(R * d)
    gt = np.cross(d, v)
    _, X, Z = vsh(L, d)
    return MultipoleCoefficients(L, np.einsum("n,nd,nkd->k", w, gt, Z.conj()),
                                 np.einsum("n,nd,nkd->k", w, gt, X.conj()), R, k0)


@dataclass
class LinearSystem:
    """Sparse volume matrix, low-rank boundary factors and right-hand side.

    The Galerkin matrix is ``A_vol + P^H diag(D) P`` (row = test function).
    """

    A_vol: sp.csc_matrix
    P: np.ndarray
    D: np.ndarray
    bdofs: np.ndarray
    rhs: np.ndarray
    space: FESpace
    mat: MaterialTensors
    projector: TraceProjector
    meta: dict = field(default_factory=dict)

    @property
    def ndof(self):
        return self.space.ndof

    def boundary_matvec(self, x):
        y = np.zeros(self.ndof, complex)
        y[self.bdofs] = self.P.conj().T @ (self.D * (self.P @ x[self.bdofs]))
        return y

    def matvec(self, x):
        return self.A_vol @ x + self.boundary_matvec(x)

    def dense(self):
        """Full matrix (small meshes only)."""
        A = self.A_vol.toarray().astype(complex)
        ib = np.ix_(self.bdofs, self.bdofs)
        A[ib] += self.P.conj().T @ (self.D[:, None] * self.P)
        return A

    def form(self, u, v):
        """``A(u, v)`` for coefficient vectors (conjugate-linear in v)."""
        return np.vdot(v, self.matvec(u))

    def boundary_form(self, u, v):
        return np.vdot(v, self.boundary_matvec(u))

    def volume_form(self, u, v):
        return np.vdot(v, self.A_vol @ u)


def volume_matrix(space, mat):
    eps, mu = mat.at_elements(space.mesh)
    mi, _ = mat.mu_inverse(mu)
    K = space.assemble("curl", coef=(1j / mat.k0) * mi)
    Mm = space.assemble("mass", coef=-1j * mat.k0 * eps)
    return (K + Mm).tocsc()


def assemble(mat, mesh, L=10, incident=None, R=None, space=None, projector=None):
    """Galerkin system of the coupled form; ``incident`` provides callables ``E(x)``, ``H(x)``.

    The right-hand side is ``f(v) = int (gamma_t H_i - C gamma_t E_i) . pi(v)* dsigma``.
    """
    space = FESpace(mesh, "edge") if space is None else space
    proj = TraceProjector(space, L, R) if projector is None else projector
    k0 = mat.k0
    c1, c2 = calderon_blocks(L, k0, proj.R)
    l = lm_index(L)[:, 0] - 1
    D = proj.R ** 2 * np.concatenate([-c1[l], c2[l]])
    A_vol = volume_matrix(space, mat)
    rhs = np.zeros(space.ndof, complex)
    meta = {"L": L, "R": proj.R, "k0": k0, "ndof": space.ndof, "gram_cond": proj.gram_cond,
            "coupling": "sphere" if _on_sphere(mesh, proj.R) else "surrogate coupling"}
    if incident is not None:
        e = sphere_traces(incident.E, L, proj.R, k0)
        h = sphere_traces(incident.H, L, proj.R, k0)
        g = h - apply_calderon(e)
        # f_j = -R^2 sum(g_a conj(Pb_j) - g_b conj(Pa_j))
        K = proj.K
        Pa, Pb = proj.P[:K], proj.P[K:]
        rhs[proj.bdofs] = -proj.R ** 2 * (Pb.conj().T @ g.a - Pa.conj().T @ g.b)
    return LinearSystem(A_vol, proj.P, D, proj.bdofs, rhs, space, mat, proj, meta)


def _on_sphere(mesh, R):
    bv = mesh.vertices[np.unique(mesh.bfaces)]
    return bool(np.abs(np.linalg.norm(bv, axis=1) - R).max() < 1e-9 * R)


@dataclass
class Solution:
    E: DiscreteField
    system: LinearSystem
    residual: float
    meta: dict = field(default_factory=dict)

    def H(self, x=None, tets=None, bary=None):
        """``H = (-i/k0) mu^{-1} curl E``, piecewise per element."""
        mesh = self.E.mesh
        if x is not None:
            from .fem import locate
            tets = locate(mesh, x)
            bary = mesh.barycentric(tets, np.atleast_2d(x))
        c = self.E.curl_at(tets, bary)
        _, mu = self.system.mat.at_elements(mesh)
        mi = np.linalg.inv(mu[tets])
        return (-1j / self.system.mat.k0) * np.einsum("nij,nj->ni", mi, c)


def solve_interior(system, method="direct", tol=1e-10):
    """Solve the coupled system; direct LU + Woodbury by default, GMRES as fallback."""
    b = system.rhs
    if not np.any(b):
        return Solution(system.space.zero(), system, 0.0, {"method": "trivial"})
    if method == "direct":
        try:
            lu = spla.splu(system.A_vol, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        nb = len(system.bdofs)
        U = np.zeros((system.ndof, system.P.shape[0]), complex)
        U[system.bdofs] = system.P.conj().T
        Y = lu.solve(U)
        y = lu.solve(b)
        cap = np.diag(1.0 / system.D) + system.P @ Y[system.bdofs]
        try:
            z = np.linalg.solve(cap, system.P @ y[system.bdofs])
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"capacitance matrix singular (cond {np.linalg.cond(cap):.3g})") from exc
        x = y - Y @ z
        meta = {"method": "direct", "capacitance_cond": float(np.linalg.cond(cap)), "n_boundary": nb}
    elif method == "gmres":
        op = spla.LinearOperator((system.ndof,) * 2, matvec=system.matvec, dtype=complex)
        ilu = spla.spilu(system.A_vol, drop_tol=1e-4, fill_factor=20)
        pre = spla.LinearOperator((system.ndof,) * 2, matvec=ilu.solve, dtype=complex)
        x, info = spla.gmres(op, b, M=pre, rtol=tol, restart=200, maxiter=2000)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info = {info})")
        meta = {"method": "gmres"}
    else:
        raise ParameterError(f"unknown solver method '{method}'")
    res = float(np.linalg.norm(system.matvec(x) - b) / np.linalg.norm(b))
    if res > 1e-10:
        raise SolverError(f"algebraic residual {res:.3g} exceeds 1e-10")
    E = DiscreteField(system.space, x)
    tr = system.projector.residual(x)
    if tr > 0.05:
        warnings.warn(f"trace projection residual {tr:.3g} exceeds 5%")
    meta["trace_projection_residual"] = tr
    return Solution(E, system, res, meta)


# --- incident fields and the manufactured solution -------------------------------

@dataclass
class MultipoleIncident:
    """Entire (regular) vacuum field ``E = sum A M_reg + B N_reg``, ``H = -i (A N + B M)``."""

    L: int
    A: np.ndarray
    B: np.ndarray
    k0: float = 1.0

    def E(self, x):
        return expand(self.L, self.k0, x, self.A, self.B, "regular")

    def H(self, x):
        return (-1j / self.k0) * expand(self.L, self.k0, x, self.A, self.B, "regular", curl=True)

    def curl_E(self, x):
        return 1j * self.k0 * self.H(x)

    def curl_H(self, x):
        return -1j * self.k0 * self.E(x)


def sphere_transmission(l, k0, R, eps_r, mu_r):
    """Interior and scattered amplitudes for unit regular incidence on a homogeneous sphere.

    Returns ``{"M": (p, q), "N": (p, q)}``: interior amplitude p (wavenumber
    ``k1 = k0 sqrt(eps_r mu_r)``) and outgoing amplitude q for M- and N-type incidence.
    """
    k1 = k0 * np.sqrt(complex(eps_r * mu_r))
    x0, x1 = k0 * R, k1 * R
    j0, psi0, dpsi0 = (a[l] for a in riccati(l, x0, "regular"))
    h0, _, dxi0 = (a[l] for a in riccati(l, x0, "outgoing"))
    j1, _, dpsi1 = (a[l] for a in riccati(l, x1, "regular"))
    # M type: p j1 = j0 + q h0 ; p dpsi1 / mu = dpsi0 + q dxi0
    pM, qM = np.linalg.solve([[j1, -h0], [dpsi1 / mu_r, -dxi0]], [j0, dpsi0])
    # N type: p dpsi1 / x1 = (dpsi0 + q dxi0) / x0 ; (k1 / (k0 mu)) p j1 = j0 + q h0
    pN, qN = np.linalg.solve([[dpsi1 / x1, -dxi0 / x0], [k1 / (k0 * mu_r) * j1, -h0]], [dpsi0 / x0, j0])
    return {"M": (pM, qM), "N": (pN, qN), "k1": k1}


@dataclass
class SphereScattering:
    """Exact fields of a homogeneous isotropic sphere under a regular multipole incidence."""

    L: int
    A: np.ndarray
    B: np.ndarray
    k0: float
    R: float
    eps_r: complex
    mu_r: complex

    def __post_init__(self):
        l = lm_index(self.L)[:, 0]
        tr = [sphere_transmission(int(li), self.k0, self.R, self.eps_r, self.mu_r) for li in range(1, self.L + 1)]
        self.k1 = tr[0]["k1"]
        pM = np.array([t["M"][0] for t in tr])[l - 1]
        qM = np.array([t["M"][1] for t in tr])[l - 1]
        pN = np.array([t["N"][0] for t in tr])[l - 1]
        qN = np.array([t["N"][1] for t in tr])[l - 1]
        self.int_A, self.int_B = self.A * pM, self.B * pN
        self.sca_A, self.sca_B = self.A * qM, self.B * qN

    @property
    def incident(self):
        return MultipoleIncident(self.L, self.A, self.B, self.k0)

    def interior_E(self, x):
        return expand(self.L, self.k1, x, self.int_A, self.int_B, "regular")

    def interior_curl_E(self, x):
        return expand(self.L, self.k1, x, self.int_A, self.int_B, "regular", curl=True)

    def scattered_coefficients(self):
        """Trace coefficients of the scattered field on the sphere."""
        return MultipoleCoefficients.from_amplitudes(self.L, self.sca_A, self.sca_B, self.R, self.k0)

    def scattered(self, x):
        return self.scattered_coefficients().field(x)


def hcurl_error(E, exact, exact_curl, order=4):
    """Absolute and relative H(curl) error of a discrete field against a closed form."""
    ps = volume_points(E.mesh, order)
    e = E.values_at(ps.tets, ps.bary) - exact(ps.x)
    c = E.curl_at(ps.tets, ps.bary) - exact_curl(ps.x)
    err = np.sqrt(np.sum(ps.w * (np.sum(np.abs(e) ** 2, 1) + np.sum(np.abs(c) ** 2, 1))))
    ref = np.sqrt(np.sum(ps.w * (np.sum(np.abs(exact(ps.x)) ** 2, 1) + np.sum(np.abs(exact_curl(ps.x)) ** 2, 1))))
    return float(err), float(err / ref)


def field_hcurl_norm(mesh, f, curl_f, order=4):
    ps = volume_points(mesh, order)
    return float(np.sqrt(np.sum(ps.w * (np.sum(np.abs(f(ps.x)) ** 2, 1) + np.sum(np.abs(curl_f(ps.x)) ** 2, 1)))))


# --- verification -------------------------------------------------------------------

def verify_form_bounds(system, character, k1, seed=0, n_samples=100, C_est=None):
    """Discrete coercivity and boundary-term boundedness on seeded random fields.

    Checks (per sample):

    ``coercivity``: ``Re A(u,u) >= min(C0, C0~) ||u||^2_Hcurl`` (stated constant);
    ``coercivity_pointwise``: ``Re A(u,u) >= (C0 ||u||^2 + C0~ ||curl u||^2) / 2``, the
    bound that follows from the pointwise real part of the volume integrand;
    ``form_boundary_bound``: ``|b(u,v)| <= K ||u|| ||v||`` with
    ``K = (1+sqrt2) (M k1)^2 C_est``.
    """
    space, mat = system.space, system.mat
    rng = np.random.default_rng(seed)
    C = coercivity_constants(mat, mesh=space.mesh)
    Mm = space.assemble("mass")
    Kc = space.assemble("curl")
    Mk1 = character.lipschitz_factor * k1
    if C_est is None:
        C_est = calderon_norm_lower_bound(system.projector.L, mat.k0, system.projector.R)["C_est"]
    K = (1 + SQ2) * Mk1 ** 2 * C_est
    consts = {"C0": C.C0, "C0_tilde": C.C0_tilde, "min_C0": C.min, "K": K, "M_factor": character.lipschitz_factor,
              "k1": k1, "C_est": C_est}
    h = space.mesh.h
    rep = BoundCheckReport(meta=dict(consts, ndof=space.ndof, coupling=system.meta.get("coupling")))
    for i in range(n_samples):
        u = rng.standard_normal(space.ndof) + 1j * rng.standard_normal(space.ndof)
        v = rng.standard_normal(space.ndof) + 1j * rng.standard_normal(space.ndof)
        l2 = np.real(np.vdot(u, Mm @ u))
        cu = np.real(np.vdot(u, Kc @ u))
        re = np.real(system.form(u, u))
        nrm2 = l2 + cu
        rep.add("coercivity", C.min * nrm2, re, constants=consts, mesh_h=h, seed=seed, tol=1e-8 * C.min * nrm2,
                note=f"sample {i}")
        rep.add("coercivity_pointwise", 0.5 * (C.C0 * l2 + C.C0_tilde * cu), re, constants=consts, mesh_h=h,
                seed=seed, tol=1e-8 * nrm2, note=f"sample {i}")
        rep.add("boundary_term_nonnegative", 0.0, np.real(system.boundary_form(u, u)), mesh_h=h,
                seed=seed, tol=1e-12 * nrm2, note=f"sample {i}")
        nv = np.sqrt(np.real(np.vdot(v, Mm @ v)) + np.real(np.vdot(v, Kc @ v)))
        rep.add("form_boundary_bound", abs(system.boundary_form(u, v)), K * np.sqrt(nrm2) * nv,
                constants=consts, mesh_h=h, seed=seed, note=f"sample {i}")
    return rep


def material_deviation(mat, mesh):
    """(||eps - I||_inf, ||mu^{-1} - I||_inf) as maxima of spectral norms over elements."""
    eps, mu = mat.at_elements(mesh)
    mi = np.linalg.inv(mu)
    I = np.eye(3)
    return float(np.linalg.norm(eps - I, 2, axis=(1, 2)).max()), float(np.linalg.norm(mi - I, 2, axis=(1, 2)).max())


def solution_bound_constants(character, k1, C, C_est, dev, k0):
    """Itemized constants of the two solution bounds."""
    Mk1 = character.lipschitz_factor * k1
    main = (1 + SQ2) * Mk1 ** 2 / C.min * C_est if C.min > 0 else np.inf
    alt_num = max(k0 * dev[0], dev[1] / k0)
    alt = alt_num / C.min if C.min > 0 else np.inf
    return {"M_factor": character.lipschitz_factor, "k1": k1, "Mk1": Mk1, "C0": C.C0, "C0_tilde": C.C0_tilde,
            "min_C0": C.min, "C_est": C_est, "eps_dev": dev[0], "muinv_dev": dev[1], "k0": k0,
            "main_constant": main, "alt_numerator": alt_num, "alt_constant": alt}


def verify_solution_bounds(solution, incident, character, k1, C_est=None, seed=None, order=4):
    """Main solution bound (with the C_est surrogate) and the difference-field bound.

    A failing main bound is annotated "surrogate-tight": C_est underestimates the exact
    operator norm, so the checked inequality is stricter than the theoretical one.
    """
    system = solution.system
    mat, mesh = system.mat, system.space.mesh
    k0 = mat.k0
    C = coercivity_constants(mat, mesh=mesh, strict=False)
    if C_est is None:
        C_est = calderon_norm_lower_bound(system.projector.L, k0, system.projector.R)["C_est"]
    dev = material_deviation(mat, mesh)
    consts = solution_bound_constants(character, k1, C, C_est, dev, k0)
    ps = volume_points(mesh, order)
    Ei, Hi = incident.E(ps.x), incident.H(ps.x)
    cEi, cHi = 1j * k0 * Hi, -1j * k0 * Ei
    nEi = np.sqrt(np.sum(ps.w * (np.sum(np.abs(Ei) ** 2, 1) + np.sum(np.abs(cEi) ** 2, 1))))
    nHi = np.sqrt(np.sum(ps.w * (np.sum(np.abs(Hi) ** 2, 1) + np.sum(np.abs(cHi) ** 2, 1))))
    E = solution.E.values_at(ps.tets, ps.bary)
    cE = solution.E.curl_at(ps.tets, ps.bary)
    nE = np.sqrt(np.sum(ps.w * (np.sum(np.abs(E) ** 2, 1) + np.sum(np.abs(cE) ** 2, 1))))
    nD = np.sqrt(np.sum(ps.w * (np.sum(np.abs(E - Ei) ** 2, 1) + np.sum(np.abs(cE - cEi) ** 2, 1))))
    consts.update({"norm_E": float(nE), "norm_Ei": float(nEi), "norm_Hi": float(nHi), "norm_E_minus_Ei": float(nD)})
    rep = BoundCheckReport(meta=dict(consts))
    h = mesh.h
    if C.min <= 0:
        note = "material not lossy: outside the coercivity hypothesis"
        rep.add("solution_bound", nE, np.nan, constants=consts, mesh_h=h, seed=seed, note=note, skipped=True)
        rep.add("difference_bound", nD, np.nan, constants=consts, mesh_h=h, seed=seed, note=note, skipped=True)
        return rep
    c = rep.add("solution_bound", nE, consts["main_constant"] * (nHi + nEi), constants=consts, mesh_h=h,
                seed=seed, tol=1e-12 * max(nE, 1.0))
    if not c.passed:
        c.note = "surrogate-tight"
    rep.add("difference_bound", nD, consts["alt_constant"] * nEi, constants=consts, mesh_h=h, seed=seed,
            tol=1e-12 * max(nD, 1.0))
    return rep
