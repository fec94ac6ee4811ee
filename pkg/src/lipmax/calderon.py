"""Exterior Calderon operator on a sphere, block-diagonal in vector spherical harmonics.

Tangential fields on the sphere of radius R are expanded as ``m = sum a_lm Z_lm + b_lm X_lm``
(angular functions of unit norm on the unit sphere, so ``||m||^2_{L2} = R^2 sum |a|^2 + |b|^2``).
The Z part is the trace of the M-type (TE) outgoing waves and the X part that of the N-type
(TM) waves.  With ``x = k0 R`` and ``zeta = x h_l(x)`` the operator acts on each (l, m) as::

    a' = c2 b,  b' = c1 a,   c1 = i zeta'/zeta,  c2 = i zeta/zeta'

so every 2x2 block squares to ``c1 c2 I = -I``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, ParameterError
from .reports import BoundCheckReport
from .special import lm_index, riccati, sphere_quadrature, vsh, wave_functions


@dataclass
class MultipoleCoefficients:
    """Tangential-trace coefficients on a sphere (a: Z / M-type, b: X / N-type)."""

    L: int
    a: np.ndarray
    b: np.ndarray
    R: float = 1.0
    k0: float = 1.0

    def __post_init__(self):
        n = self.L * (self.L + 2)
        self.a = np.asarray(self.a, complex).reshape(-1)
        self.b = np.asarray(self.b, complex).reshape(-1)
        if self.L < 1 or self.a.shape != (n,) or self.b.shape != (n,):
            raise ParameterError(f"coefficient arrays must have length L(L+2) = {n}")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ParameterError("non-finite multipole coefficient")
        if not (self.R > 0 and np.real(self.k0) > 0):
            raise ParameterError("k0 R must be positive")

    @classmethod
    def zeros(cls, L, R=1.0, k0=1.0):
        n = L * (L + 2)
        return cls(L, np.zeros(n), np.zeros(n), R, k0)

    @classmethod
    def random(cls, L, rng, R=1.0, k0=1.0):
        n = L * (L + 2)
        c = rng.standard_normal((4, n))
        return cls(L, c[0] + 1j * c[1], c[2] + 1j * c[3], R, k0)

    @classmethod
    def from_amplitudes(cls, L, A, B, R=1.0, k0=1.0):
        """Traces of ``E = sum A_lm M_lm + B_lm N_lm`` (outgoing, wavenumber k0) on radius R."""
        l = lm_index(L)[:, 0]
        f, _, dz = riccati(L, k0 * R)
        x = k0 * R
        return cls(L, np.asarray(A) * f[l], -np.asarray(B) * dz[l] / x, R, k0)

    def amplitudes(self):
        """Inverse of :meth:`from_amplitudes`: (A, B) of the outgoing field with these traces."""
        l = lm_index(self.L)[:, 0]
        f, _, dz = riccati(self.L, self.k0 * self.R)
        x = self.k0 * self.R
        return self.a / f[l], -self.b * x / dz[l]

    @property
    def degrees(self):
        return lm_index(self.L)[:, 0]

    def vector(self):
        return np.concatenate([self.a, self.b])

    def like(self, a, b):
        return MultipoleCoefficients(self.L, a, b, self.R, self.k0)

    def __add__(self, o):
        return self.like(self.a + o.a, self.b + o.b)

    def __sub__(self, o):
        return self.like(self.a - o.a, self.b - o.b)

    def __mul__(self, s):
        return self.like(s * self.a, s * self.b)

    __rmul__ = __mul__

    def l2_norm(self):
        return self.R * np.sqrt(np.sum(np.abs(self.a) ** 2 + np.abs(self.b) ** 2))

    def surrogate_weights(self):
        """Per-coefficient weights (w_a, w_b) of the discrete trace-space metric."""
        lam = 1.0 + self.degrees * (self.degrees + 1.0) / self.R ** 2
        return np.sqrt(lam), 1.0 / np.sqrt(lam)

    def surrogate_norm(self):
        wa, wb = self.surrogate_weights()
        return self.R * np.sqrt(np.sum(wa * np.abs(self.a) ** 2 + wb * np.abs(self.b) ** 2))

    def evaluate(self, x):
        """Tangential field ``sum a Z + b X`` at the directions of points x (n, 3)."""
        _, X, Z = vsh(self.L, x)
        return np.einsum("k,nkd->nd", self.a, Z) + np.einsum("k,nkd->nd", self.b, X)

    def field(self, x):
        """(E, H) of the outgoing field whose tangential trace these coefficients describe.

        ``H = curl E / (i k0)``; valid for |x| >= R.
        """
        A, B = self.amplitudes()
        M, N = wave_functions(self.L, self.k0, x)
        E = np.einsum("k,nkd->nd", A, M) + np.einsum("k,nkd->nd", B, N)
        H = -1j * (np.einsum("k,nkd->nd", A, N) + np.einsum("k,nkd->nd", B, M))
        return E, H


def calderon_blocks(L, k0, R):
    """(c1, c2) for l = 1..L; raises ConditioningError at a numerical zero."""
    x = k0 * R
    if not (R > 0 and np.real(x) > 0):
        raise ParameterError("k0 R must be positive")
    _, zeta, dzeta = riccati(L, x)
    c1 = np.empty(L, complex)
    c2 = np.empty(L, complex)
    for l in range(1, L + 1):
        if abs(dzeta[l]) < 1e-13 * abs(zeta[l]) or not np.isfinite(zeta[l]):
            raise ConditioningError(f"Riccati-Hankel derivative vanishes at k0 R = {x} for l = {l}")
        c1[l - 1] = 1j * dzeta[l] / zeta[l]
        c2[l - 1] = 1j * zeta[l] / dzeta[l]
    return c1, c2


def block_matrix(l, k0, R):
    c1, c2 = calderon_blocks(l, k0, R)
    return np.array([[0.0, c2[l - 1]], [c1[l - 1], 0.0]])


def apply_calderon(m):
    """Map trace coefficients of E_s to those of ``H_s = curl E_s / (i k0)``."""
    c1, c2 = calderon_blocks(m.L, m.k0, m.R)
    l = m.degrees - 1
    return m.like(c2[l] * m.b, c1[l] * m.a)


def pairing(u, v):
    """``int (sum a_u Z + b_u X) . (nu x conj(sum a_v Z + b_v X)) dsigma`` in closed form.

    Uses ``nu x Z = -X``, ``nu x X = Z`` and orthonormality.
    """
    return u.R ** 2 * np.sum(u.a * np.conj(v.b) - u.b * np.conj(v.a))


def positivity(m):
    """``Re int C(m) . (nu x conj m) dsigma`` with the outward normal."""
    return float(np.real(pairing(apply_calderon(m), m)))


def project_tangential(values, directions, weights, L, R=1.0, k0=1.0):
    """Coefficients of tangential samples on a sphere by quadrature against Z and X."""
    _, X, Z = vsh(L, directions)
    a = np.einsum("n,nd,nkd->k", weights, values, Z.conj())
    b = np.einsum("n,nd,nkd->k", weights, values, X.conj())
    return MultipoleCoefficients(L, a, b, R, k0)


def calderon_norm_lower_bound(L, k0, R):
    """Largest block singular value in the surrogate metric, and its reciprocal.

    With ``D = diag(lambda^{1/4}, lambda^{-1/4})`` the weighted block ``D B D^{-1}`` has
    singular values ``|c2| sqrt(lambda)`` and ``|c1| / sqrt(lambda)`` (their product is 1).
    """
    c1, c2 = calderon_blocks(L, k0, R)
    l = np.arange(1, L + 1)
    lam = 1.0 + l * (l + 1.0) / R ** 2
    s = np.column_stack([np.abs(c2) * np.sqrt(lam), np.abs(c1) / np.sqrt(lam)])
    per_l = s.max(axis=1)
    C = float(per_l.max())
    return {"C_est": C, "c_est": 1.0 / C, "block_norms": per_l, "argmax_l": int(l[per_l.argmax()])}


def _random_interior_field(rng, L, k):
    """Smooth interior field: regular multipoles plus an affine part."""
    n = L * (L + 2)
    A = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.arange(1, n + 1)
    B = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.arange(1, n + 1)
    G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)

    def u(x):
        M, N = wave_functions(L, k, x, kind="regular")
        return np.einsum("k,nkd->nd", A, M) + np.einsum("k,nkd->nd", B, N) + x @ G.T + c
    return u


def verify_calderon_properties(L, k0, R, seed=0, n_samples=50, n_fields=5):
    """Involution, positivity, interior positivity and norm sandwich checks."""
    rng = np.random.default_rng(seed)
    rep = BoundCheckReport(meta={"L": L, "k0": k0, "R": R, "normal": "outward",
                                 "pairing": "Re int C(m).(nu x conj m)"})
    c1, c2 = calderon_blocks(L, k0, R)
    for l in range(1, L + 1):
        B = np.array([[0, c2[l - 1]], [c1[l - 1], 0]])
        err = np.linalg.norm(B @ B + np.eye(2), 2)
        rep.add("calderon_involution_block", err, 1e-10, constants={"l": l}, seed=seed, tol=0.0)
    bound = calderon_norm_lower_bound(L, k0, R)
    for i in range(n_samples):
        m = MultipoleCoefficients.random(L, rng, R, k0)
        cm = apply_calderon(m)
        ccm = apply_calderon(cm)
        rel = (ccm + m).l2_norm() / m.l2_norm()
        rep.add("calderon_involution", rel, 1e-10, seed=seed, note=f"sample {i}", tol=0.0)
        p = positivity(m)
        rep.add("calderon_positivity", 0.0, p, seed=seed, note=f"sample {i}", tol=1e-12)
        ratio = cm.surrogate_norm() / m.surrogate_norm()
        rep.add("calderon_norm_upper", ratio, bound["C_est"], constants={"C_est": bound["C_est"]},
                seed=seed, tol=1e-12 * bound["C_est"])
        rep.add("calderon_norm_lower", bound["c_est"], ratio, constants={"c_est": bound["c_est"]},
                seed=seed, tol=1e-12 * bound["C_est"])
    d, w = sphere_quadrature(L + 12)
    nu = d
    for i in range(n_fields):
        u = _random_interior_field(rng, min(L, 4), k0)(R * d)
        gt = np.cross(nu, u)
        pi = u - np.sum(nu * u, axis=1)[:, None] * nu
        m = project_tangential(gt, d, w, L, R, k0)
        cm = apply_calderon(m).evaluate(d)
        val = -np.real(R ** 2 * np.sum(w * np.einsum("nd,nd->n", np.conj(pi), cm)))
        rep.add("calderon_interior_positivity", 0.0, val, seed=seed,
                note=f"field {i}", tol=1e-12)
    return rep
