"""Spherical Hankel/Bessel functions and vector spherical wave functions.

Angular conventions: orthonormal ``Y_lm = Pbar_l^|m|(cos theta) s_m e^{i m phi}`` with the
Condon-Shortley phase (``s_m = (-1)^m`` for m < 0),
``X_lm = L Y_lm / sqrt(l(l+1))`` with ``L = -i r x grad`` and ``Z_lm = rhat x X_lm``.
Both X and Z are orthonormal on the unit sphere.

Wave functions of wavenumber k with radial function ``z_l`` (outgoing: first-kind Hankel)::

    M_lm = z_l(kr) X_lm
    N_lm = curl(M_lm) / k = i sqrt(l(l+1)) z_l(kr)/(kr) Y_lm rhat + zeta'(kr)/(kr) Z_lm

with the Riccati function ``zeta(x) = x z_l(x)``; also ``curl N = k M``.
"""
import math

import numpy as np
from scipy.special import spherical_jn

from .errors import ConditioningError


def spherical_hankel1(lmax, z):
    """``h_l^(1)(z)`` for l = 0..lmax by upward recurrence; shape (lmax+1,) + z.shape."""
    z = np.asarray(z, complex)
    h = np.empty((lmax + 1,) + z.shape, complex)
    e = np.exp(1j * z)
    h[0] = -1j * e / z
    if lmax >= 1:
        h[1] = -e * (z + 1j) / z ** 2
    for l in range(1, lmax):
        h[l + 1] = (2 * l + 1) / z * h[l] - h[l - 1]
    return h


def hankel_series(l, z):
    """Closed-form finite series for ``h_l^(1)(z)`` (independent check of the recurrence)."""
    z = np.asarray(z, complex)
    s = sum(1j ** k * math.factorial(l + k) / (math.factorial(k) * math.factorial(l - k)) / (2 * z) ** k
            for k in range(l + 1))
    return (-1j) ** (l + 1) * np.exp(1j * z) / z * s


def riccati(lmax, z, kind="outgoing"):
    """(z_l, zeta_l, zeta_l') for l = 0..lmax where ``zeta_l(x) = x z_l(x)``.

    ``zeta_l' = x z_{l-1} - l z_l`` for l >= 1.
    """
    z = np.asarray(z, complex)
    if kind == "outgoing":
        f = spherical_hankel1(lmax, z)
    elif kind == "regular":
        f = np.stack([spherical_jn(l, z) for l in range(lmax + 1)])
    else:
        raise ValueError(f"unknown radial kind '{kind}'")
    zeta = z * f
    dzeta = np.empty_like(f)
    if kind == "outgoing":
        dzeta[0] = np.exp(1j * z)          # d/dz(-i e^{iz})
    else:
        dzeta[0] = np.cos(z)               # d/dz(sin z)
    for l in range(1, lmax + 1):
        dzeta[l] = z * f[l - 1] - l * f[l]
    return f, zeta, dzeta


def lm_index(L):
    """(l, m) pairs for l = 1..L, |m| <= l, in storage order."""
    return np.array([(l, m) for l in range(1, L + 1) for m in range(-l, l + 1)])


def legendre_pi_tau(L, theta):
    """Normalized ``Pbar_l^m(cos theta)``, ``m Pbar / sin theta`` and ``d Pbar / d theta``.

    Arrays have shape (L+1, L+1, n) indexed [l, m] for 0 <= m <= l.  The ``m/sin`` form is
    obtained from its own recurrence so it stays finite at the poles.
    """
    theta = np.atleast_1d(np.asarray(theta, float))
    n = len(theta)
    ct, st = np.cos(theta), np.sin(theta)
    P = np.zeros((L + 1, L + 1, n))
    Pi = np.zeros((L + 1, L + 1, n))   # Pbar / sin theta for m >= 1
    P[0, 0] = np.sqrt(1.0 / (4.0 * np.pi))
    for m in range(1, L + 1):
        c = -np.sqrt((2 * m + 1) / (2.0 * m))
        Pi[m, m] = c * P[m - 1, m - 1] if m == 1 else c * Pi[m - 1, m - 1] * st
        P[m, m] = c * st * P[m - 1, m - 1]
    for m in range(0, L + 1):
        if m + 1 <= L:
            P[m + 1, m] = np.sqrt(2 * m + 3.0) * ct * P[m, m]
            Pi[m + 1, m] = np.sqrt(2 * m + 3.0) * ct * Pi[m, m]
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l, m] = a * (ct * P[l - 1, m] - b * P[l - 2, m])
            Pi[l, m] = a * (ct * Pi[l - 1, m] - b * Pi[l - 2, m])
    mpi = Pi * np.arange(L + 1)[None, :, None]
    tau = np.zeros_like(P)
    for l in range(1, L + 1):
        tau[l, 0] = np.sqrt(l * (l + 1.0)) * P[l, 1] if l >= 1 else 0.0
        for m in range(1, l + 1):
            c = np.sqrt((2 * l + 1.0) / (2 * l - 1) * (l * l - m * m))
            prev = Pi[l - 1, m] if l - 1 >= m else 0.0
            tau[l, m] = l * ct * Pi[l, m] - c * prev
    return P, mpi, tau


def spherical_coords(x):
    x = np.atleast_2d(np.asarray(x, float))
    r = np.linalg.norm(x, axis=1)
    theta = np.arccos(np.clip(x[:, 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    phi = np.arctan2(x[:, 1], x[:, 0])
    ct, st, cp, sp_ = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    rhat = np.column_stack([st * cp, st * sp_, ct])
    that = np.column_stack([ct * cp, ct * sp_, -st])
    phat = np.column_stack([-sp_, cp, np.zeros_like(phi)])
    return r, theta, phi, rhat, that, phat


def vsh(L, x, select=None):
    """Y, X, Z at the directions of points x (n, 3): shapes (n, K), (n, K, 3), (n, K, 3).

    ``select`` restricts the output to those storage indices.
    """
    r, theta, phi, rhat, that, phat = spherical_coords(x)
    P, mpi, tau = legendre_pi_tau(L, theta)
    lm = lm_index(L)
    if select is not None:
        lm = lm[select]
    l, m = lm[:, 0], lm[:, 1]
    am = np.abs(m)
    s = np.where(m < 0, (-1.0) ** am, 1.0)
    ph = np.exp(1j * np.outer(phi, m)) * s                    # (n, K)
    Y = P[l, am].T * ph
    mY_sin = (np.sign(m)[:, None] * mpi[l, am]).T * ph          # m Y / sin theta
    dY = tau[l, am].T * ph
    norm = 1.0 / np.sqrt(l * (l + 1.0))
    X = (-mY_sin[..., None] * that[:, None, :] - 1j * dY[..., None] * phat[:, None, :]) * norm[None, :, None]
    Z = np.cross(rhat[:, None, :], X)
    return Y, X, Z


def wave_functions(L, k, x, kind="outgoing", select=None):
    """M and N for every (l, m), l <= L (or the ``select`` subset) at points x: (n, K, 3) each."""
    x = np.atleast_2d(np.asarray(x, float))
    r, _, _, rhat, _, _ = spherical_coords(x)
    Y, X, Z = vsh(L, x, select)
    lm = lm_index(L)
    if select is not None:
        lm = lm[select]
    l = lm[:, 0]
    kr = k * r
    f, _, dzeta = riccati(L, kr, kind)
    fl = f[l].T                         # (n, K)
    dl = dzeta[l].T
    M = fl[..., None] * X
    rad = 1j * np.sqrt(l * (l + 1.0))[None, :] * fl / kr[:, None] * Y
    N = rad[..., None] * rhat[:, None, :] + (dl / kr[:, None])[..., None] * Z
    return M, N


def expand(L, k, x, A, B, kind="outgoing", curl=False, chunk=4096):
    """``sum A M + B N`` at points x, or its curl ``k sum (A N + B M)``.

    Only nonzero coefficients are evaluated, in chunks of points.
    """
    x = np.atleast_2d(np.asarray(x, float))
    A, B = np.asarray(A, complex), np.asarray(B, complex)
    sel = np.flatnonzero((A != 0) | (B != 0))
    out = np.zeros((len(x), 3), complex)
    if len(sel) == 0:
        return out
    a, b = A[sel], B[sel]
    if curl:
        a, b = k * b, k * a
    for s in range(0, len(x), chunk):
        M, N = wave_functions(L, k, x[s:s + chunk], kind, select=sel)
        out[s:s + chunk] = np.einsum("k,nkd->nd", a, M) + np.einsum("k,nkd->nd", b, N)
    return out


def check_radial(L, x):
    """Raise if some Riccati-Hankel derivative vanishes (the Calderon block would blow up)."""
    _, zeta, dzeta = riccati(L, x)
    for l in range(1, L + 1):
        if abs(dzeta[l]) < 1e-14 * max(1.0, abs(zeta[l])) or abs(zeta[l]) == 0:
            raise ConditioningError(f"Riccati-Hankel function degenerate at k0 R = {x} for l = {l}")


def sphere_quadrature(n_theta, n_phi=None):
    """Gauss-Legendre in cos(theta) times the periodic trapezoid rule in phi.

    Returns unit directions (n, 3) and weights summing to 4 pi; exact for spherical
    polynomials of degree < 2 n_theta and |m| < n_phi.
    """
    n_phi = 2 * n_theta if n_phi is None else n_phi
    t, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(np.arccos(t), phi, indexing="ij")
    st = np.sin(T).ravel()
    d = np.column_stack([st * np.cos(P.ravel()), st * np.sin(P.ravel()), np.cos(T).ravel()])
    W = np.repeat(w, n_phi) * (2.0 * np.pi / n_phi)
    return d, W
