"""Gauss rules on the reference simplex, built from collapsed (Stroud) products."""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _jacobi01(n, a):
    # Gauss-Jacobi on [0, 1] for the weight (1 - u)**a
    t, w = roots_jacobi(n, a, 0.0)
    return 0.5 * (t + 1.0), w / 2.0 ** (a + 1)


@lru_cache(maxsize=None)
def gauss_legendre01(n):
    t, w = roots_legendre(n)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def tet_rule(order=4):
    """Points (barycentric, shape (q, 4)) and weights summing to 1 on a tetrahedron.

    Exact for polynomials of total degree ``order``.
    """
    n = order // 2 + 1
    u1, w1 = _jacobi01(n, 2)
    u2, w2 = _jacobi01(n, 1)
    u3, w3 = gauss_legendre01(n)
    U1, U2, U3 = np.meshgrid(u1, u2, u3, indexing="ij")
    W = (w1[:, None, None] * w2[None, :, None] * w3[None, None, :]).ravel()
    x = U1.ravel()
    y = (U2 * (1 - U1)).ravel()
    z = (U3 * (1 - U1) * (1 - U2)).ravel()
    bary = np.column_stack([1 - x - y - z, x, y, z])
    return bary, W * 6.0


@lru_cache(maxsize=None)
def tri_rule(order=3):
    """Points (barycentric, shape (q, 3)) and weights summing to 1 on a triangle."""
    n = order // 2 + 1
    u1, w1 = _jacobi01(n, 1)
    u2, w2 = gauss_legendre01(n)
    U1, U2 = np.meshgrid(u1, u2, indexing="ij")
    W = (w1[:, None] * w2[None, :]).ravel()
    x = U1.ravel()
    y = (U2 * (1 - U1)).ravel()
    bary = np.column_stack([1 - x - y, x, y])
    return bary, W * 2.0


@lru_cache(maxsize=None)
def line_rule(order=5):
    """Gauss-Legendre points on [0, 1] with weights summing to 1."""
    return gauss_legendre01(order // 2 + 1)
