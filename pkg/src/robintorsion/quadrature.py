"""Quadrature rules on the reference triangle and the unit interval."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """``n``-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _radon7():
    s = np.sqrt(15.0)
    a1, b1 = (6 - s) / 21, (9 + 2 * s) / 21
    a2, b2 = (6 + s) / 21, (9 - 2 * s) / 21
    w1, w2 = (155 - s) / 2400, (155 + s) / 2400
    pts = np.array([[1 / 3, 1 / 3], [a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]])
    w = np.array([9 / 80, w1, w1, w1, w2, w2, w2])
    return pts, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Points (n, 2) and weights (n,) on {xi, eta >= 0, xi + eta <= 1}, exact to ``degree``.

    Degree <= 5 uses the 7-point Radon rule; higher degrees a collapsed
    Gauss-Jacobi style product (Duffy) rule.
    """
    if degree <= 5:
        return _radon7()
    n = (degree + 2) // 2 + 1
    x, wx = gauss_legendre(n)
    # collapse the square onto the triangle: xi = u, eta = v (1 - u)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(wx, wx, indexing="ij")
    pts = np.stack([u.ravel(), (v * (1 - u)).ravel()], axis=-1)
    w = (wu * wv * (1 - u)).ravel()
    return pts, w
