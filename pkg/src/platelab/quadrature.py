"""Gauss-Legendre quadrature rules on reference intervals and squares."""

import numpy as np


def gauss_1d(n, a=0.0, b=1.0):
    """Gauss-Legendre rule with n points on [a, b].

    Returns (points, weights) as float arrays of length n.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_2d(n, ):
    """Tensor Gauss-Legendre rule with n x n points on the unit square.

    Returns (xi, eta, w), each of length n*n, in row-major (xi fastest) order.
    """
    x, w = gauss_1d(n)
    xi, eta = np.meshgrid(x, x, indexing="ij")
    wx, wy = np.meshgrid(w, w, indexing="ij")
    return xi.ravel(), eta.ravel(), (wx * wy).ravel()
