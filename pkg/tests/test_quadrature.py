import numpy as np

from platelab.quadrature import gauss_1d, gauss_2d


def test_gauss_1d_weights_sum_to_length():
    for n in (1, 2, 4, 7):
        x, w = gauss_1d(n, 0.0, 1.0)
        assert abs(w.sum() - 1.0) < 1e-14
    x, w = gauss_1d(3, -2.0, 5.0)
    assert abs(w.sum() - 7.0) < 1e-13


def test_gauss_1d_polynomial_exactness():
    # n points integrate degree 2n-1 exactly
    for n in (1, 2, 3, 4):
        x, w = gauss_1d(n, 0.0, 1.0)
        for k in range(2 * n):
            assert abs(w @ x**k - 1.0 / (k + 1)) < 1e-14, (n, k)


def test_gauss_1d_interval_mapping():
    x, w = gauss_1d(4, 2.0, 3.0)
    assert np.all((x > 2.0) & (x < 3.0))
    # integral of x^2 over [2, 3] = 19/3
    assert abs(w @ x**2 - 19.0 / 3.0) < 1e-13


def test_gauss_2d_tensor_exactness():
    xi, eta, w = gauss_2d(4)
    assert xi.size == 16
    # exact for degree 7 per direction on the unit square
    for p in (0, 3, 7):
        for q in (0, 3, 7):
            val = w @ (xi**p * eta**q)
            assert abs(val - 1.0 / ((p + 1) * (q + 1))) < 1e-14, (p, q)
