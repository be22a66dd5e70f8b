import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qszego.quaternion import (
    B_ALPHA,
    I,
    J,
    K,
    ONE,
    Quaternion,
    conj,
    im_bilinear,
    im_bilinear_arrays,
    im_bilinear_matrix,
    qmul,
)

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=8)
rational_quats = st.builds(Quaternion, rationals, rationals, rationals, rationals)


def test_structure_matrices_antisymmetric():
    for alpha in range(3):
        assert np.array_equal(B_ALPHA[alpha], -B_ALPHA[alpha].T)
    assert set(np.unique(B_ALPHA)) <= {-1, 0, 1}


def test_qmul_identity():
    x = Quaternion(3.0, -1.0, 2.0, 0.5)
    assert qmul(ONE, x) == x
    assert qmul(x, ONE) == x


def test_qmul_basis_table():
    # full basis multiplication table, checked by hand expansion of the
    # coordinate product formula
    table = {
        (I, I): Quaternion(-1, 0, 0, 0),
        (J, J): Quaternion(-1, 0, 0, 0),
        (K, K): Quaternion(-1, 0, 0, 0),
        (I, J): K,
        (J, I): Quaternion(0, 0, 0, -1),
        (J, K): I,
        (K, J): Quaternion(0, -1, 0, 0),
        (K, I): J,
        (I, K): Quaternion(0, 0, -1, 0),
    }
    for (a, b), want in table.items():
        assert qmul(a, b) == want


def test_conj_examples():
    assert conj(Quaternion(1, 2, 3, 4)) == Quaternion(1, -2, -3, -4)
    x = Quaternion(1, 1, 0, 0)
    assert qmul(conj(x), x) == Quaternion(2, 0, 0, 0)
    # conj(i j) = conj(j) conj(i) = -k
    assert conj(qmul(I, J)) == qmul(conj(J), conj(I)) == Quaternion(0, 0, 0, -1)


@given(rational_quats, rational_quats)
@settings(max_examples=60, deadline=None)
def test_conj_antihomomorphism_exact(x, y):
    assert conj(qmul(x, y)) == qmul(conj(y), conj(x))


@given(rational_quats, rational_quats, rational_quats)
@settings(max_examples=60, deadline=None)
def test_qmul_associative_exact(x, y, z):
    assert qmul(qmul(x, y), z) == qmul(x, qmul(y, z))


@given(rational_quats)
@settings(max_examples=40, deadline=None)
def test_conj_involution_and_modulus(x):
    assert conj(conj(x)) == x
    m = qmul(conj(x), x)
    assert m == Quaternion(x.norm_sq(), 0, 0, 0)


def test_im_bilinear_examples():
    assert im_bilinear([ONE], [ONE]) == (0, 0, 0)
    assert im_bilinear([I], [J]) == (0, 0, -1)
    y = [Quaternion(0.3, -1.2, 0.7, 2.0), Quaternion(1.0, 0.0, -0.5, 0.25)]
    assert np.allclose(im_bilinear(y, y), 0.0, atol=1e-15)


def test_im_bilinear_length_mismatch():
    with pytest.raises(ValueError):
        im_bilinear([ONE], [ONE, I])


def test_im_bilinear_matches_matrix_route_exact():
    # exact rational coordinates: the two routes agree exactly
    rng = np.random.default_rng(5)
    for _ in range(50):
        y = [Quaternion(*[Fraction(int(v), 7) for v in rng.integers(-20, 20, 4)]) for _ in range(2)]
        yp = [Quaternion(*[Fraction(int(v), 3) for v in rng.integers(-20, 20, 4)]) for _ in range(2)]
        assert im_bilinear(y, yp) == im_bilinear_matrix(y, yp)


def test_im_bilinear_arrays_vs_qmul_route():
    # float mode, 1e5 pairs, relative error <= 1e-13
    rng = np.random.default_rng(11)
    n = 100_000
    y = rng.normal(size=(n, 8))
    yp = rng.normal(size=(n, 8))
    got = im_bilinear_arrays(y, yp)
    want = np.zeros((n, 3))
    for block in range(2):
        x = y[:, 4 * block : 4 * block + 4]
        z = yp[:, 4 * block : 4 * block + 4]
        # Im(conj(x) z) expanded through the Hamilton product
        want[:, 0] += x[:, 0] * z[:, 1] - x[:, 1] * z[:, 0] - x[:, 2] * z[:, 3] + x[:, 3] * z[:, 2]
        want[:, 1] += x[:, 0] * z[:, 2] + x[:, 1] * z[:, 3] - x[:, 2] * z[:, 0] - x[:, 3] * z[:, 1]
        want[:, 2] += x[:, 0] * z[:, 3] - x[:, 1] * z[:, 2] + x[:, 2] * z[:, 1] - x[:, 3] * z[:, 0]
    scale = np.abs(want).max()
    assert np.abs(got - want).max() <= 1e-13 * scale


def test_im_bilinear_antisymmetry():
    rng = np.random.default_rng(3)
    y = rng.normal(size=(1000, 4))
    yp = rng.normal(size=(1000, 4))
    assert np.allclose(im_bilinear_arrays(y, yp), -im_bilinear_arrays(yp, y), atol=1e-14)


def test_modulus_multiplicative():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = Quaternion(*rng.normal(size=4))
        y = Quaternion(*rng.normal(size=4))
        lhs = math.sqrt(qmul(x, y).norm_sq())
        rhs = math.sqrt(x.norm_sq()) * math.sqrt(y.norm_sq())
        assert abs(lhs - rhs) <= 1e-13 * rhs
