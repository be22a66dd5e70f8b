"""Quaternion algebra and the imaginary bilinear form behind the group law.

Quaternions x = x1 + x2 i + x3 j + x4 k are stored as four named
coordinates.  Coordinates may be floats or exact ``fractions.Fraction``
values; the exact mode exists for the symbolic kernel engine and small
unit tests, the float mode for everything numerical.
"""

from dataclasses import dataclass

import numpy as np

# Antisymmetric structure matrices b^1, b^2, b^3: the alpha-th imaginary
# component of conj(x) * x' equals sum_{k,j} b^alpha[k,j] x_k x'_j.
B_ALPHA = np.array(
    [
        [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
        [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]],
        [[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class Quaternion:
    """x = x1 + x2 i + x3 j + x4 k with real (or Fraction) coordinates."""

    x1: object
    x2: object
    x3: object
    x4: object

    def coords(self):
        return (self.x1, self.x2, self.x3, self.x4)

    def conj(self):
        return Quaternion(self.x1, -self.x2, -self.x3, -self.x4)

    def norm_sq(self):
        return self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3 + self.x4 * self.x4

    def imag(self):
        """Coefficients of (i, j, k)."""
        return (self.x2, self.x3, self.x4)

    def __add__(self, other):
        return Quaternion(*(a + b for a, b in zip(self.coords(), other.coords())))

    def __sub__(self, other):
        return Quaternion(*(a - b for a, b in zip(self.coords(), other.coords())))

    def __neg__(self):
        return Quaternion(-self.x1, -self.x2, -self.x3, -self.x4)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return qmul(self, other)
        return Quaternion(*(c * other for c in self.coords()))

    __rmul__ = __mul__


ONE = Quaternion(1, 0, 0, 0)
I = Quaternion(0, 1, 0, 0)
J = Quaternion(0, 0, 1, 0)
K = Quaternion(0, 0, 0, 1)


def qmul(x, y):
    """Hamilton product, expanded coordinatewise.  Non-commutative."""
    a1, a2, a3, a4 = x.coords()
    b1, b2, b3, b4 = y.coords()
    return Quaternion(
        a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
        a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
        a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
        a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
    )


def conj(x):
    return x.conj()


def im_bilinear(y, yp):
    """Imaginary part of <y, y'> = sum_l conj(y_l) * y'_l as an (i, j, k) triple.

    y, yp: equal-length sequences of Quaternion.
    """
    if len(y) != len(yp):
        raise ValueError(f"length mismatch: {len(y)} vs {len(yp)}")
    acc = [0, 0, 0]
    for a, b in zip(y, yp):
        prod = qmul(a.conj(), b)
        im = prod.imag()
        for alpha in range(3):
            acc[alpha] = acc[alpha] + im[alpha]
    return tuple(acc)


def im_bilinear_matrix(y, yp):
    """Same bilinear form evaluated through the structure matrices B_ALPHA.

    Independent of qmul; used as the cross-check route for im_bilinear.
    """
    if len(y) != len(yp):
        raise ValueError(f"length mismatch: {len(y)} vs {len(yp)}")
    acc = [0, 0, 0]
    for a, b in zip(y, yp):
        xc = a.coords()
        xpc = b.coords()
        for alpha in range(3):
            s = 0
            for k in range(4):
                for j in range(4):
                    bkj = int(B_ALPHA[alpha, k, j])
                    if bkj:
                        s = s + bkj * xc[k] * xpc[j]
            acc[alpha] = acc[alpha] + s
    return tuple(acc)


def im_bilinear_arrays(y, yp):
    """Vectorized Im<y, y'> for real coordinate arrays of shape (..., 4m).

    Blocks of four consecutive coordinates are one quaternion; returns an
    array of shape (..., 3).
    """
    y = np.asarray(y, dtype=np.float64)
    yp = np.asarray(yp, dtype=np.float64)
    if y.shape[-1] != yp.shape[-1] or y.shape[-1] % 4:
        raise ValueError(f"incompatible y-shapes {y.shape} vs {yp.shape}")
    m = y.shape[-1] // 4
    yb = y.reshape(y.shape[:-1] + (m, 4))
    ypb = yp.reshape(yp.shape[:-1] + (m, 4))
    return np.einsum("...mk,akj,...mj->...a", yb, B_ALPHA.astype(np.float64), ypb)
