"""
Exact 2x2 matrix calculus.

Rotation, hyperbolic rotation and stretch matrices, and their ordered
products A_b A_{b-1} ... A_a (the lowest index acts first).
"""

import math
import numpy as np

from dataclasses import dataclass

from oitsolver.errors import HyperbolicOverflowError

HYPER_LIMIT = 700.0


@dataclass(frozen=True)
class Mat2:
    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError("non-finite Mat2 entry {}".format(name))

    def __matmul__(self, other):
        if isinstance(other, Mat2):
            return Mat2(
                self.a11 * other.a11 + self.a12 * other.a21,
                self.a11 * other.a12 + self.a12 * other.a22,
                self.a21 * other.a11 + self.a22 * other.a21,
                self.a21 * other.a12 + self.a22 * other.a22,
            )

        vector = np.asarray(other)
        return self.as_array() @ vector

    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def inverse(self):
        d = self.det()
        if d == 0.0:
            raise ZeroDivisionError("singular Mat2")
        return Mat2(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def allclose(self, other, atol=1e-13):
        return np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol)


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


def _check_finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise ValueError("non-finite argument {}".format(value))


def rotation(phi):
    _check_finite(phi)
    c, s = math.cos(phi), math.sin(phi)
    return Mat2(c, -s, s, c)


def hyper(phi):
    _check_finite(phi)
    if abs(phi) > HYPER_LIMIT:
        raise HyperbolicOverflowError(
            "cosh({}) exceeds the representable range".format(phi)
        )
    c, s = math.cosh(phi), math.sinh(phi)
    return Mat2(c, s, s, c)


def stretch(alpha, beta=None):
    """diag(alpha, beta); ``stretch(beta)`` alone is the shorthand diag(1, beta)."""
    if beta is None:
        alpha, beta = 1.0, alpha
    _check_finite(alpha, beta)
    return Mat2(alpha, 0.0, 0.0, beta)


def ordered_product(factors, a=None, b=None):
    """
    Product A_b ... A_a of factors indexed from ``a`` (default first) to ``b``.

    ``factors`` is indexed so that ``factors[i - a]`` is A_i. An empty range
    (b < a or no factors) returns the identity.
    """
    factors = list(factors)

    if a is None:
        a = 1
    if b is None:
        b = a + len(factors) - 1

    result = IDENTITY
    for i in range(a, b + 1):
        result = factors[i - a] @ result

    return result
