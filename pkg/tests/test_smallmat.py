import math
import pytest
import numpy as np

from oitsolver.errors import HyperbolicOverflowError
from oitsolver.smallmat import (
    IDENTITY,
    Mat2,
    hyper,
    ordered_product,
    rotation,
    stretch,
)


def test_rotation_identity_and_quarter_turn():
    assert rotation(0.0).allclose(IDENTITY, atol=0.0)
    assert rotation(math.pi / 2).allclose(Mat2(0.0, -1.0, 1.0, 0.0), atol=1e-15)


def test_rotation_semigroup_and_inverse():
    assert (rotation(0.3) @ rotation(0.4)).allclose(rotation(0.7), atol=1e-14)
    for phi in np.linspace(-7.0, 7.0, 29):
        assert rotation(phi).inverse().allclose(rotation(-phi), atol=1e-13)
        assert rotation(phi).det() == pytest.approx(1.0, abs=1e-13)


def test_hyper_semigroup_and_determinant():
    assert hyper(0.0).allclose(IDENTITY, atol=0.0)
    assert (hyper(0.2) @ hyper(0.5)).allclose(hyper(0.7), atol=1e-13)
    assert hyper(1.3).det() == pytest.approx(1.0, abs=1e-14)


def test_hyper_overflow_is_reported():
    with pytest.raises(HyperbolicOverflowError):
        hyper(701.0)


def test_stretch_forms():
    assert stretch(1.0, 1.0).allclose(IDENTITY, atol=0.0)
    assert stretch(0.5).allclose(Mat2(1.0, 0.0, 0.0, 0.5), atol=0.0)
    assert (stretch(2.0, 3.0) @ stretch(0.5, 1.0 / 3.0)).allclose(IDENTITY, atol=1e-15)
    assert stretch(2.0, 3.0).det() == 6.0


def test_non_finite_entries_rejected():
    with pytest.raises(ValueError):
        rotation(float("nan"))
    with pytest.raises(ValueError):
        Mat2(1.0, float("inf"), 0.0, 1.0)


def test_ordered_product_order():
    assert ordered_product([]).allclose(IDENTITY, atol=0.0)
    assert ordered_product([rotation(0.2)]).allclose(rotation(0.2), atol=0.0)

    product = ordered_product([stretch(2.0, 1.0), rotation(math.pi / 2)], 1, 2)
    assert product.allclose(Mat2(0.0, -1.0, 2.0, 0.0), atol=1e-15)

    reversed_product = ordered_product([rotation(math.pi / 2), stretch(2.0, 1.0)])
    assert reversed_product.allclose(Mat2(0.0, -2.0, 1.0, 0.0), atol=1e-15)


def test_ordered_product_matches_explicit_triple():
    a, b, c = rotation(0.4), hyper(0.3), stretch(2.0, 0.5)
    assert ordered_product([a, b, c]).allclose(c @ (b @ a), atol=1e-14)
