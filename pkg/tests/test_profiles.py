import math

import numpy as np
import pytest

from torusflow import DomainError, ProfileError, build_profile, parse
from torusflow.profiles import CurveTable, antiderivative_table


@pytest.fixture(scope="module")
def cosh_profile():
    return build_profile(parse("cosh(u)"), (-2.5, 2.5), anchor=0.0)


def test_constant_warp_gives_shifted_identity():
    prof = build_profile(parse("1"), (-2.0, 2.0), anchor=0.5)
    us = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(prof.transform(us), us - 0.5, atol=1e-13)


def test_cosh_transform_is_gudermannian(cosh_profile):
    # closed form: 2*atan(tanh(u/2))
    gd1 = 2 * math.atan(math.tanh(0.5))
    assert cosh_profile.transform(1.0) == pytest.approx(gd1, abs=1e-10)
    assert cosh_profile.transform(1.0) == pytest.approx(0.8657694832, abs=1e-8)
    us = np.linspace(-2.4, 2.4, 201)
    np.testing.assert_allclose(cosh_profile.transform(us), 2 * np.arctan(np.tanh(us / 2)),
                               atol=1e-12)


def test_inverse_round_trip(cosh_profile):
    assert cosh_profile.inverse(cosh_profile.transform(0.7)) == pytest.approx(0.7, abs=1e-10)
    us = np.linspace(-2.45, 2.45, 333)
    np.testing.assert_allclose(cosh_profile.inverse(cosh_profile.transform(us)), us, atol=1e-10)


def test_transform_strictly_increasing(cosh_profile):
    us = np.linspace(-2.5, 2.5, 1001)
    assert np.all(np.diff(cosh_profile.transform(us)) > 0)


def test_transform_derivative_consistency(cosh_profile, rng):
    # Phi'(u) * phi(u) = 1, probed by centered differences of the quadrature
    step = 1e-5
    for _ in range(100):
        v = rng.uniform(-2.4, 2.4)
        deriv = (cosh_profile.transform(v + step) - cosh_profile.transform(v - step)) / (2 * step)
        assert deriv * math.cosh(v) == pytest.approx(1.0, abs=1e-8)


def test_nonpositive_warp_rejected():
    with pytest.raises(ProfileError, match="positive"):
        build_profile(parse("sin(u)"), (0.0, 6.0))
    with pytest.raises(ProfileError, match="positive"):
        build_profile(parse("u"), (-1.0, 1.0))


def test_profile_must_be_height_only():
    with pytest.raises(ProfileError, match="u only"):
        build_profile(parse("cosh(x1)"), (-1, 1))


def test_inverse_rejects_out_of_range(cosh_profile):
    hi = cosh_profile.transform_range[1]
    with pytest.raises(DomainError, match="outside"):
        cosh_profile.inverse(hi + 0.1)


def test_dphi_zero_location(cosh_profile):
    assert cosh_profile.dphi_zero(-1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    shifted = build_profile(parse("1 + (u - 0.25)^2"), (-1.0, 1.0))
    assert shifted.dphi_zero(-1.0, 1.0) == pytest.approx(0.25, abs=1e-12)


def test_composed_table_accuracy(cosh_profile):
    # p -> sinh(inverse(p)) against closed form sinh(gd^{-1}(p)) = tan(p)
    table = cosh_profile.composed_table(parse("sinh(u)"))
    ps = np.linspace(*cosh_profile.transform_range, 777)
    np.testing.assert_allclose(table(ps), np.tan(ps), atol=1e-11)


def test_curve_table_hermite_accuracy():
    xs = np.linspace(-2, 2, 513)
    table = CurveTable(-2, 2, np.sin(xs), np.cos(xs))
    probe = np.linspace(-2, 2, 2049)
    assert np.abs(table(probe) - np.sin(probe)).max() < 1e-10


def test_curve_table_out_of_range_names_node():
    table = CurveTable(0, 1, np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DomainError, match="node 2"):
        table(np.array([0.1, 0.5, 1.7]))


def test_antiderivative_table_anchoring():
    table = antiderivative_table(np.cos, -3.0, 3.0, anchor=0.5)
    assert table(0.5) == pytest.approx(0.0, abs=1e-14)
    probe = np.linspace(-3, 3, 101)
    np.testing.assert_allclose(table(probe), np.sin(probe) - np.sin(0.5), atol=1e-12)


def test_anchor_default_is_midpoint():
    prof = build_profile(parse("exp(u)"), (1.0, 3.0))
    assert prof.transform(2.0) == pytest.approx(0.0, abs=1e-14)
