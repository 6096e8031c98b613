import math

import numpy as np
import pytest

from torusflow import (
    PeriodicGrid,
    build_profile,
    check_prescribed_curvature_conditions,
    check_weighted_flow_conditions,
    check_product_flow_conditions,
    parse,
)


@pytest.fixture(scope="module")
def grid():
    return PeriodicGrid(1, 64)


@pytest.fixture(scope="module")
def cosh_wide():
    return build_profile(parse("cosh(u)"), (-2.5, 2.5), anchor=0.0)


# -- barrier + monotonicity for the product flow ------------------------------

def test_product_conditions_pass_fixture(grid):
    report = check_product_flow_conditions(parse("-u"), parse("0"), -1.0, 1.0, grid)
    assert report.passed
    by_name = {e.name: e for e in report.entries}
    assert by_name["lower_barrier"].margin == pytest.approx(1.0)
    assert by_name["upper_barrier"].margin == pytest.approx(1.0)
    assert by_name["g_nonincreasing_in_u"].margin == 0.0


def test_product_conditions_fail_fixture(grid):
    report = check_product_flow_conditions(parse("0"), parse("u"), -1.0, 1.0, grid)
    assert not report.passed
    by_name = {e.name: e for e in report.entries}
    assert not by_name["g_nonincreasing_in_u"].passed
    assert by_name["g_nonincreasing_in_u"].margin == pytest.approx(-1.0)
    assert not by_name["lower_barrier"].passed
    assert not by_name["upper_barrier"].passed


def test_product_conditions_degenerate_equality_passes(grid):
    report = check_product_flow_conditions(parse("0"), parse("0"), -1.0, 1.0, grid)
    assert report.passed
    assert all(e.margin == 0.0 for e in report.entries)


# -- warped barrier ------------------------------------------------------------

def test_warped_barrier_pass_fixture(grid, cosh_wide):
    f = parse("(0.2*sin(x1) - u)/cosh(u)")
    report = check_prescribed_curvature_conditions(f, cosh_wide, -2.0, 2.0, grid)
    assert report.passed
    by_name = {e.name: e for e in report.entries}
    # f phi = 0.2 sin x - u, so d_u(f phi) = -1
    assert by_name["f_phi_nonincreasing_in_u"].margin == pytest.approx(1.0)
    # endpoint margin: min over x of f(x,-2) - tanh(-2)
    expected = (0.2 * -1.0 + 2.0) / math.cosh(2.0) + math.tanh(2.0)
    assert by_name["lower_barrier"].margin == pytest.approx(expected, abs=1e-6)


def test_warped_barrier_zero_curvature_passes(grid):
    prof = build_profile(parse("cosh(u)"), (-1.5, 1.5), anchor=0.0)
    report = check_prescribed_curvature_conditions(parse("0"), prof, -1.0, 1.0, grid)
    assert report.passed
    by_name = {e.name: e for e in report.entries}
    assert by_name["lower_barrier"].margin == pytest.approx(math.tanh(1.0))
    assert by_name["upper_barrier"].margin == pytest.approx(math.tanh(1.0))


def test_warped_barrier_constant_above_slice_curvature_fails(grid, cosh_wide):
    c = 1 * math.tanh(2.0) + 0.25
    report = check_prescribed_curvature_conditions(parse(repr(c)), cosh_wide, -2.0, 2.0, grid)
    by_name = {e.name: e for e in report.entries}
    assert not by_name["upper_barrier"].passed
    assert by_name["upper_barrier"].margin == pytest.approx(-0.25, abs=1e-9)


# -- weighted-flow convexity -----------------------------------------------------

def test_convexity_cosh_passes(cosh_wide):
    report = check_weighted_flow_conditions(cosh_wide, -1.0, 1.0)
    assert report.passed
    assert report.extras["stationary_slice"] == pytest.approx(0.0, abs=1e-12)


def test_convexity_exponential_fails():
    prof = build_profile(parse("exp(u)"), (-1.5, 1.5))
    report = check_weighted_flow_conditions(prof, -1.0, 1.0)
    by_name = {e.name: e for e in report.entries}
    assert not by_name["slope_at_left_endpoint"].passed
    assert by_name["slope_at_left_endpoint"].margin == pytest.approx(-math.exp(-1.0))


def test_convexity_quadratic_passes():
    prof = build_profile(parse("1 + u^2"), (-1.5, 1.5))
    report = check_weighted_flow_conditions(prof, -1.0, 1.0)
    assert report.passed
    assert report.extras["stationary_slice"] == pytest.approx(0.0, abs=1e-12)


def test_convexity_strictness_at_right_endpoint():
    # phi'(b) = 0 must fail the strict inequality
    prof = build_profile(parse("1 + u^2"), (-1.5, 0.0))
    report = check_weighted_flow_conditions(prof, -1.0, 0.0)
    by_name = {e.name: e for e in report.entries}
    assert not by_name["slope_at_right_endpoint"].passed
    # equality at the left endpoint is accepted
    assert by_name["slope_at_left_endpoint"].passed


# -- structural properties ---------------------------------------------------------

def test_shrinking_slab_never_flips_monotonicity_pass(grid):
    g = parse("-u^3")  # d_u g = -3u^2 <= 0 everywhere
    for lo, hi in ((-1.0, 1.0), (-0.5, 0.8), (-0.1, 0.2)):
        report = check_product_flow_conditions(parse("0"), g, lo, hi, grid)
        assert {e.name: e for e in report.entries}["g_nonincreasing_in_u"].passed


def test_worst_point_reported(grid):
    # g = sin(x1): d_u g = 0 passes; lower barrier (g+h)(x, -1) = sin(x) + 1
    report = check_product_flow_conditions(parse("1"), parse("sin(x1)"), -1.0, 1.0, grid)
    by_name = {e.name: e for e in report.entries}
    entry = by_name["lower_barrier"]
    # worst node is where sin = -1, i.e. x = 3pi/2
    assert entry.margin == pytest.approx(0.0, abs=1e-12)
    assert entry.location["x1"] == pytest.approx(3 * np.pi / 2, abs=0.1)


def test_requires_ordered_slab(grid):
    with pytest.raises(ValueError, match="u0 < u1"):
        check_product_flow_conditions(parse("0"), parse("0"), 1.0, -1.0, grid)


def test_report_text_lines(grid):
    report = check_product_flow_conditions(parse("-u"), parse("0"), -1.0, 1.0, grid)
    text = report.to_text()
    assert "lower_barrier" in text and "PASS" in text
    assert report.to_json_dict()["passed"] is True
