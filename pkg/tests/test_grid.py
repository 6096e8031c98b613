import numpy as np
import pytest

from torusflow import GridError, PeriodicGrid, ScalarField


def test_basic_construction():
    g = PeriodicGrid(1, 64)
    assert g.node_count == 64
    assert g.spacing[0] == pytest.approx(2 * np.pi / 64)
    assert g.weight == pytest.approx(2 * np.pi / 64)


def test_spacing_is_period_over_resolution():
    g = PeriodicGrid(2, (32, 16), period=(1.0, 4.0))
    assert g.spacing[0] == pytest.approx(1.0 / 32)
    assert g.spacing[1] == pytest.approx(4.0 / 16)
    assert g.node_count == 32 * 16


def test_metric_validation():
    with pytest.raises(GridError):
        PeriodicGrid(2, 16, metric=np.array([[1.0, 0.1], [0.2, 1.0]]))  # not symmetric
    with pytest.raises(GridError):
        PeriodicGrid(2, 16, metric=np.array([[1.0, 2.0], [2.0, 1.0]]))  # not SPD
    with pytest.raises(GridError):
        PeriodicGrid(1, 4)  # below the minimum resolution
    with pytest.raises(GridError):
        PeriodicGrid(3, 16)


def test_quadrature_weight_includes_metric_determinant():
    g = PeriodicGrid(2, 32, metric=np.diag([4.0, 1.0]))
    # sqrt(det sigma) = 2
    assert g.weight == pytest.approx(2 * (2 * np.pi / 32) ** 2)


def test_field_shape_and_finiteness():
    g = PeriodicGrid(1, 16)
    f = g.field(1.5)
    assert f.values.shape == (16,)
    with pytest.raises(GridError):
        ScalarField(g, np.full(15, 1.0))
    with pytest.raises(GridError):
        ScalarField(g, np.full(16, np.nan))


def test_field_from_expression():
    from torusflow import parse

    g = PeriodicGrid(2, 16)
    f = g.field_from_expr(parse("sin(x1) + x2"))
    x1, x2 = g.coords()
    np.testing.assert_allclose(f.values, np.sin(x1) + x2)


def test_grid_equality_and_flat_view():
    a = PeriodicGrid(1, 32)
    b = PeriodicGrid(1, 32)
    assert a == b
    f = a.field(np.arange(32.0))
    assert f.flat[5] == 5.0
