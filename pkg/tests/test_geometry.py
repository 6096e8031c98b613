import numpy as np
import pytest

from torusflow import (
    PeriodicGrid,
    area_element,
    gradient,
    hessian,
    induced_inverse_metric,
    integrate,
    mean_curvature,
    second_form_norm,
)


def test_gradient_of_constant_is_zero(grid64):
    du = gradient(grid64.field(3.0))
    np.testing.assert_array_equal(du.components[0], np.zeros(64))


def test_gradient_sine_second_order(grid256):
    x = grid256.coords()[0]
    du = gradient(grid256.field(np.sin(x)))
    err = np.abs(du.components[0] - np.cos(x)).max()
    # exact central-difference constant: (1 - sinc(dx)) * max|cos|
    dx = grid256.spacing[0]
    expected = 1.0 - np.sin(dx) / dx
    assert err == pytest.approx(expected, rel=1e-6)
    assert err < 1.01e-4


def test_gradient_2d_separability(grid2d):
    x1, _ = grid2d.coords()
    du = gradient(grid2d.field(np.sin(x1)))
    np.testing.assert_array_equal(du.components[1], np.zeros(grid2d.shape))


def test_hessian_constant_zero(grid64):
    h = hessian(grid64.field(2.5))
    np.testing.assert_array_equal(h[(0, 0)], np.zeros(64))


def test_hessian_sine(grid256):
    x = grid256.coords()[0]
    h = hessian(grid256.field(np.sin(x)))
    assert np.abs(h[(0, 0)] + np.sin(x)).max() < 1e-4


def test_hessian_mixed_partial():
    g = PeriodicGrid(2, 128)
    x1, x2 = g.coords()
    h = hessian(g.field(np.sin(x1) * np.sin(x2)))
    dx = g.spacing[0]
    # centered cross stencil: error constant (1 - sinc(dx)^2) * max|cos cos|
    err = np.abs(h[(0, 1)] - np.cos(x1) * np.cos(x2)).max()
    assert err == pytest.approx(1 - (np.sin(dx) / dx) ** 2, rel=1e-4)
    np.testing.assert_array_equal(h[(0, 1)], h[(1, 0)])


def test_area_element_values():
    g = PeriodicGrid(2, 16)
    zero = area_element(gradient(g.field(0.0)), g)
    np.testing.assert_array_equal(zero.values, np.ones(g.shape))

    # sigma = identity, gradient components (3, 4) -> omega = sqrt(26)
    du = gradient(g.field(0.0))
    comps = (np.full(g.shape, 3.0), np.full(g.shape, 4.0))
    du.components = comps
    np.testing.assert_allclose(area_element(du, g).values, np.sqrt(26.0))


def test_area_element_with_metric():
    g = PeriodicGrid(2, 16, metric=np.diag([4.0, 1.0]))
    du = gradient(g.field(0.0))
    du.components = (np.ones(g.shape), np.zeros(g.shape))
    # |Du|^2 = sigma^{11} = 1/4
    np.testing.assert_allclose(area_element(du, g).values, np.sqrt(1.25))


def test_induced_inverse_metric_flat(grid64):
    ginv = induced_inverse_metric(gradient(grid64.field(1.0)), grid64)
    np.testing.assert_allclose(ginv[(0, 0)], np.ones(64))


def test_induced_inverse_metric_1d_slope_one():
    g = PeriodicGrid(1, 16)
    du = gradient(g.field(0.0))
    du.components = (np.ones(16),)
    ginv = induced_inverse_metric(du, g)
    np.testing.assert_allclose(ginv[(0, 0)], 0.5)


@pytest.mark.parametrize("dim,res", [(1, 64), (2, 24)])
def test_inverse_metric_product_identity(dim, res, rng):
    metric = np.eye(dim) if dim == 1 else np.array([[2.0, 0.3], [0.3, 1.0]])
    g = PeriodicGrid(dim, res, metric=metric)
    x = g.coords()
    u = g.field(0.4 * np.sin(x[0]) + (0.2 * np.cos(x[1]) if dim == 2 else 0.0))
    du = gradient(u)
    ginv = induced_inverse_metric(du, g)
    omega2 = 1.0 + du.norm_squared()
    # g^{ij} (sigma_{jk} + u_j u_k) = delta^i_k within 1e-12 per node
    for i in range(dim):
        for k in range(dim):
            total = np.zeros(g.shape)
            for j in range(dim):
                gij = ginv[(i, j) if i <= j else (j, i)]
                total += gij * (g.metric[j, k] + du.components[j] * du.components[k])
            target = 1.0 if i == k else 0.0
            assert np.abs(total - target).max() < 1e-12


def test_mean_curvature_constant_zero(grid64):
    H = mean_curvature(grid64.field(0.7))
    np.testing.assert_array_equal(H.values, np.zeros(64))


def test_mean_curvature_1d_sine(grid256):
    x = grid256.coords()[0]
    H = mean_curvature(grid256.field(np.sin(x)))
    # at x = pi/2: u' = 0, u'' = -1, omega = 1 -> H = -1
    assert H.values[64] == pytest.approx(-1.0, abs=1e-4)
    # classical graph curvature u'' / omega^3 matches everywhere
    classic = -np.sin(x) / (1 + np.cos(x) ** 2) ** 1.5
    assert np.abs(H.values - classic).max() < 1e-4


def test_mean_curvature_2d_single_mode():
    g = PeriodicGrid(2, 256)
    x1, _ = g.coords()
    eps = 0.1
    H = mean_curvature(g.field(eps * np.sin(x1)))
    u1 = eps * np.cos(x1)
    u11 = -eps * np.sin(x1)
    omega = np.sqrt(1 + u1**2)
    exact = u11 * (1 - u1**2 / omega**2) / omega
    assert np.abs(H.values - exact).max() < 1e-4


def test_second_form_norm_1d_equals_h_squared(grid64):
    x = grid64.coords()[0]
    u = grid64.field(0.5 * np.sin(x) + 0.2 * np.cos(2 * x))
    a2 = second_form_norm(u)
    h2 = mean_curvature(u).values ** 2
    assert np.abs(a2.values - h2).max() < 1e-12
    assert a2.values.min() >= 0


def test_second_form_norm_2d_rank_one():
    g = PeriodicGrid(2, 64)
    x1, _ = g.coords()
    u = g.field(0.1 * np.sin(x1))
    a2 = second_form_norm(u)
    h2 = mean_curvature(u).values ** 2
    assert np.abs(a2.values - h2).max() < 1e-12


def test_integrate_constant():
    g = PeriodicGrid(1, 64)
    assert integrate(g.field(1.0)) == pytest.approx(2 * np.pi)


def test_integrate_sine_squared(grid256):
    x = grid256.coords()[0]
    assert integrate(grid256.field(np.sin(x) ** 2)) == pytest.approx(np.pi, abs=1e-10)


def test_integrate_metric_volume():
    g = PeriodicGrid(2, 32, metric=np.diag([4.0, 1.0]))
    assert integrate(g.field(1.0)) == pytest.approx(2 * (2 * np.pi) ** 2)


def test_omega_one_iff_flat(grid64):
    x = grid64.coords()[0]
    omega = area_element(gradient(grid64.field(np.sin(x))), grid64)
    assert omega.values.min() >= 1.0
    flat = area_element(gradient(grid64.field(4.0)), grid64)
    np.testing.assert_array_equal(flat.values, np.ones(64))


@pytest.mark.parametrize("resolutions", [(64, 128, 256)])
def test_second_order_convergence(resolutions):
    errs_grad = []
    errs_hess = []
    for res in resolutions:
        g = PeriodicGrid(1, res)
        x = g.coords()[0]
        u = g.field(np.sin(x))
        errs_grad.append(np.abs(gradient(u).components[0] - np.cos(x)).max())
        errs_hess.append(np.abs(hessian(u)[(0, 0)] + np.sin(x)).max())
    for errs in (errs_grad, errs_hess):
        for a, b in zip(errs, errs[1:]):
            assert 3.5 < a / b < 4.5


def test_divergence_theorem_closed_surface():
    # integral of H * omega over a closed graph vanishes
    for res, tol in ((128, 1e-10), (256, 1e-6)):
        g = PeriodicGrid(1, res)
        x = g.coords()[0]
        u = g.field(0.3 * np.sin(x))
        h_omega = mean_curvature(u).values * area_element(gradient(u), g).values
        assert abs(np.sum(h_omega) * g.weight) < tol
