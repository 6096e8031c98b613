"""Discrete differential geometry of graphs over a flat torus.

All derivative operators are second-order central differences with periodic
wraparound; there are no boundary cases.  For a graph x -> (x, u(x)) in the
product of the torus with a line, the area element is omega = sqrt(1+|Du|^2),
the induced inverse metric is g^{ij} = sigma^{ij} - u^i u^j / omega^2, the
mean curvature (downward-normal convention) is H = g^{ij} u_{ij} / omega and
the squared norm of the second fundamental form is
|A|^2 = g^{il} g^{kj} u_{kl} u_{ij} / omega^2.
"""

from __future__ import annotations

import numpy as np

from .grid import GradientField, HessianField, PeriodicGrid, ScalarField


def _axis_diff(values, axis, spacing):
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * spacing)


def _axis_diff2(values, axis, spacing):
    return (
        np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)
    ) / spacing**2


def _cross_diff(values, spacing0, spacing1):
    shifted = np.roll(values, -1, axis=0)
    back = np.roll(values, 1, axis=0)
    return (
        np.roll(shifted, -1, axis=1)
        - np.roll(shifted, 1, axis=1)
        - np.roll(back, -1, axis=1)
        + np.roll(back, 1, axis=1)
    ) / (4.0 * spacing0 * spacing1)


def gradient(u: ScalarField) -> GradientField:
    """Covariant gradient components u_i by central differences."""
    g = u.grid
    comps = tuple(_axis_diff(u.values, a, g.spacing[a]) for a in range(g.dim))
    return GradientField(g, comps)


def hessian(u: ScalarField) -> HessianField:
    """Second derivatives u_{jk}; the cross term uses the centered 4-point stencil."""
    g = u.grid
    entries = {}
    for a in range(g.dim):
        entries[(a, a)] = _axis_diff2(u.values, a, g.spacing[a])
    if g.dim == 2:
        entries[(0, 1)] = _cross_diff(u.values, g.spacing[0], g.spacing[1])
    return HessianField(g, entries)


def area_element(du: GradientField, grid: PeriodicGrid | None = None) -> ScalarField:
    """omega = sqrt(1 + |Du|^2) per node; omega >= 1 with equality iff Du = 0."""
    g = grid if grid is not None else du.grid
    return ScalarField(g, np.sqrt(1.0 + du.norm_squared()))


def induced_inverse_metric(du: GradientField, grid: PeriodicGrid | None = None):
    """Per-node g^{ij} = sigma^{ij} - u^i u^j / omega^2.

    Returns a dict keyed by (i, j) for i <= j; the matrix is symmetric and
    positive definite, and satisfies g^{ij}(sigma_{jk} + u_j u_k) = delta^i_k
    to machine precision.
    """
    g = grid if grid is not None else du.grid
    omega2 = 1.0 + du.norm_squared()
    up = du.raised()
    inv = g.metric_inv
    out = {}
    for i in range(g.dim):
        for j in range(i, g.dim):
            out[(i, j)] = inv[i, j] - up[i] * up[j] / omega2
    return out


def _contraction(u: ScalarField):
    """g^{ij} u_{ij} together with omega (shared by several operators)."""
    du = gradient(u)
    hes = hessian(u)
    ginv = induced_inverse_metric(du, u.grid)
    omega = np.sqrt(1.0 + du.norm_squared())
    n = u.grid.dim
    total = np.zeros(u.grid.shape)
    for i in range(n):
        for j in range(n):
            key = (i, j) if i <= j else (j, i)
            total += ginv[key] * hes[(i, j)]
    return total, omega, ginv, hes


def mean_curvature(u: ScalarField) -> ScalarField:
    """H = g^{ij} u_{ij} / omega (downward-normal convention)."""
    total, omega, _, _ = _contraction(u)
    return ScalarField(u.grid, total / omega)


def second_form_norm(u: ScalarField) -> ScalarField:
    """|A|^2 = g^{il} g^{kj} u_{kl} u_{ij} / omega^2 = tr((g^{-1} Hess)^2) / omega^2."""
    _, omega, ginv, hes = _contraction(u)
    n = u.grid.dim

    def gmat(i, j):
        return ginv[(i, j) if i <= j else (j, i)]

    # M^i_j = g^{ik} u_{kj}; |A|^2 = sum_{i,j} M^i_j M^j_i / omega^2
    m = [[sum(gmat(i, k) * hes[(k, j)] for k in range(n)) for j in range(n)] for i in range(n)]
    total = np.zeros(u.grid.shape)
    for i in range(n):
        for j in range(n):
            total += m[i][j] * m[j][i]
    return ScalarField(u.grid, total / omega**2)


def integrate(f: ScalarField) -> float:
    """Sum of node values times the quadrature weight (exact for constants)."""
    return float(np.sum(f.values) * f.grid.weight)
