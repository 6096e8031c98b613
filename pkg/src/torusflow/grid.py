"""Flat periodic grids and fields sampled on them.

The computational base manifold is a flat torus T^n (n = 1 or 2) with a
constant symmetric positive-definite metric and uniform periodic sampling
along each axis.  Covariant derivatives coincide with coordinate partials,
so all differential operators reduce to periodic finite-difference stencils
(see :mod:`torusflow.geometry`).
"""

from __future__ import annotations

import numpy as np


class GridError(ValueError):
    """Invalid grid construction or a field/grid mismatch."""


class PeriodicGrid:
    """Uniformly sampled flat torus.

    Parameters
    ----------
    dim : int
        Number of base dimensions, 1 or 2.
    resolution : int or sequence of int
        Nodes per axis (>= 8 each).  A scalar applies to every axis.
    period : float or sequence of float, optional
        Period per axis, default 2*pi.
    metric : array_like, optional
        Constant metric as an (dim, dim) symmetric positive-definite
        matrix.  Defaults to the identity.

    Attributes
    ----------
    spacing : ndarray
        Node spacing per axis, ``period / resolution``.
    weight : float
        Quadrature weight of one node: product of spacings times
        sqrt(det metric).
    """

    def __init__(self, dim, resolution, period=2 * np.pi, metric=None):
        if dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {dim}")
        self.dim = int(dim)

        res = np.broadcast_to(np.asarray(resolution, dtype=int), (self.dim,)).copy()
        if np.any(res < 8):
            raise GridError(f"resolution must be >= 8 per axis, got {res.tolist()}")
        self.resolution = res

        per = np.broadcast_to(np.asarray(period, dtype=float), (self.dim,)).copy()
        if np.any(per <= 0) or not np.all(np.isfinite(per)):
            raise GridError(f"period must be positive and finite, got {per.tolist()}")
        self.period = per

        if metric is None:
            metric = np.eye(self.dim)
        sigma = np.asarray(metric, dtype=float)
        if sigma.shape != (self.dim, self.dim):
            raise GridError(f"metric must be {self.dim}x{self.dim}, got shape {sigma.shape}")
        if not np.array_equal(sigma, sigma.T):
            raise GridError("metric must be exactly symmetric")
        eigvals = np.linalg.eigvalsh(sigma)
        if np.any(eigvals <= 0):
            raise GridError(f"metric must be positive definite, eigenvalues {eigvals.tolist()}")
        self.metric = sigma
        self.metric_inv = np.linalg.inv(sigma)
        self.metric_det = float(np.linalg.det(sigma))
        # largest eigenvalue of the inverse metric bounds the diffusion
        # coefficient of the graph operators (used by the CFL controller)
        self.metric_inv_max_eig = float(np.linalg.eigvalsh(self.metric_inv).max())

        self.spacing = self.period / self.resolution
        self.shape = tuple(int(r) for r in self.resolution)
        self.node_count = int(np.prod(self.resolution))
        self.weight = float(np.prod(self.spacing) * np.sqrt(self.metric_det))

        self.axes = tuple(
            np.arange(self.resolution[a]) * self.spacing[a] for a in range(self.dim)
        )

    def coords(self):
        """Node coordinate arrays, each shaped like a field on this grid."""
        if self.dim == 1:
            return (self.axes[0],)
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def field(self, values):
        """Wrap ``values`` (array or scalar) as a :class:`ScalarField` here."""
        return ScalarField(self, values)

    def field_from_expr(self, expr, u=None):
        """Sample an expression of x1[,x2] (and optionally u) on the nodes."""
        subs = {f"x{a + 1}": c for a, c in enumerate(self.coords())}
        if u is not None:
            subs["u"] = u
        return ScalarField(self, expr.evaluate(**subs))

    def __eq__(self, other):
        return (
            isinstance(other, PeriodicGrid)
            and self.dim == other.dim
            and np.array_equal(self.resolution, other.resolution)
            and np.array_equal(self.period, other.period)
            and np.array_equal(self.metric, other.metric)
        )

    def __hash__(self):
        return hash((self.dim, self.shape, tuple(self.period), self.metric.tobytes()))

    def __repr__(self):
        return (
            f"PeriodicGrid(dim={self.dim}, resolution={self.resolution.tolist()}, "
            f"period={self.period.tolist()})"
        )


class ScalarField:
    """One real value per grid node, row-major over axes."""

    def __init__(self, grid, values):
        self.grid = grid
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 0:
            arr = np.full(grid.shape, float(arr))
        if arr.shape == (grid.node_count,) and grid.dim == 2:
            arr = arr.reshape(grid.shape)
        if arr.shape != grid.shape:
            raise GridError(f"field shape {arr.shape} does not match grid shape {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise GridError("field values must all be finite")
        self.values = arr

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    @property
    def flat(self):
        """Row-major flat view of the values."""
        return self.values.reshape(-1)

    def __repr__(self):
        return f"ScalarField(grid={self.grid!r}, min={self.values.min():g}, max={self.values.max():g})"


class GradientField:
    """Covariant gradient components u_i, one n-vector per node.

    ``components[a]`` holds the partial along axis ``a`` (covariant and
    coordinate derivatives coincide on a flat constant metric).
    """

    def __init__(self, grid, components):
        self.grid = grid
        self.components = components  # tuple of arrays, one per axis

    def norm_squared(self):
        """|Du|^2 = sigma^{kl} u_k u_l per node."""
        inv = self.grid.metric_inv
        n = self.grid.dim
        total = np.zeros(self.grid.shape)
        for k in range(n):
            for l in range(n):
                total += inv[k, l] * self.components[k] * self.components[l]
        return total

    def raised(self):
        """Contravariant components u^k = sigma^{kl} u_l."""
        inv = self.grid.metric_inv
        n = self.grid.dim
        return tuple(
            sum(inv[k, l] * self.components[l] for l in range(n)) for k in range(n)
        )


class HessianField:
    """Second covariant derivatives u_{jk}; symmetric per node by construction."""

    def __init__(self, grid, entries):
        self.grid = grid
        self.entries = entries  # dict[(j, k)] -> array, stored for j <= k

    def __getitem__(self, jk):
        j, k = jk
        return self.entries[(j, k) if j <= k else (k, j)]
