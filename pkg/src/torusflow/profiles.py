"""Warp profiles and the height transform.

A :class:`WarpedProfile` wraps a positive expression phi(u) on a closed
interval together with its derivatives, the strictly increasing height
transform Phi with Phi' = 1/phi (anchored so Phi(anchor) = 0), and the
inverse transform.  Phi is accumulated by composite Gauss-Legendre
quadrature on a fine subdivision and interpolated with a cubic Hermite
table whose slopes 1/phi are exact at the nodes, so it is accurate to
~1e-14; the inverse is a bisection-safeguarded Newton iteration on the
monotone Phi, converged to 1e-12.
"""

from __future__ import annotations

import numpy as np

from .expressions import Expr


class ProfileError(ValueError):
    """Profile construction or domain failure."""


class DomainError(ProfileError):
    """A queried value left the profile's declared domain."""


class CurveTable:
    """Cubic Hermite interpolant of a smooth function on a uniform grid.

    Stores values and exact derivatives at the breakpoints; interpolation
    error scales like (step^4/384) * max|f''''|, which is below 1e-13 for
    the table sizes used here.
    """

    __slots__ = ("lo", "hi", "step", "values", "derivs")

    def __init__(self, lo, hi, values, derivs):
        self.lo = float(lo)
        self.hi = float(hi)
        self.values = np.asarray(values, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        if self.values.shape != self.derivs.shape or self.values.ndim != 1:
            raise ProfileError("table values and derivatives must be 1-D and equal length")
        if len(self.values) < 2:
            raise ProfileError("table needs at least two breakpoints")
        self.step = (self.hi - self.lo) / (len(self.values) - 1)

    def __call__(self, x, clamp=False):
        x = np.asarray(x, dtype=float)
        if not clamp:
            bad = (x < self.lo) | (x > self.hi) | ~np.isfinite(x)
            if np.any(bad):
                idx = int(np.argmax(bad))
                val = x.reshape(-1)[idx] if x.ndim else float(x)
                raise DomainError(
                    f"value {val!r} outside table range [{self.lo}, {self.hi}]"
                    + (f" at flat node {idx}" if x.ndim else "")
                )
        t = np.clip((x - self.lo) / self.step, 0.0, len(self.values) - 1.0)
        k = np.minimum(t.astype(int), len(self.values) - 2)
        s = t - k
        v0, v1 = self.values[k], self.values[k + 1]
        d0, d1 = self.derivs[k] * self.step, self.derivs[k + 1] * self.step
        s2, s3 = s * s, s * s * s
        out = (
            (2 * s3 - 3 * s2 + 1) * v0
            + (s3 - 2 * s2 + s) * d0
            + (-2 * s3 + 3 * s2) * v1
            + (s3 - s2) * d1
        )
        return out if out.ndim else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def antiderivative_table(fn, lo, hi, anchor, n_intervals=4096):
    """CurveTable of A(x) = integral of fn from anchor to x on [lo, hi].

    Composite 16-point Gauss-Legendre per subinterval; the table slopes are
    fn itself (exact).
    """
    def f(x):
        return np.broadcast_to(np.asarray(fn(x), dtype=float), np.shape(x))

    xs = np.linspace(lo, hi, n_intervals + 1)
    half = 0.5 * (xs[1] - xs[0])
    mids = 0.5 * (xs[:-1] + xs[1:])
    # quadrature nodes for all intervals at once: shape (n_intervals, 16)
    pts = mids[:, None] + half * _GL_NODES[None, :]
    pieces = (f(pts) * _GL_WEIGHTS[None, :]).sum(axis=1) * half
    acc = np.concatenate([[0.0], np.cumsum(pieces)])
    # shift so A(anchor) = 0; anchor interpolated on the accumulated grid
    t = (anchor - lo) / (xs[1] - xs[0])
    k = min(int(np.clip(t, 0, n_intervals - 1)), n_intervals - 1)
    local = 0.0
    if anchor > xs[k]:
        h2 = 0.5 * (anchor - xs[k])
        m = 0.5 * (anchor + xs[k])
        local = float((f(m + h2 * _GL_NODES) * _GL_WEIGHTS).sum() * h2)
    acc_anchor = acc[k] + local
    return CurveTable(lo, hi, acc - acc_anchor, f(xs))


class WarpedProfile:
    """phi together with phi', phi'', the height transform and its inverse."""

    def __init__(self, phi: Expr, domain, anchor=None, positivity_samples=1000):
        bad_vars = phi.free_vars() - {"u"}
        if bad_vars:
            raise ProfileError(f"profile must depend on u only, found {sorted(bad_vars)}")
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise ProfileError(f"empty profile domain [{lo}, {hi}]")
        self.expr = phi
        self.d_expr = phi.diff("u")
        self.dd_expr = self.d_expr.diff("u")
        self.domain = (lo, hi)
        self.anchor = 0.5 * (lo + hi) if anchor is None else float(anchor)
        if not lo <= self.anchor <= hi:
            raise ProfileError(f"anchor {self.anchor} outside domain [{lo}, {hi}]")

        samples = np.linspace(lo, hi, max(int(positivity_samples), 2))
        vals = np.asarray(phi.evaluate(u=samples), dtype=float)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
            idx = int(np.argmin(vals))
            raise ProfileError(
                f"warp must be positive on its domain; phi({samples[idx]:g}) = {vals[idx]:g}"
            )

        # a constant warp makes the transform exactly affine; use the closed
        # form so the product-manifold degeneracy holds to the last bit
        self._const_phi = phi.value if phi.is_const() else None
        if self._const_phi is None:
            self._transform = antiderivative_table(
                lambda x: 1.0 / self._phi_arr(x), lo, hi, self.anchor
            )
        else:
            self._transform = None
        self._inverse_table = None

    # -- pointwise data -----------------------------------------------------

    def _phi_arr(self, x):
        return np.broadcast_to(np.asarray(self.expr.evaluate(u=x), dtype=float), np.shape(x))

    def phi(self, x):
        return self.expr.evaluate(u=np.asarray(x, dtype=float))

    def dphi(self, x):
        return self.d_expr.evaluate(u=np.asarray(x, dtype=float))

    def ddphi(self, x):
        return self.dd_expr.evaluate(u=np.asarray(x, dtype=float))

    # -- the height transform ------------------------------------------------

    def transform(self, x):
        """Phi(x), strictly increasing, Phi(anchor) = 0."""
        x = np.asarray(x, dtype=float)
        if self._const_phi is not None:
            lo, hi = self.domain
            if np.any(x < lo) or np.any(x > hi):
                bad = (x < lo) | (x > hi)
                idx = int(np.argmax(bad))
                val = x.reshape(-1)[idx] if x.ndim else float(x)
                raise DomainError(f"height {val!r} outside profile domain [{lo}, {hi}]")
            out = (x - self.anchor) / self._const_phi
            return out if out.ndim else float(out)
        return self._transform(x)

    @property
    def transform_range(self):
        if self._const_phi is not None:
            lo, hi = self.domain
            return (lo - self.anchor) / self._const_phi, (hi - self.anchor) / self._const_phi
        return float(self._transform.values[0]), float(self._transform.values[-1])

    def inverse(self, p, tol=1e-12, max_iter=100):
        """Phi^{-1}(p) by bisection-safeguarded Newton on the monotone Phi."""
        p = np.asarray(p, dtype=float)
        p_lo, p_hi = self.transform_range
        scale = max(abs(p_lo), abs(p_hi), 1.0)
        if np.any(p < p_lo - 1e-9 * scale) or np.any(p > p_hi + 1e-9 * scale):
            bad = (p < p_lo - 1e-9 * scale) | (p > p_hi + 1e-9 * scale)
            idx = int(np.argmax(bad))
            val = p.reshape(-1)[idx] if p.ndim else float(p)
            raise DomainError(
                f"transformed height {val!r} outside [{p_lo:.6g}, {p_hi:.6g}]"
                + (f" at flat node {idx}" if p.ndim else "")
            )
        p_clip = np.clip(p, p_lo, p_hi)
        if self._const_phi is not None:
            out = self.anchor + p_clip * self._const_phi
            return out if out.ndim else float(out)
        lo = np.full(np.shape(p_clip), self.domain[0])
        hi = np.full(np.shape(p_clip), self.domain[1])
        # initial guess: linear in the transformed variable
        x = self.domain[0] + (p_clip - p_lo) / (p_hi - p_lo) * (self.domain[1] - self.domain[0])
        for _ in range(max_iter):
            f = self._transform(x, clamp=True) - p_clip
            lo = np.where(f <= 0, x, lo)
            hi = np.where(f >= 0, x, hi)
            step = f * self._phi_arr(x)  # Phi' = 1/phi
            x_new = x - step
            # fall back to bisection wherever Newton leaves the bracket
            outside = (x_new <= lo) | (x_new >= hi)
            x_new = np.where(outside, 0.5 * (lo + hi), x_new)
            done = np.all(np.abs(x_new - x) <= tol)
            x = x_new
            if done:
                break
        return x if x.ndim else float(x)

    def inverse_table(self, n_points=4097) -> CurveTable:
        """Uniform Hermite table of Phi^{-1} over the full transformed range."""
        if self._inverse_table is None or len(self._inverse_table.values) != n_points:
            p_lo, p_hi = self.transform_range
            ps = np.linspace(p_lo, p_hi, n_points)
            xs = self.inverse(ps)
            xs[0], xs[-1] = self.domain[0], self.domain[1]
            self._inverse_table = CurveTable(p_lo, p_hi, xs, self._phi_arr(xs))
        return self._inverse_table

    def composed_table(self, expr: Expr, n_points=4097) -> CurveTable:
        """Hermite table of p -> expr(Phi^{-1}(p)) over the transformed range.

        The slope is expr'(x) * phi(x) by the chain rule, exact at the nodes.
        """
        bad = expr.free_vars() - {"u"}
        if bad:
            raise ProfileError(f"composed expression must depend on u only, found {sorted(bad)}")
        base = self.inverse_table(n_points)
        xs = base.values
        vals = np.broadcast_to(np.asarray(expr.evaluate(u=xs), dtype=float), xs.shape)
        ders = np.broadcast_to(
            np.asarray(expr.diff("u").evaluate(u=xs), dtype=float), xs.shape
        ) * self._phi_arr(xs)
        p_lo, p_hi = self.transform_range
        return CurveTable(p_lo, p_hi, vals, ders)

    def sampled_table(self, expr: Expr, lo, hi, n_points=4097) -> CurveTable:
        """Hermite table of a u-only expression on [lo, hi] (no composition)."""
        xs = np.linspace(lo, hi, n_points)
        vals = np.broadcast_to(np.asarray(expr.evaluate(u=xs), dtype=float), xs.shape)
        ders = np.broadcast_to(np.asarray(expr.diff("u").evaluate(u=xs), dtype=float), xs.shape)
        return CurveTable(lo, hi, vals, ders)

    def dphi_zero(self, a, b, tol=1e-12):
        """The unique zero of phi' in [a, b], located by bisection."""
        fa, fb = float(self.dphi(a)), float(self.dphi(b))
        if fa == 0.0:
            return float(a)
        if fb == 0.0:
            return float(b)
        if fa > 0 or fb < 0:
            raise ProfileError(
                f"phi' must change sign from <=0 to >0 on [{a}, {b}]; "
                f"phi'({a:g})={fa:g}, phi'({b:g})={fb:g}"
            )
        lo, hi = float(a), float(b)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fm = float(self.dphi(mid))
            if fm == 0.0:
                return mid
            if fm < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def __repr__(self):
        return f"WarpedProfile(phi={self.expr}, domain={self.domain}, anchor={self.anchor:g})"


def build_profile(phi: Expr, domain, anchor=None) -> WarpedProfile:
    """Construct a profile; rejects nonpositive warps with the failing location."""
    return WarpedProfile(phi, domain, anchor)


def tabulate_function(fn, dfn, lo, hi, n_points=4097) -> CurveTable:
    """Hermite table of a numeric function with known derivative."""
    xs = np.linspace(lo, hi, n_points)
    return CurveTable(lo, hi, fn(xs), dfn(xs))
