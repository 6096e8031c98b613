"""Energy weights for the dissipation ledger.

For height-only h the weight s(u) = exp(-integral of h) turns the flow into
a descent for E = integral of (s(u) omega - G(x, u)), where
G(x, u) = integral of s(t) g(x, t) dt from the anchor.  Both integrals are
quadrature-backed: s through a Hermite antiderivative table, G by a fixed
Gauss-Legendre rule applied per node with the node's own upper limit.
"""

from __future__ import annotations

import numpy as np

from .expressions import Expr
from .profiles import antiderivative_table

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class WeightError(ValueError):
    pass


class WeightPair:
    """s and G, anchored so s(anchor) = 1 and G(x, anchor) = 0.

    ``h_fn`` maps height arrays to h values; ``g_fn`` maps (coords, height
    arrays) to g values, or is None when g vanishes identically.
    """

    def __init__(self, h_fn, g_fn, lo, hi, anchor):
        self.anchor = float(anchor)
        self.lo, self.hi = float(lo), float(hi)
        self._h_fn = h_fn
        self._g_fn = g_fn
        self._h_antideriv = antiderivative_table(h_fn, self.lo, self.hi, self.anchor)

    def s(self, values, clamp=False):
        """s(u) = exp(-integral of h from the anchor to u).

        ``clamp`` evaluates out-of-span heights at the nearest span endpoint
        (used by trace sampling on runs that are about to be flagged
        divergent; barrier-contained runs never leave the span).
        """
        return np.exp(-self._h_antideriv(np.asarray(values, dtype=float), clamp=clamp))

    def h(self, values):
        return self._h_fn(np.asarray(values, dtype=float))

    @property
    def has_g(self):
        return self._g_fn is not None

    def G(self, coords, values, clamp=False):
        """G(x, u) per node: Gauss-Legendre from the anchor to each node's u."""
        values = np.asarray(values, dtype=float)
        if self._g_fn is None:
            return np.zeros_like(values)
        if clamp:
            values = np.clip(values, self.lo, self.hi)
        half = 0.5 * (values - self.anchor)
        mid = 0.5 * (values + self.anchor)
        # quadrature points per node: shape (q, *field_shape)
        pts = mid[None, ...] + _GL_NODES.reshape((-1,) + (1,) * values.ndim) * half[None, ...]
        integrand = self.s(pts, clamp=clamp) * self._g_fn(coords, pts)
        w = _GL_WEIGHTS.reshape((-1,) + (1,) * values.ndim)
        return (integrand * w).sum(axis=0) * half


def build_weights(h: Expr, g: Expr | None, grid, anchor, span=None) -> WeightPair:
    """Weights from symbolic data; h must depend on the height only.

    ``span`` is the height interval the tables must cover (defaults to a
    wide symmetric interval when no slab is known).
    """
    bad = h.free_vars() - {"u"}
    if bad:
        raise WeightError(
            "the energy ledger needs h = h(u); "
            f"h depends on {sorted(bad)} as well, so no weight s(u) exists"
        )
    if span is None:
        span = (-10.0, 10.0)
    lo, hi = float(span[0]), float(span[1])
    pad = 0.25 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    anchor = float(np.clip(anchor, lo, hi))

    def h_fn(vals):
        return np.broadcast_to(
            np.asarray(h.evaluate(u=vals), dtype=float), np.shape(vals)
        ).copy()

    g_fn = None
    if g is not None and not g.is_const(0.0):
        def g_fn(coords, vals):
            subs = {f"x{a + 1}": c for a, c in enumerate(coords)}
            return np.broadcast_to(
                np.asarray(g.evaluate(u=vals, **subs), dtype=float), np.shape(vals)
            ).copy()

    return WeightPair(h_fn, g_fn, lo, hi, anchor)


def build_weights_numeric(h_fn, g_fn, lo, hi, anchor) -> WeightPair:
    """Weights from numeric height-only h (used by the transformed pipelines)."""
    return WeightPair(h_fn, g_fn, lo, hi, anchor)
