"""Hypothesis checkers for the flow problems.

Each checker evaluates its inequalities exhaustively on the grid nodes (and
on a height sample for the pointwise-in-height conditions) and returns a
report with one entry per condition: pass/fail, the worst margin, and where
it occurs.  Margins are signed distances to violation: a condition passes
iff its margin is >= 0 (or > 0 where strictness is required); equalities at
the endpoints count as passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import Expr
from .profiles import WarpedProfile


@dataclass
class ConditionResult:
    name: str
    passed: bool
    margin: float
    location: dict = field(default_factory=dict)

    def line(self):
        where = ", ".join(f"{k}={v:.6g}" for k, v in self.location.items())
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<24s} {status} margin={self.margin:.6e}" + (f" ({where})" if where else "")


@dataclass
class ConditionReport:
    entries: list
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def to_text(self):
        lines = [e.line() for e in self.entries]
        for k, v in self.extras.items():
            lines.append(f"{k} = {v:.12g}")
        return "\n".join(lines)

    def to_json_dict(self):
        return {
            "passed": self.passed,
            "conditions": [
                {"name": e.name, "passed": e.passed, "margin": e.margin, "location": e.location}
                for e in self.entries
            ],
            **self.extras,
        }


def _coord_subs(grid):
    return {f"x{a + 1}": c for a, c in enumerate(grid.coords())}


def _worst_node(values, grid):
    """Coordinates of the node minimizing ``values``."""
    flat = np.argmin(values)
    idx = np.unravel_index(flat, grid.shape)
    return {f"x{a + 1}": float(grid.axes[a][idx[a]]) for a in range(grid.dim)}


def _endpoint_entry(name, values, grid, extra_loc=None, strict=False):
    values = np.broadcast_to(np.asarray(values, dtype=float), grid.shape)
    margin = float(values.min()) + 0.0  # normalize -0.0
    loc = _worst_node(values, grid)
    if extra_loc:
        loc.update(extra_loc)
    passed = margin > 0 if strict else margin >= 0
    return ConditionResult(name, bool(passed), margin, loc)


def _height_sample_entry(name, fn, grid, u0, u1, u_samples):
    """Minimum of fn(x, u) over nodes x and a height sample; passes iff >= 0."""
    us = np.linspace(u0, u1, max(int(u_samples), 2))
    subs = _coord_subs(grid)
    worst = np.inf
    worst_loc = {}
    for uval in us:
        vals = np.broadcast_to(
            np.asarray(fn(subs, uval), dtype=float), grid.shape
        )
        m = float(vals.min())
        if m < worst:
            worst = m
            worst_loc = _worst_node(vals, grid)
            worst_loc["u"] = float(uval)
    return ConditionResult(name, worst >= 0, worst + 0.0, worst_loc)


def check_product_flow_conditions(h: Expr, g: Expr, u0, u1, grid, u_samples=64) -> ConditionReport:
    """Barrier endpoints g+h >= 0 at u0, <= 0 at u1, and d_u g <= 0 on the slab."""
    if not u0 < u1:
        raise ValueError(f"need u0 < u1, got {u0}, {u1}")
    subs = _coord_subs(grid)
    total = g + h
    lower = total.evaluate(u=float(u0), **subs)
    upper = total.evaluate(u=float(u1), **subs)
    du_g = g.diff("u")
    entries = [
        _endpoint_entry("lower_barrier", lower, grid, {"u": float(u0)}),
        _endpoint_entry("upper_barrier", np.negative(upper), grid, {"u": float(u1)}),
        _height_sample_entry(
            "g_nonincreasing_in_u",
            lambda s, uval: -np.asarray(du_g.evaluate(u=uval, **s), dtype=float),
            grid, u0, u1, u_samples,
        ),
    ]
    return ConditionReport(entries)


def check_prescribed_curvature_conditions(
    f: Expr, profile: WarpedProfile, u0, u1, grid, u_samples=64
) -> ConditionReport:
    """Warped barrier f(x,u0) >= n phi'/phi >= f(x,u1) and d_u(f phi) <= 0."""
    if not u0 < u1:
        raise ValueError(f"need u0 < u1, got {u0}, {u1}")
    lo, hi = profile.domain
    if not (lo <= u0 and u1 <= hi):
        raise ValueError(f"slab [{u0}, {u1}] outside profile domain [{lo}, {hi}]")
    n = grid.dim
    subs = _coord_subs(grid)

    def slice_curvature(uval):
        return n * float(profile.dphi(uval)) / float(profile.phi(uval))

    f0 = np.asarray(f.evaluate(u=float(u0), **subs), dtype=float) - slice_curvature(u0)
    f1 = slice_curvature(u1) - np.asarray(f.evaluate(u=float(u1), **subs), dtype=float)
    fp = f * profile.expr
    du_fp = fp.diff("u")
    entries = [
        _endpoint_entry("lower_barrier", f0, grid, {"u": float(u0)}),
        _endpoint_entry("upper_barrier", f1, grid, {"u": float(u1)}),
        _height_sample_entry(
            "f_phi_nonincreasing_in_u",
            lambda s, uval: -np.asarray(du_fp.evaluate(u=uval, **s), dtype=float),
            grid, u0, u1, u_samples,
        ),
    ]
    return ConditionReport(entries)


def check_weighted_flow_conditions(profile: WarpedProfile, a, b, samples=1000) -> ConditionReport:
    """phi'(a) <= 0 < phi'(b) and phi'' >= 0 on (a, b); locates the phi' zero."""
    lo, hi = profile.domain
    if not (lo <= a < b <= hi):
        raise ValueError(f"[{a}, {b}] must sit inside the profile domain [{lo}, {hi}]")
    da = float(profile.dphi(a))
    db = float(profile.dphi(b))
    us = np.linspace(a, b, max(int(samples), 2))
    dd = np.asarray(profile.ddphi(us), dtype=float)
    dd = np.broadcast_to(dd, us.shape)
    k = int(np.argmin(dd))
    entries = [
        ConditionResult("slope_at_left_endpoint", da <= 0, -da + 0.0, {"u": float(a)}),
        ConditionResult("slope_at_right_endpoint", db > 0, db + 0.0, {"u": float(b)}),
        ConditionResult("convexity", float(dd.min()) >= 0, float(dd.min()) + 0.0, {"u": float(us[k])}),
    ]
    report = ConditionReport(entries)
    if report.passed:
        report.extras["stationary_slice"] = profile.dphi_zero(a, b)
    return report
