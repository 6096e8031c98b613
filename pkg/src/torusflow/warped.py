"""Warped-product geometry, the product correspondence, and the two pipelines.

A graph (x, u(x)) in the warped product with warp phi corresponds to the
graph of the transformed height Phi(u) in the plain product; its mean
curvature (downward normal) is

    H = ((sigma^{ij} - p^i p^j / omega^2) p_{ij} - n phi'(u)) / (omega phi(u))

with p = Phi(u) and omega = sqrt(1 + |Dp|^2).  The evaluator here forms the
first-order quantities through the height gradient (Dp = Du / phi(u),
exact chain rule) and the curvature term from stencils on the transformed
field; this keeps it an independent check against the product-side
operators while staying second-order consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .conditions import (
    ConditionReport,
    check_prescribed_curvature_conditions,
    check_weighted_flow_conditions,
)
from .expressions import Expr
from .flow import FlowProblem, FlowTrace, run_to_stationary
from .grid import PeriodicGrid, ScalarField
from .monitors import monitor_barrier
from .profiles import WarpedProfile


class ConditionError(ValueError):
    """A pipeline precondition (hypothesis check) failed."""

    def __init__(self, report: ConditionReport, what: str):
        super().__init__(f"{what} hypotheses fail:\n{report.to_text()}")
        self.report = report


@dataclass
class WarpedGraph:
    """Height field over the torus, read inside a warped product."""

    grid: PeriodicGrid
    height: ScalarField
    profile: WarpedProfile

    def __post_init__(self):
        if self.height.grid != self.grid:
            raise ValueError("height field lives on a different grid")
        lo, hi = self.profile.domain
        vmin, vmax = self.height.values.min(), self.height.values.max()
        if vmin < lo or vmax > hi:
            bad = np.argmax((self.height.values < lo) | (self.height.values > hi))
            raise ValueError(
                f"height range [{vmin:.6g}, {vmax:.6g}] leaves the profile domain "
                f"[{lo:.6g}, {hi:.6g}] (first at flat node {int(bad)})"
            )


def to_product(wg: WarpedGraph) -> ScalarField:
    """Transformed height Phi(u), a graph over the same torus in the product."""
    return ScalarField(wg.grid, wg.profile.transform(wg.height.values))


def to_warped(phi_field: ScalarField, profile: WarpedProfile) -> WarpedGraph:
    """Inverse transform; out-of-range values are reported with their node."""
    heights = profile.inverse(phi_field.values)
    return WarpedGraph(phi_field.grid, ScalarField(phi_field.grid, heights), profile)


def warped_mean_curvature(wg: WarpedGraph) -> ScalarField:
    """Mean curvature of the graph in the warped product (downward normal)."""
    grid = wg.grid
    n = grid.dim
    u = wg.height
    phi = np.asarray(wg.profile.phi(u.values), dtype=float)
    dphi = np.asarray(wg.profile.dphi(u.values), dtype=float)

    du = geometry.gradient(u)
    p_grad = tuple(c / phi for c in du.components)  # Dp = Du / phi(u)

    transformed = ScalarField(grid, wg.profile.transform(u.values))
    p_hess = geometry.hessian(transformed)

    inv = grid.metric_inv
    nd2 = np.zeros(grid.shape)
    for k in range(n):
        for l in range(n):
            nd2 += inv[k, l] * p_grad[k] * p_grad[l]
    omega2 = 1.0 + nd2
    omega = np.sqrt(omega2)
    raised = tuple(sum(inv[k, l] * p_grad[l] for l in range(n)) for k in range(n))

    contraction = np.zeros(grid.shape)
    for i in range(n):
        for j in range(n):
            g_ij = inv[i, j] - raised[i] * raised[j] / omega2
            contraction += g_ij * p_hess[(i, j)]
    return ScalarField(grid, (contraction - n * dphi) / (omega * phi))


def correspondence_residual(wg: WarpedGraph, f) -> float:
    """sup |H_product(Phi(u)) - f phi(u) - n phi'(u)/omega| over the nodes.

    With f the warped mean curvature of the same graph this measures the
    internal consistency of the two curvature routes and decays at second
    order under refinement.
    """
    grid = wg.grid
    n = grid.dim
    f_vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    phi = np.asarray(wg.profile.phi(wg.height.values), dtype=float)
    dphi = np.asarray(wg.profile.dphi(wg.height.values), dtype=float)
    transformed = to_product(wg)
    h_prod = geometry.mean_curvature(transformed).values
    omega = geometry.area_element(geometry.gradient(transformed), grid).values
    resid = h_prod - f_vals * phi - n * dphi / omega
    return float(np.abs(resid).max())


# -- pipeline: prescribed mean curvature --------------------------------------

@dataclass
class PrescribedMCResult:
    graph: WarpedGraph
    trace: FlowTrace
    residual: float
    conditions: ConditionReport
    barrier_passed: bool
    success: bool
    failure_reason: str = ""


def solve_prescribed_mc(f: Expr, profile: WarpedProfile, u0, u1, grid: PeriodicGrid,
                        u_init: ScalarField, tol=1e-8, t_max=200.0, check=True,
                        **run_kwargs) -> PrescribedMCResult:
    """Flow a graph to a stationary one whose warped mean curvature is f.

    Requires the barrier/monotonicity hypotheses to pass (skippable with
    ``check=False`` when the caller already ran them); runs the product flow
    of the transformed height with the substituted data and reports the
    final curvature defect measured by the independent warped evaluator.
    """
    report = check_prescribed_curvature_conditions(f, profile, u0, u1, grid)
    if check and not report.passed:
        raise ConditionError(report, "prescribed-curvature")
    problem = FlowProblem.prescribed_curvature(grid, f, profile, u0, u1, u_init)
    trace = run_to_stationary(problem, tol=tol, t_max=t_max, **run_kwargs)

    heights = profile.inverse(np.clip(trace.final.values, *profile.transform_range))
    graph = WarpedGraph(grid, ScalarField(grid, heights), profile)
    subs = {f"x{a + 1}": c for a, c in enumerate(grid.coords())}
    f_vals = np.broadcast_to(
        np.asarray(f.evaluate(u=heights, **subs), dtype=float), grid.shape)
    residual = float(np.abs(warped_mean_curvature(graph).values - f_vals).max())

    barrier = monitor_barrier(trace, *problem.slab)
    failure = ""
    if trace.termination != "stationary":
        failure = f"flow terminated with reason {trace.termination!r} ({trace.note})"
    elif not barrier.passed:
        failure = "barrier violated along the trace"
    return PrescribedMCResult(
        graph=graph,
        trace=trace,
        residual=residual,
        conditions=report,
        barrier_passed=barrier.passed,
        success=not failure,
        failure_reason=failure,
    )


# -- pipeline: weighted flow to the geodesic slice -----------------------------

@dataclass
class WeightedRunResult:
    trace: FlowTrace
    stationary_slice: float
    final_height: ScalarField
    sup_distance: float
    converged: bool


def weighted_mcf_run(profile: WarpedProfile, a, b, u_init: ScalarField, tol=1e-8,
                     t_max=200.0, slice_tol=None, strict=False,
                     **run_kwargs) -> WeightedRunResult:
    """Run the weighted flow and measure the distance to the geodesic slice.

    ``slice_tol`` bounds sup|u_final - x0| for convergence (defaults to
    ``tol``); with ``strict`` a miss raises instead of reporting.
    """
    report = check_weighted_flow_conditions(profile, a, b)
    if not report.passed:
        raise ConditionError(report, "weighted-flow")
    x0 = report.extras["stationary_slice"]
    grid = u_init.grid
    problem = FlowProblem.weighted(grid, profile, a, b, u_init)
    trace = run_to_stationary(problem, tol=tol, t_max=t_max, **run_kwargs)
    heights = ScalarField(grid, profile.inverse(
        np.clip(trace.final.values, *profile.transform_range)))
    sup_distance = float(np.abs(heights.values - x0).max())
    bound = tol if slice_tol is None else slice_tol
    converged = trace.termination == "stationary" and sup_distance < bound
    if strict and not converged:
        raise RuntimeError(
            f"weighted run missed the geodesic slice: reason={trace.termination}, "
            f"sup distance {sup_distance:.3e} (bound {bound:.3e})"
        )
    return WeightedRunResult(trace, x0, heights, sup_distance, converged)
