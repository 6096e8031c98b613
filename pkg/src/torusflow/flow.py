"""Time integration of the graph flows and the energy ledger.

Three problem kinds share one engine:

* ``product_flow``: du/dt = g^{ij} u_{ij} + h(x,u) + g(x,u) omega, the
  nonparametric form of the normal-speed flow.  The data may optionally be
  composed through a profile's inverse height transform (``height_map``),
  which is how the prescribed-curvature pipeline reuses this kind.
* ``weighted_warped_flow``: the transformed weighted flow
  dphi/dt = (g^{ij} phi_{ij} - n phi'(r(phi))) / omega, evolved in the
  transformed height.
* the slice ODE dr/dt = -n phi'(r), integrated by RK4.

Steps are explicit RK2 (midpoint) with a parabolic CFL bound
dt <= cfl * min(spacing)^2 / (2 n Lambda), Lambda the largest eigenvalue of
the inverse metric; the induced inverse metric never exceeds the base one,
so the bound is uniform along the run.  Stationarity means the max-norm of
the discrete right-hand side stays below ``tol`` on three consecutive
samples (immediately stationary initial data terminates at the first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._kernels import STATUS_OK, make_workspace
from .expressions import Expr
from .grid import PeriodicGrid, ScalarField
from .lowering import (
    MODE_PRODUCT,
    MODE_WEIGHTED,
    StencilParams,
    lower_product_reaction,
    lower_weighted_reaction,
)
from .profiles import DomainError, WarpedProfile
from .weights import WeightPair, build_weights, build_weights_numeric

OMEGA_DIVERGENCE_LIMIT = 1.0e6

KIND_PRODUCT = "product_flow"
KIND_WEIGHTED = "weighted_warped_flow"
KIND_SLICE = "slice_ode"


class FlowError(RuntimeError):
    pass


def _check_grid_vars(expr, grid, what):
    allowed = {"u"} | {f"x{a + 1}" for a in range(grid.dim)}
    extra = expr.free_vars() - allowed
    if extra:
        raise FlowError(f"{what} mentions {sorted(extra)} on a {grid.dim}-d grid")


@dataclass(eq=False)
class FlowProblem:
    """A flow run: kind, grid, data, optional barrier slab, initial state.

    The state variable is the evolved field: the height itself for plain
    product problems, the transformed height for weighted or height-mapped
    problems.  ``slab`` is kept in state coordinates.
    """

    kind: str
    grid: PeriodicGrid
    initial: ScalarField
    h: Expr | None = None
    g: Expr | None = None
    profile: WarpedProfile | None = None
    height_map: WarpedProfile | None = None
    slab: tuple | None = None
    _ws_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in (KIND_PRODUCT, KIND_WEIGHTED):
            raise FlowError(f"unknown problem kind {self.kind!r}")
        if self.initial.grid != self.grid:
            raise FlowError("initial field lives on a different grid")
        if self.slab is not None:
            lo, hi = self.slab
            vals = self.initial.values
            if not (vals.min() > lo and vals.max() < hi):
                raise FlowError(
                    f"initial state range [{vals.min():.6g}, {vals.max():.6g}] "
                    f"must lie strictly inside the slab ({lo:.6g}, {hi:.6g})"
                )

    # -- constructors --------------------------------------------------------

    @staticmethod
    def product(grid, h: Expr, g: Expr, initial: ScalarField, slab=None) -> "FlowProblem":
        _check_grid_vars(h, grid, "h")
        _check_grid_vars(g, grid, "g")
        return FlowProblem(KIND_PRODUCT, grid, initial, h=h, g=g,
                           slab=tuple(map(float, slab)) if slab is not None else None)

    @staticmethod
    def weighted(grid, profile: WarpedProfile, a, b, initial_height: ScalarField) -> "FlowProblem":
        lo, hi = profile.domain
        if not (lo <= a < b <= hi):
            raise FlowError(f"slab [{a}, {b}] not inside profile domain [{lo}, {hi}]")
        vals = initial_height.values
        if not (vals.min() > a and vals.max() < b):
            raise FlowError(
                f"initial height range [{vals.min():.6g}, {vals.max():.6g}] "
                f"must lie strictly inside ({a:.6g}, {b:.6g})"
            )
        state = ScalarField(grid, profile.transform(vals))
        slab = (float(profile.transform(a)), float(profile.transform(b)))
        return FlowProblem(KIND_WEIGHTED, grid, state, profile=profile, slab=slab)

    @staticmethod
    def prescribed_curvature(grid, f: Expr, profile: WarpedProfile, u0, u1,
                             initial_height: ScalarField) -> "FlowProblem":
        """Product flow in the transformed height whose stationary graphs have
        warped mean curvature f: h = -n phi'(u), g = -f(x,u) phi(u), u = r(state)."""
        _check_grid_vars(f, grid, "f")
        n = grid.dim
        h = Expr.const(-float(n)) * profile.d_expr
        g = Expr.const(-1.0) * (f * profile.expr)
        vals = initial_height.values
        if not (vals.min() > u0 and vals.max() < u1):
            raise FlowError(
                f"initial height range [{vals.min():.6g}, {vals.max():.6g}] "
                f"must lie strictly inside ({u0:.6g}, {u1:.6g})"
            )
        state = ScalarField(grid, profile.transform(vals))
        slab = (float(profile.transform(u0)), float(profile.transform(u1)))
        return FlowProblem(KIND_PRODUCT, grid, state, h=h, g=g, profile=profile,
                           height_map=profile, slab=slab)

    # -- engine plumbing -----------------------------------------------------

    @property
    def n(self):
        return self.grid.dim

    def state_to_height(self, values):
        """Map state values to the physical height (identity unless transformed)."""
        prof = self.height_map or (self.profile if self.kind == KIND_WEIGHTED else None)
        if prof is None:
            return values
        return prof.inverse(values)

    def workspace(self, backend=None):
        key = backend or "default"
        if key not in self._ws_cache:
            stencil = StencilParams.from_grid(self.grid)
            if self.kind == KIND_WEIGHTED:
                tape = lower_weighted_reaction(self.grid, self.profile, self.n)
                mode = MODE_WEIGHTED
            else:
                tape = lower_product_reaction(
                    self.grid, self.h, self.g,
                    height_map=self.height_map, state_span=self.slab,
                )
                mode = MODE_PRODUCT
            self._ws_cache[key] = make_workspace(stencil, mode, tape, backend)
        return self._ws_cache[key]

    def weight_pair(self) -> WeightPair | None:
        """Energy weights in state coordinates, when h depends on the height only."""
        if self.kind == KIND_WEIGHTED:
            prof = self.profile
            n = self.n
            inv = prof.inverse_table()

            def h_fn(s):
                return -n * np.asarray(prof.dphi(inv(s, clamp=True)), dtype=float)

            lo, hi = prof.transform_range
            anchor = self.slab[0] if self.slab else lo
            return build_weights_numeric(h_fn, None, lo, hi, anchor)

        if self.h is not None and self.h.free_vars() - {"u"}:
            return None
        if self.height_map is not None:
            prof = self.height_map
            inv = prof.inverse_table()
            h_expr, g_expr = self.h, self.g

            def h_fn(s):
                if h_expr is None:
                    return np.zeros_like(np.asarray(s, dtype=float))
                return np.broadcast_to(
                    np.asarray(h_expr.evaluate(u=inv(s, clamp=True)), dtype=float), np.shape(s)
                ).copy()

            g_fn = None
            if g_expr is not None and not g_expr.is_const(0.0):
                def g_fn(coords, s):
                    subs = {f"x{a + 1}": c for a, c in enumerate(coords)}
                    return np.broadcast_to(
                        np.asarray(g_expr.evaluate(u=inv(s, clamp=True), **subs), dtype=float),
                        np.shape(s),
                    ).copy()

            lo, hi = prof.transform_range
            anchor = self.slab[0] if self.slab else lo
            return build_weights_numeric(h_fn, g_fn, lo, hi, anchor)

        span = self.slab
        if span is None:
            v = self.initial.values
            pad = 0.5 * (v.max() - v.min() + 1.0)
            span = (v.min() - pad, v.max() + pad)
        anchor = span[0]
        h_expr = self.h if self.h is not None else Expr.const(0.0)
        return build_weights(h_expr, self.g, self.grid, anchor, span=span)


def cfl_timestep(grid: PeriodicGrid, cfl=0.4) -> float:
    """dt = cfl * (min spacing)^2 / (2 n Lambda)."""
    return float(cfl * min(grid.spacing) ** 2 / (2.0 * grid.dim * grid.metric_inv_max_eig))


# -- reference right-hand sides (numpy geometry path) -----------------------

def rhs_product(u: ScalarField, h: Expr | None, g: Expr | None) -> ScalarField:
    """g^{ij} u_{ij} + h + g*omega evaluated through the geometry operators."""
    total, omega, _, _ = geometry._contraction(u)
    subs = {f"x{a + 1}": c for a, c in enumerate(u.grid.coords())}
    out = total
    if h is not None:
        out = out + np.broadcast_to(np.asarray(h.evaluate(u=u.values, **subs), dtype=float), u.values.shape)
    if g is not None and not g.is_const(0.0):
        gv = np.broadcast_to(np.asarray(g.evaluate(u=u.values, **subs), dtype=float), u.values.shape)
        out = out + gv * omega
    return ScalarField(u.grid, out)


def rhs_weighted(phi_field: ScalarField, profile: WarpedProfile) -> ScalarField:
    """(g^{ij} phi_{ij} - n phi'(r(phi))) / omega with r = inverse transform.

    Raises :class:`DomainError` naming the first offending node when the
    state leaves the transform's range.
    """
    heights = profile.inverse(phi_field.values)  # raises DomainError out of range
    total, omega, _, _ = geometry._contraction(phi_field)
    n = phi_field.grid.dim
    react = n * np.asarray(profile.dphi(heights), dtype=float)
    return ScalarField(phi_field.grid, (total - react) / omega)


def reference_rhs(problem: FlowProblem, state: ScalarField) -> ScalarField:
    """The engine's right-hand side via the reference (numpy geometry) path."""
    if problem.kind == KIND_WEIGHTED:
        return rhs_weighted(state, problem.profile)
    if problem.height_map is not None:
        hm = problem.height_map
        heights = hm.inverse(state.values)
        total, omega, _, _ = geometry._contraction(state)
        subs = {f"x{a + 1}": c for a, c in enumerate(state.grid.coords())}
        out = total
        if problem.h is not None:
            out = out + np.broadcast_to(
                np.asarray(problem.h.evaluate(u=heights, **subs), dtype=float), out.shape)
        if problem.g is not None and not problem.g.is_const(0.0):
            gv = np.broadcast_to(
                np.asarray(problem.g.evaluate(u=heights, **subs), dtype=float), out.shape)
            out = out + gv * omega
        return ScalarField(state.grid, out)
    return rhs_product(state, problem.h, problem.g)


# -- energy ledger -----------------------------------------------------------

def energy(u: ScalarField, weights: WeightPair) -> float:
    """E = integral of (s(u) omega - G(x, u))."""
    omega = geometry.area_element(geometry.gradient(u), u.grid).values
    svals = weights.s(u.values)
    gvals = weights.G(u.grid.coords(), u.values)
    return float(np.sum(svals * omega - gvals) * u.grid.weight)


def dissipation(u: ScalarField, u_t: ScalarField, weights: WeightPair) -> float:
    """D = integral of s(u) u_t^2 / omega >= 0."""
    omega = geometry.area_element(geometry.gradient(u), u.grid).values
    svals = weights.s(u.values)
    return float(np.sum(svals * u_t.values**2 / omega) * u.grid.weight)


# -- traces -------------------------------------------------------------------

def _field_view(grid, values):
    """ScalarField wrapper without the finiteness check (trace internals only)."""
    sf = ScalarField.__new__(ScalarField)
    sf.grid = grid
    sf.values = values
    return sf


@dataclass(eq=False)
class FlowTrace:
    """Sampled history of one run, in state coordinates."""

    times: np.ndarray
    sup_ut: np.ndarray
    sup_omega: np.ndarray
    min_u: np.ndarray
    max_u: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    cumulative_dissipation: np.ndarray
    argmin_node: np.ndarray
    argmax_node: np.ndarray
    argmax_omega_node: np.ndarray
    initial: ScalarField
    final: ScalarField
    termination: str
    steps: int
    dt: float
    stride: int
    tol: float
    kind: str
    slab: tuple | None
    has_weights: bool
    note: str = ""
    fields: list | None = None

    @property
    def final_time(self):
        return float(self.times[-1])


def run_to_stationary(problem: FlowProblem, tol=1e-8, t_max=200.0, *, cfl=0.4,
                      stride=50, max_steps=50_000_000, store_fields=False,
                      backend=None) -> FlowTrace:
    """Advance until sup|u_t| < tol on three consecutive samples.

    Samples every ``stride`` steps (plus the final step).  Terminates with
    reason ``stationary``, ``max_time`` (t >= t_max), ``max_steps``, or
    ``diverged`` (non-finite state, omega above 1e6, or the state leaving a
    composition table's domain).
    """
    grid = problem.grid
    ws = problem.workspace(backend)
    dt = cfl_timestep(grid, cfl)
    weights = problem.weight_pair()
    coords = grid.coords()

    state = problem.initial.flat.copy()
    rhs_buf = np.zeros_like(state)

    rows = {k: [] for k in ("t", "sup_ut", "sup_om", "min_u", "max_u", "E", "D", "argmin", "argmax", "argom")}
    cum = [0.0]
    snapshots = [] if store_fields else None
    consecutive = 0
    steps = 0
    termination = None
    note = ""

    def take_sample(t):
        nonlocal termination, note, consecutive
        status = ws.rhs(state, rhs_buf)
        if not np.all(np.isfinite(state)) or not np.all(np.isfinite(rhs_buf)):
            termination = "diverged"
            note = "non-finite value"
        elif status != STATUS_OK:
            termination = "diverged"
            note = f"state left the data tables' domain at flat node {ws.fault_node}"
        sup_ut = float(np.abs(rhs_buf).max()) if np.all(np.isfinite(rhs_buf)) else float("inf")
        shaped = state.reshape(grid.shape)
        sf = _field_view(grid, shaped)
        omega = geometry.area_element(geometry.gradient(sf), grid).values
        sup_om = float(omega.max())
        if termination is None and sup_om > OMEGA_DIVERGENCE_LIMIT:
            termination = "diverged"
            note = f"omega exceeded {OMEGA_DIVERGENCE_LIMIT:g}"
        rows["t"].append(t)
        rows["sup_ut"].append(sup_ut)
        rows["sup_om"].append(sup_om)
        rows["min_u"].append(float(shaped.min()))
        rows["max_u"].append(float(shaped.max()))
        rows["argmin"].append(int(np.argmin(state)))
        rows["argmax"].append(int(np.argmax(state)))
        rows["argom"].append(int(np.argmax(omega)))
        if weights is not None and termination is None:
            svals = weights.s(shaped, clamp=True)
            gvals = weights.G(coords, shaped, clamp=True) if weights.has_g else 0.0
            e_val = float(np.sum(svals * omega - gvals) * grid.weight)
            d_val = float(np.sum(svals * rhs_buf.reshape(grid.shape) ** 2 / omega) * grid.weight)
        else:
            e_val, d_val = float("nan"), float("nan")
        rows["E"].append(e_val)
        rows["D"].append(d_val)
        if len(rows["t"]) > 1:
            dt_s = rows["t"][-1] - rows["t"][-2]
            d_prev, d_here = rows["D"][-2], rows["D"][-1]
            inc = 0.5 * (d_prev + d_here) * dt_s if np.isfinite(d_prev) and np.isfinite(d_here) else 0.0
            cum.append(cum[-1] + max(inc, 0.0))
        if snapshots is not None:
            snapshots.append(state.copy())
        if termination is None:
            if sup_ut < tol:
                consecutive += 1
                if consecutive >= 3 or len(rows["t"]) == 1:
                    termination = "stationary"
            else:
                consecutive = 0

    take_sample(0.0)
    while termination is None:
        if steps >= max_steps:
            termination = "max_steps"
            break
        if steps * dt >= t_max:
            termination = "max_time"
            break
        chunk = min(stride, max_steps - steps)
        status = ws.advance(state, chunk, dt)
        steps += chunk
        take_sample(steps * dt)
        if termination is None and status != STATUS_OK:
            termination = "diverged"
            note = f"state left the data tables' domain at flat node {ws.fault_node}"

    final = ScalarField(grid, state.reshape(grid.shape).copy()) if np.all(np.isfinite(state)) else None
    if final is None:
        final = problem.initial.copy()
        note = note or "non-finite final state; initial returned"
    return FlowTrace(
        times=np.asarray(rows["t"]),
        sup_ut=np.asarray(rows["sup_ut"]),
        sup_omega=np.asarray(rows["sup_om"]),
        min_u=np.asarray(rows["min_u"]),
        max_u=np.asarray(rows["max_u"]),
        energy=np.asarray(rows["E"]),
        dissipation=np.asarray(rows["D"]),
        cumulative_dissipation=np.asarray(cum),
        argmin_node=np.asarray(rows["argmin"], dtype=int),
        argmax_node=np.asarray(rows["argmax"], dtype=int),
        argmax_omega_node=np.asarray(rows["argom"], dtype=int),
        initial=problem.initial.copy(),
        final=final,
        termination=termination,
        steps=steps,
        dt=dt,
        stride=stride,
        tol=tol,
        kind=problem.kind,
        slab=problem.slab,
        has_weights=weights is not None,
        note=note,
        fields=snapshots,
    )


def step(state: ScalarField, problem: FlowProblem, dt: float, backend=None) -> ScalarField:
    """One explicit RK2 (midpoint) step; raises on divergence."""
    if dt <= 0:
        raise FlowError(f"dt must be positive, got {dt}")
    ws = problem.workspace(backend)
    values = state.flat.copy()
    status = ws.advance(values, 1, dt)
    if status != STATUS_OK:
        raise DomainError(
            f"state left the data tables' domain at flat node {ws.fault_node}"
        )
    if not np.all(np.isfinite(values)):
        raise FlowError("non-finite value after step (diverged)")
    return ScalarField(state.grid, values.reshape(state.grid.shape))


# -- the slice ODE ------------------------------------------------------------

@dataclass
class SliceTrajectory:
    times: np.ndarray
    values: np.ndarray

    @property
    def final(self):
        return float(self.values[-1])


def slice_ode_solve(profile: WarpedProfile, r0, t_end, dt, n=1) -> SliceTrajectory:
    """RK4 for dr/dt = -n phi'(r); errors out if the trajectory exits the domain."""
    lo, hi = profile.domain
    if not (lo <= r0 <= hi):
        raise DomainError(f"r0={r0} outside profile domain [{lo}, {hi}]")
    steps = max(int(np.ceil(t_end / dt - 1e-12)), 0)

    def f(r):
        return -float(n) * float(profile.dphi(r))

    ts = [0.0]
    rs = [float(r0)]
    r = float(r0)
    t = 0.0
    for k in range(steps):
        h_step = min(dt, t_end - t)
        k1 = f(r)
        k2 = f(r + 0.5 * h_step * k1)
        k3 = f(r + 0.5 * h_step * k2)
        k4 = f(r + h_step * k3)
        r = r + h_step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t = t + h_step
        if not (lo <= r <= hi):
            raise DomainError(f"slice trajectory left the domain at t={t:.6g}: r={r:.6g}")
        ts.append(t)
        rs.append(r)
    return SliceTrajectory(np.asarray(ts), np.asarray(rs))
