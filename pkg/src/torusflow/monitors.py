"""Executable monitors over flow traces.

Each monitor is a pure function of a trace (same trace, same report) that
turns one of the quantities controlled by the convergence argument into a
falsifiable pass/fail check with a signed margin:

* barrier: the state never reaches the slab endpoints;
* gradient: no late growth of sup omega (1.05x the first-half maximum);
* energy: E nonincreasing up to discretization slack;
* dissipation identity: dE/dt + D vanishes to 5% relative;
* dissipation plateau: the cumulative dissipation stops growing (<1% of the
  total over the final tenth of the run);
* speed decay: sup|u_t| ends below tolerance and decays monotonically
  (10% local slack) after its peak;
* comparison: ordered initial graphs stay ordered under a common schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import FlowProblem, FlowTrace, run_to_stationary
from .grid import ScalarField


@dataclass
class MonitorResult:
    name: str
    passed: bool
    margin: float
    time: float | None = None
    location: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{self.name:<24s} {status} margin={self.margin:.6e}"]
        if self.time is not None:
            parts.append(f"t={self.time:.6e}")
        parts.extend(f"{k}={v}" for k, v in self.location.items())
        return " ".join(parts)


@dataclass
class MonitorReport:
    entries: list

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def to_text(self):
        return "\n".join(e.line() for e in self.entries)

    def to_json_dict(self):
        return {
            "passed": self.passed,
            "monitors": [
                {
                    "name": e.name,
                    "passed": e.passed,
                    "margin": e.margin,
                    "time": e.time,
                    "location": e.location,
                }
                for e in self.entries
            ],
        }


def monitor_barrier(trace: FlowTrace, lo, hi) -> MonitorResult:
    """State strictly inside (lo, hi) at every sample."""
    low_margin = trace.min_u - lo
    high_margin = hi - trace.max_u
    margins = np.minimum(low_margin, high_margin)
    passed = bool(np.all(margins > 0))
    if passed:
        k = int(np.argmin(margins))
    else:
        k = int(np.argmax(margins <= 0))  # first violation time
    node = int(trace.argmin_node[k]) if low_margin[k] <= high_margin[k] else int(trace.argmax_node[k])
    return MonitorResult(
        "barrier", passed, float(margins[k]), float(trace.times[k]), {"node": node}
    )


def monitor_gradient(trace: FlowTrace) -> MonitorResult:
    """sup omega never exceeds 1.05x its maximum over the first half of samples."""
    sup = trace.sup_omega
    half = max(1, (len(sup) + 1) // 2)
    limit = 1.05 * float(sup[:half].max())
    worst = int(np.argmax(sup))
    margin = limit - float(sup[worst])
    return MonitorResult(
        "gradient_bound", margin >= 0, margin, float(trace.times[worst]),
        {"node": int(trace.argmax_omega_node[worst]), "sup_omega": float(sup[worst])},
    )


def _require_weights(trace, name):
    if not trace.has_weights:
        raise ValueError(f"{name} needs a trace with energy weights (h = h(u))")


def monitor_energy(trace: FlowTrace) -> MonitorResult:
    """E nonincreasing between samples, up to 10*dt*dx^2 slack per step."""
    _require_weights(trace, "monitor_energy")
    e = trace.energy
    if len(e) < 2:
        return MonitorResult("energy_descent", True, 0.0, float(trace.times[-1]))
    steps = np.maximum(np.rint(np.diff(trace.times) / trace.dt), 1.0)
    # smallest spacing on the trace's grid
    dx2 = min(trace.initial.grid.spacing) ** 2
    slack = 10.0 * trace.dt * dx2 * steps
    rise = np.diff(e) - slack
    worst = int(np.argmax(rise))
    margin = -float(rise[worst])
    return MonitorResult(
        "energy_descent", margin >= 0, margin, float(trace.times[worst + 1]),
        {"dE": float(np.diff(e)[worst])},
    )


def monitor_dissipation_identity(trace: FlowTrace, skip=10, rel_tol=0.05) -> MonitorResult:
    """mean |dE/dt + D| after the first ``skip`` samples within 5% of mean D."""
    _require_weights(trace, "monitor_dissipation_identity")
    e, d, t = trace.energy, trace.dissipation, trace.times
    if len(t) < skip + 2:
        value, mean_d, worst_t = 0.0, 0.0, float(t[-1])
    else:
        de = np.diff(e[skip:]) / np.diff(t[skip:])
        dm = 0.5 * (d[skip:-1] + d[skip + 1:])
        resid = np.abs(de + dm)
        value = float(resid.mean())
        mean_d = float(dm.mean())
        worst_t = float(t[skip + 1 + int(np.argmax(resid))])
    threshold = rel_tol * max(mean_d, 1e-12)
    return MonitorResult(
        "dissipation_identity", value <= threshold, threshold - value, worst_t,
        {"mean_residual": value, "threshold": threshold},
    )


def monitor_dissipation_plateau(trace: FlowTrace, window=0.1, rel_tol=0.01) -> MonitorResult:
    """Cumulative dissipation grows < 1% of its total over the final tenth of the run."""
    _require_weights(trace, "monitor_dissipation_plateau")
    t, cum = trace.times, trace.cumulative_dissipation
    total = float(cum[-1])
    if total <= 0 or t[-1] <= 0:
        return MonitorResult("dissipation_plateau", True, rel_tol, float(t[-1]))
    t_cut = (1.0 - window) * t[-1]
    tail = total - float(np.interp(t_cut, t, cum))
    frac = tail / total
    return MonitorResult(
        "dissipation_plateau", frac < rel_tol, rel_tol - frac, float(t[-1]),
        {"tail_fraction": frac},
    )


def monitor_ut_decay(trace: FlowTrace, tol=None, local_slack=0.10) -> MonitorResult:
    """Final sup|u_t| below tol; nonincreasing after its peak up to 10% slack."""
    tol = trace.tol if tol is None else tol
    sup = trace.sup_ut
    final = float(sup[-1])
    peak = int(np.argmax(sup))
    seq = sup[peak:]
    ratios = seq[1:] / np.maximum(seq[:-1], 1e-300)
    monotone = bool(np.all(ratios <= 1.0 + local_slack)) if len(seq) > 1 else True
    passed = final < tol and monotone
    loc = {"final_sup_ut": final}
    if not monotone:
        k = int(np.argmax(ratios > 1.0 + local_slack))
        loc["first_growth_t"] = float(trace.times[peak + 1 + k])
    return MonitorResult("speed_decay", passed, tol - final, float(trace.times[-1]), loc)


def comparison_test(problem: FlowProblem, u_low_init: ScalarField,
                    u_high_init: ScalarField, tol=1e-8, t_max=200.0,
                    **run_kwargs) -> MonitorResult:
    """Run two copies of ``problem`` from ordered initial data; they must stay ordered.

    Initial data are given in the problem's physical height coordinates and
    must satisfy low < high at every node.  Both runs use the identical step
    size (same grid, same CFL); ordering is checked at every common sample.
    """
    gap0 = u_high_init.values - u_low_init.values
    if not np.all(gap0 > 0):
        raise ValueError("initial graphs are not pointwise disjoint (need low < high everywhere)")
    low = _with_initial_height(problem, u_low_init)
    high = _with_initial_height(problem, u_high_init)
    tr_low = run_to_stationary(low, tol=tol, t_max=t_max, store_fields=True, **run_kwargs)
    tr_high = run_to_stationary(high, tol=tol, t_max=t_max, store_fields=True, **run_kwargs)
    m = min(len(tr_low.fields), len(tr_high.fields))
    worst = np.inf
    worst_k = 0
    worst_node = 0
    for k in range(m):
        gap = tr_high.fields[k] - tr_low.fields[k]
        j = int(np.argmin(gap))
        if gap[j] < worst:
            worst, worst_k, worst_node = float(gap[j]), k, j
    return MonitorResult(
        "comparison", worst > 0, worst, float(tr_low.times[worst_k]), {"node": worst_node}
    )


def _with_initial_height(problem: FlowProblem, height: ScalarField) -> FlowProblem:
    from .flow import KIND_WEIGHTED

    if problem.kind == KIND_WEIGHTED:
        lo, hi = problem.profile.domain
        a = problem.profile.inverse(problem.slab[0])
        b = problem.profile.inverse(problem.slab[1])
        return FlowProblem.weighted(problem.grid, problem.profile, a, b, height)
    if problem.height_map is not None:
        state = ScalarField(problem.grid, problem.height_map.transform(height.values))
        return FlowProblem(problem.kind, problem.grid, state, h=problem.h, g=problem.g,
                           profile=problem.profile, height_map=problem.height_map,
                           slab=problem.slab)
    return FlowProblem(problem.kind, problem.grid, height, h=problem.h, g=problem.g,
                       profile=problem.profile, slab=problem.slab)


def run_monitors(trace: FlowTrace, tol=None) -> MonitorReport:
    """The standard monitor set for a trace (barrier needs a slab on the problem)."""
    from .flow import KIND_PRODUCT

    entries = []
    if trace.slab is not None:
        entries.append(monitor_barrier(trace, *trace.slab))
    entries.append(monitor_gradient(trace))
    if trace.has_weights:
        entries.append(monitor_energy(trace))
        if trace.kind == KIND_PRODUCT:
            entries.append(monitor_dissipation_identity(trace))
        entries.append(monitor_dissipation_plateau(trace))
    entries.append(monitor_ut_decay(trace, tol))
    return MonitorReport(entries)
