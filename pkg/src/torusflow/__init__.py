"""Mean-curvature-type flows of graphs over flat tori.

Simulates the normal-speed flow H - h(x,u)<v,dr> + g(x,u) of graphical
hypersurfaces over T^1/T^2, the weighted flow in warped products through
the height transform, and the slice ODE, together with the monitors that
track the quantities controlling convergence (barrier containment,
gradient bound, energy descent, dissipation, decay of the speed).
"""

from .conditions import (
    ConditionReport,
    check_prescribed_curvature_conditions,
    check_weighted_flow_conditions,
    check_product_flow_conditions,
)
from .expressions import EvalError, Expr, ExprError, ParseError, parse
from .flow import (
    FlowProblem,
    FlowTrace,
    dissipation,
    energy,
    rhs_product,
    rhs_weighted,
    run_to_stationary,
    slice_ode_solve,
    step,
)
from .geometry import (
    area_element,
    gradient,
    hessian,
    induced_inverse_metric,
    integrate,
    mean_curvature,
    second_form_norm,
)
from .grid import GridError, PeriodicGrid, ScalarField
from .monitors import (
    MonitorReport,
    comparison_test,
    monitor_barrier,
    monitor_dissipation_identity,
    monitor_dissipation_plateau,
    monitor_energy,
    monitor_gradient,
    monitor_ut_decay,
)
from .profiles import CurveTable, DomainError, ProfileError, WarpedProfile, build_profile
from .warped import (
    WarpedGraph,
    correspondence_residual,
    solve_prescribed_mc,
    to_product,
    to_warped,
    warped_mean_curvature,
    weighted_mcf_run,
)
from .weights import WeightPair, build_weights
from ._kernels import compiled_available, default_backend

__version__ = "0.1.0"

__all__ = [
    "ConditionReport", "check_prescribed_curvature_conditions", "check_weighted_flow_conditions",
    "check_product_flow_conditions",
    "EvalError", "Expr", "ExprError", "ParseError", "parse",
    "FlowProblem", "FlowTrace", "dissipation", "energy", "rhs_product", "rhs_weighted",
    "run_to_stationary", "slice_ode_solve", "step",
    "area_element", "gradient", "hessian", "induced_inverse_metric", "integrate",
    "mean_curvature", "second_form_norm",
    "GridError", "PeriodicGrid", "ScalarField",
    "MonitorReport", "comparison_test", "monitor_barrier", "monitor_dissipation_identity",
    "monitor_dissipation_plateau", "monitor_energy", "monitor_gradient", "monitor_ut_decay",
    "CurveTable", "DomainError", "ProfileError", "WarpedProfile", "build_profile",
    "WarpedGraph", "correspondence_residual", "solve_prescribed_mc", "to_product",
    "to_warped", "warped_mean_curvature", "weighted_mcf_run",
    "WeightPair", "build_weights",
    "compiled_available", "default_backend",
]
