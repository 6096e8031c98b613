"""Run configuration: INI-style text with typed, validated access.

Sections and keys (expression values are double-quoted)::

    [problem]
    kind = product_flow | prescribed_mc | weighted_warped_flow | slice_ode

    [grid]
    dim = 1                  # 1 or 2
    resolution = 256         # per axis: "256" or "256 128"
    period = 6.283185307179586
    sigma = 1.0              # "s11" (1-d) or "s11 s12 s22" (2-d)

    [data]
    h = "-u"                 # product_flow
    g = "0"                  # product_flow
    f = "(0.2*sin(x1) - u)/cosh(u)"   # prescribed_mc
    phi = "cosh(u)"          # prescribed_mc / weighted / slice_ode
    domain = -2.5 2.5        # profile domain
    anchor = 0.0             # optional transform anchor
    slab = -1.0 1.0          # barrier slab (a b for the weighted flow)
    u_init = "0.3 + 0.1*sin(x1)"
    r0 = 0.5                 # slice_ode
    n = 1                    # slice dimension factor (slice_ode)

    [integrator]
    cfl = 0.4
    tol = 1e-8
    t_max = 200.0
    max_steps = 50000000
    sample_stride = 50
    dt = 0.001               # slice_ode step
    t_end = 2.0              # slice_ode horizon

    [output]
    out_dir = runs/demo

Scalar keys can be overridden on the command line with
``--set section.key=value``.  Emission is canonical: fixed section and key
order, floats rendered with repr, so emit -> parse round-trips exactly.
"""

from __future__ import annotations

import configparser
import io
import math

import numpy as np

from . import expressions
from .grid import PeriodicGrid, ScalarField


class ConfigError(ValueError):
    pass


KINDS = ("product_flow", "prescribed_mc", "weighted_warped_flow", "slice_ode")

# section -> key -> type tag: str | expr | float | int | floats
_SCHEMA = {
    "problem": {"kind": "str"},
    "grid": {"dim": "int", "resolution": "ints", "period": "floats", "sigma": "floats"},
    "data": {
        "h": "expr", "g": "expr", "f": "expr", "phi": "expr",
        "domain": "floats", "anchor": "float", "slab": "floats",
        "u_init": "expr", "r0": "float", "n": "int",
    },
    "integrator": {
        "cfl": "float", "tol": "float", "t_max": "float", "max_steps": "int",
        "sample_stride": "int", "dt": "float", "t_end": "float",
    },
    "output": {"out_dir": "str"},
}

_DEFAULTS = {
    ("grid", "period"): repr(2 * math.pi),
    ("grid", "sigma"): "",  # identity
    ("integrator", "cfl"): "0.4",
    ("integrator", "tol"): "1e-08",
    ("integrator", "t_max"): "200.0",
    ("integrator", "max_steps"): "50000000",
    ("integrator", "sample_stride"): "50",
    ("data", "n"): "1",
}


class RunConfig:
    """Raw key/value store plus typed accessors and builders."""

    def __init__(self, values: dict):
        self.values = {}
        for (section, key), raw in values.items():
            if section not in _SCHEMA or key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")
            self.values[(section, key)] = raw

    # -- parsing / emission ---------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"bad config syntax: {exc}") from exc
        values = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                values[(section, key)] = raw.strip()
        return cls(values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def emit(self) -> str:
        out = io.StringIO()
        for section in _SCHEMA:
            keys = [k for k in _SCHEMA[section] if (section, k) in self.values]
            if not keys:
                continue
            out.write(f"[{section}]\n")
            for key in keys:
                out.write(f"{key} = {self.values[(section, key)]}\n")
            out.write("\n")
        return out.getvalue()

    def apply_override(self, assignment: str):
        """Apply one ``section.key=value`` command-line override."""
        head, sep, value = assignment.partition("=")
        if not sep:
            raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
        section, dot, key = head.strip().partition(".")
        if not dot:
            raise ConfigError(f"override target {head!r} is not of the form section.key")
        section, key = section.strip(), key.strip()
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown config key [{section}] {key}")
        self.values[(section, key)] = value.strip()

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    # -- typed access -----------------------------------------------------------

    def _raw(self, section, key, required=True):
        if (section, key) in self.values:
            return self.values[(section, key)]
        if (section, key) in _DEFAULTS:
            return _DEFAULTS[(section, key)]
        if required:
            raise ConfigError(f"missing required config key [{section}] {key}")
        return None

    def get_str(self, section, key, required=True):
        return self._raw(section, key, required)

    def get_int(self, section, key, required=True):
        raw = self._raw(section, key, required)
        if raw is None:
            return None
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from exc

    def get_float(self, section, key, required=True):
        raw = self._raw(section, key, required)
        if raw is None:
            return None
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from exc

    def get_floats(self, section, key, count=None, required=True):
        raw = self._raw(section, key, required)
        if raw is None:
            return None
        try:
            vals = [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: not numbers: {raw!r}") from exc
        if count is not None and len(vals) != count:
            raise ConfigError(f"[{section}] {key}: expected {count} values, got {len(vals)}")
        return vals

    def get_ints(self, section, key, required=True):
        vals = self.get_floats(section, key, required=required)
        if vals is None:
            return None
        return [int(v) for v in vals]

    def get_expr(self, section, key, required=True):
        raw = self._raw(section, key, required)
        if raw is None:
            return None
        text = raw
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            text = text[1:-1]
        try:
            return expressions.parse(text)
        except expressions.ParseError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc

    # -- builders ---------------------------------------------------------------

    @property
    def kind(self):
        k = self.get_str("problem", "kind")
        if k not in KINDS:
            raise ConfigError(f"[problem] kind must be one of {', '.join(KINDS)}; got {k!r}")
        return k

    def build_grid(self) -> PeriodicGrid:
        dim = self.get_int("grid", "dim")
        if dim not in (1, 2):
            raise ConfigError(f"[grid] dim must be 1 or 2, got {dim}")
        res = self.get_ints("grid", "resolution")
        if len(res) == 1:
            res = res * dim
        if len(res) != dim:
            raise ConfigError(f"[grid] resolution: expected {dim} values, got {len(res)}")
        period = self.get_floats("grid", "period")
        if len(period) == 1:
            period = period * dim
        sigma_vals = self.get_floats("grid", "sigma", required=False) or []
        if not sigma_vals:
            sigma = np.eye(dim)
        elif dim == 1:
            if len(sigma_vals) != 1:
                raise ConfigError("[grid] sigma: expected one value for dim=1")
            sigma = np.array([[sigma_vals[0]]])
        else:
            if len(sigma_vals) != 3:
                raise ConfigError("[grid] sigma: expected 's11 s12 s22' for dim=2")
            s11, s12, s22 = sigma_vals
            sigma = np.array([[s11, s12], [s12, s22]])
        try:
            return PeriodicGrid(dim, res, period, sigma)
        except ValueError as exc:
            raise ConfigError(f"[grid]: {exc}") from exc

    def build_initial(self, grid) -> ScalarField:
        expr = self.get_expr("data", "u_init")
        allowed = {f"x{a + 1}" for a in range(grid.dim)}
        extra = expr.free_vars() - allowed
        if extra:
            raise ConfigError(f"[data] u_init mentions {sorted(extra)} on a {grid.dim}-d grid")
        return grid.field_from_expr(expr)

    def build_profile(self):
        from .profiles import ProfileError, WarpedProfile

        phi = self.get_expr("data", "phi")
        domain = self.get_floats("data", "domain", count=2)
        anchor = self.get_float("data", "anchor", required=False)
        try:
            return WarpedProfile(phi, domain, anchor)
        except ProfileError as exc:
            raise ConfigError(f"[data] phi: {exc}") from exc

    def slab(self):
        vals = self.get_floats("data", "slab", count=2)
        if not vals[0] < vals[1]:
            raise ConfigError(f"[data] slab: need lo < hi, got {vals}")
        return tuple(vals)
