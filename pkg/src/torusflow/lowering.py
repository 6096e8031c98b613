"""Lowering of flow right-hand sides to a flat block program.

A flow step evaluates, per node, a fixed stencil contraction plus a
"reaction" built from the prescribed data.  The reaction is lowered once
per run into a tape of block operations over node-length registers:

* constant subtrees fold into preloaded constant registers,
* x-only subtrees are evaluated once on the grid and preloaded,
* height-only subtrees become cubic Hermite table lookups (mandatory when
  the height enters through the inverse transform; otherwise only when a
  state range is known and the subtree contains a transcendental call),
* the remaining mixed skeleton becomes arithmetic ops.

Both execution backends (the compiled kernel and the numpy twin) interpret
the same tape, so they differ only in arithmetic ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import Expr, FUNCTIONS
from .profiles import CurveTable, WarpedProfile

OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_DIV = 3
OP_NEG = 4
OP_SIN = 5
OP_COS = 6
OP_SINH = 7
OP_COSH = 8
OP_TANH = 9
OP_EXP = 10
OP_LOG = 11
OP_TABLE = 12

_FUNC_OPS = {
    "sin": OP_SIN, "cos": OP_COS, "sinh": OP_SINH, "cosh": OP_COSH,
    "tanh": OP_TANH, "exp": OP_EXP, "log": OP_LOG,
}

REG_STATE = 0
REG_OMEGA = 1

MODE_PRODUCT = 0
MODE_WEIGHTED = 1


@dataclass
class StencilParams:
    """Grid constants consumed by the stencil pass."""

    dim: int
    shape: tuple
    spacing: tuple
    metric_inv: np.ndarray  # (dim, dim)

    @classmethod
    def from_grid(cls, grid):
        return cls(grid.dim, grid.shape, tuple(float(s) for s in grid.spacing), grid.metric_inv)

    @property
    def node_count(self):
        n = 1
        for s in self.shape:
            n *= s
        return n


@dataclass
class Tape:
    n_regs: int
    ops: np.ndarray
    dst: np.ndarray
    a: np.ndarray
    b: np.ndarray
    const_preload: list = field(default_factory=list)  # (reg, float)
    leaf_preload: list = field(default_factory=list)   # (reg, flat ndarray)
    tables: list = field(default_factory=list)         # CurveTable
    result: int = -1                                   # register holding the reaction


class _Lowerer:
    def __init__(self, grid, height_map=None, state_span=None):
        self.grid = grid
        self.coord_subs = {f"x{a + 1}": c for a, c in enumerate(grid.coords())}
        self.height_map: WarpedProfile | None = height_map
        self.state_span = state_span
        self.instrs = []
        self.const_preload = []
        self.leaf_preload = []
        self.tables = []
        self.n_regs = 2
        self._expr_memo = {}
        self._const_memo = {}
        self._u_reg = None

    def new_reg(self):
        r = self.n_regs
        self.n_regs += 1
        return r

    def const(self, v):
        v = float(v)
        if v not in self._const_memo:
            r = self.new_reg()
            self.const_preload.append((r, v))
            self._const_memo[v] = r
        return self._const_memo[v]

    def leaf(self, arr):
        r = self.new_reg()
        self.leaf_preload.append((r, np.ascontiguousarray(arr, dtype=float).reshape(-1)))
        return r

    def op(self, opcode, a, b=-1):
        r = self.new_reg()
        self.instrs.append((opcode, r, a, b))
        return r

    def table(self, curve: CurveTable, src):
        self.tables.append(curve)
        return self.op(OP_TABLE, src, len(self.tables) - 1)

    def height_reg(self):
        """Register holding the physical height (through the inverse map if any)."""
        if self._u_reg is None:
            if self.height_map is None:
                self._u_reg = REG_STATE
            else:
                self._u_reg = self.table(self.height_map.inverse_table(), REG_STATE)
        return self._u_reg

    # -- expression lowering -------------------------------------------------

    def _has_transcendental(self, e):
        if e.kind in FUNCTIONS:
            return True
        return any(self._has_transcendental(a) for a in e.args)

    def emit(self, e: Expr):
        if e in self._expr_memo:
            return self._expr_memo[e]
        fv = e.free_vars()
        if not fv:
            reg = self.const(e.evaluate())
        elif "u" not in fv:
            reg = self.leaf(np.broadcast_to(
                np.asarray(e.evaluate(**self.coord_subs), dtype=float), self.grid.shape))
        elif fv == {"u"}:
            reg = self._emit_height_only(e)
        else:
            reg = self._emit_structural(e)
        self._expr_memo[e] = reg
        return reg

    def _emit_height_only(self, e):
        if e.kind == "var":
            return self.height_reg()
        if self.height_map is not None:
            return self.table(self.height_map.composed_table(e), REG_STATE)
        if self.state_span is not None and self._has_transcendental(e):
            lo, hi = self.state_span
            pad = 0.25 * (hi - lo)
            xs_lo, xs_hi = lo - pad, hi + pad
            xs = np.linspace(xs_lo, xs_hi, 4097)
            vals = np.asarray(e.evaluate(u=xs), dtype=float)
            ders = np.asarray(e.diff("u").evaluate(u=xs), dtype=float)
            curve = CurveTable(xs_lo, xs_hi, np.broadcast_to(vals, xs.shape),
                               np.broadcast_to(ders, xs.shape))
            return self.table(curve, REG_STATE)
        return self._emit_structural(e)

    def _emit_structural(self, e):
        k = e.kind
        if k == "const":
            return self.const(e.value)
        if k == "var":
            if e.value == "u":
                return self.height_reg()
            return self.leaf(np.broadcast_to(
                np.asarray(self.coord_subs[e.value], dtype=float), self.grid.shape))
        if k in ("+", "-", "*", "/"):
            a = self.emit(e.args[0])
            b = self.emit(e.args[1])
            return self.op({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[k], a, b)
        if k == "pow":
            base = self.emit(e.args[0])
            n = e.value
            if n < 0:
                pos = self._emit_pow(base, -n)
                return self.op(OP_DIV, self.const(1.0), pos)
            return self._emit_pow(base, n)
        if k in _FUNC_OPS:
            return self.op(_FUNC_OPS[k], self.emit(e.args[0]))
        raise ValueError(f"cannot lower node kind {k!r}")

    def _emit_pow(self, base, n):
        # exponentiation by squaring over registers
        result = None
        sq = base
        while n > 0:
            if n & 1:
                result = sq if result is None else self.op(OP_MUL, result, sq)
            n >>= 1
            if n:
                sq = self.op(OP_MUL, sq, sq)
        return result

    def build(self, result_reg):
        m = len(self.instrs)
        ops = np.zeros(m, dtype=np.int32)
        dst = np.zeros(m, dtype=np.int32)
        a = np.zeros(m, dtype=np.int32)
        b = np.zeros(m, dtype=np.int32)
        for i, (o, d, x, y) in enumerate(self.instrs):
            ops[i], dst[i], a[i], b[i] = o, d, x, y
        return Tape(
            self.n_regs, ops, dst, a, b,
            self.const_preload, self.leaf_preload, self.tables,
            result_reg if result_reg is not None else -1,
        )


def lower_product_reaction(grid, h: Expr | None, g: Expr | None,
                           height_map: WarpedProfile | None = None,
                           state_span=None) -> Tape:
    """Tape for the reaction h + g*omega of the product-form flow.

    With ``height_map`` set, h and g are expressions in the physical height
    and the state is the transformed height; every height-only piece then
    goes through composition tables.
    """
    lw = _Lowerer(grid, height_map, state_span)
    h_reg = None if h is None or h.is_const(0.0) else lw.emit(h)
    g_reg = None if g is None or g.is_const(0.0) else lw.emit(g)
    result = None
    if g_reg is not None:
        result = lw.op(OP_MUL, g_reg, REG_OMEGA)
    if h_reg is not None:
        result = h_reg if result is None else lw.op(OP_ADD, h_reg, result)
    return lw.build(result)


def lower_weighted_reaction(grid, profile: WarpedProfile, n: int) -> Tape:
    """Tape for the reaction -n*phi'(height)/omega of the weighted flow."""
    lw = _Lowerer(grid, height_map=profile)
    w_reg = lw.table(profile.composed_table(profile.d_expr), REG_STATE)
    scaled = lw.op(OP_MUL, w_reg, lw.const(-float(n)))
    result = lw.op(OP_DIV, scaled, REG_OMEGA)
    return lw.build(result)
