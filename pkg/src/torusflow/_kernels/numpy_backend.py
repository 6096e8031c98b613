"""Pure-numpy twin of the compiled stepping kernel.

Interprets the same lowered tape as the Cython core, with whole-field numpy
ops per instruction.  Kept allocation-light: registers and stencil scratch
are preallocated once per workspace.
"""

from __future__ import annotations

import numpy as np

from ..lowering import (
    MODE_PRODUCT,
    OP_ADD, OP_COS, OP_COSH, OP_DIV, OP_EXP, OP_LOG, OP_MUL, OP_NEG,
    OP_SIN, OP_SINH, OP_SUB, OP_TABLE, OP_TANH,
    REG_OMEGA, REG_STATE,
)

STATUS_OK = 0
STATUS_TABLE_RANGE = 2

_UNARY = {
    OP_NEG: np.negative, OP_SIN: np.sin, OP_COS: np.cos, OP_SINH: np.sinh,
    OP_COSH: np.cosh, OP_TANH: np.tanh, OP_EXP: np.exp, OP_LOG: np.log,
}
_BINARY = {OP_ADD: np.add, OP_SUB: np.subtract, OP_MUL: np.multiply, OP_DIV: np.divide}


class NumpyWorkspace:
    def __init__(self, stencil, mode, tape):
        self.stencil = stencil
        self.mode = mode
        self.tape = tape
        nn = stencil.node_count
        self.nn = nn
        self.regs = np.zeros((tape.n_regs, nn))
        for reg, v in tape.const_preload:
            self.regs[reg].fill(v)
        for reg, arr in tape.leaf_preload:
            self.regs[reg][:] = arr
        self.tables = [
            (t.lo, t.step, np.asarray(t.values), np.asarray(t.derivs)) for t in tape.tables
        ]
        self._contraction = np.zeros(nn)
        self._k1 = np.zeros(nn)
        self._k2 = np.zeros(nn)
        self._mid = np.zeros(nn)
        self._status_node = -1

    # -- stencil pass --------------------------------------------------------

    def _stencil(self, u_flat):
        """Fill the contraction buffer and the omega register."""
        st = self.stencil
        shape = st.shape
        inv = st.metric_inv
        u = u_flat.reshape(shape)
        out = self._contraction.reshape(shape)
        omega = self.regs[REG_OMEGA].reshape(shape)
        if st.dim == 1:
            dx = st.spacing[0]
            up = np.roll(u, -1)
            um = np.roll(u, 1)
            u1 = (up - um) / (2 * dx)
            u11 = (up - 2 * u + um) / dx**2
            s11 = inv[0, 0]
            nd2 = s11 * u1 * u1
            om2 = 1.0 + nd2
            np.sqrt(om2, out=omega)
            upc = s11 * u1
            g11 = s11 - upc * upc / om2
            np.multiply(g11, u11, out=out)
        else:
            dx, dy = st.spacing
            ux_p = np.roll(u, -1, axis=0)
            ux_m = np.roll(u, 1, axis=0)
            uy_p = np.roll(u, -1, axis=1)
            uy_m = np.roll(u, 1, axis=1)
            u1 = (ux_p - ux_m) / (2 * dx)
            u2 = (uy_p - uy_m) / (2 * dy)
            u11 = (ux_p - 2 * u + ux_m) / dx**2
            u22 = (uy_p - 2 * u + uy_m) / dy**2
            u12 = (
                np.roll(ux_p, -1, axis=1) - np.roll(ux_p, 1, axis=1)
                - np.roll(ux_m, -1, axis=1) + np.roll(ux_m, 1, axis=1)
            ) / (4 * dx * dy)
            s11, s12, s22 = inv[0, 0], inv[0, 1], inv[1, 1]
            nd2 = s11 * u1 * u1 + 2 * s12 * u1 * u2 + s22 * u2 * u2
            om2 = 1.0 + nd2
            np.sqrt(om2, out=omega)
            up1 = s11 * u1 + s12 * u2
            up2 = s12 * u1 + s22 * u2
            g11 = s11 - up1 * up1 / om2
            g12 = s12 - up1 * up2 / om2
            g22 = s22 - up2 * up2 / om2
            out[:] = g11 * u11 + 2 * g12 * u12 + g22 * u22

    # -- tape ----------------------------------------------------------------

    def _run_tape(self):
        regs = self.regs
        t = self.tape
        status = STATUS_OK
        for i in range(len(t.ops)):
            op, d, a, b = t.ops[i], t.dst[i], t.a[i], t.b[i]
            if op == OP_TABLE:
                lo, step, vals, ders = self.tables[b]
                x = regs[a]
                tt = (x - lo) / step
                n_last = len(vals) - 1.0
                bad = ~((tt >= 0.0) & (tt <= n_last))
                if bad.any():
                    status = STATUS_TABLE_RANGE
                    self._status_node = int(np.argmax(bad))
                    tt = np.clip(np.nan_to_num(tt, nan=0.0), 0.0, n_last)
                k = np.minimum(tt.astype(int), len(vals) - 2)
                s = tt - k
                v0, v1 = vals[k], vals[k + 1]
                d0, d1 = ders[k] * step, ders[k + 1] * step
                s2 = s * s
                s3 = s2 * s
                regs[d][:] = (
                    (2 * s3 - 3 * s2 + 1) * v0 + (s3 - 2 * s2 + s) * d0
                    + (-2 * s3 + 3 * s2) * v1 + (s3 - s2) * d1
                )
            elif op in _BINARY:
                _BINARY[op](regs[a], regs[b], out=regs[d])
            else:
                with np.errstate(invalid="ignore", divide="ignore"):
                    _UNARY[op](regs[a], out=regs[d])
        return status

    # -- public --------------------------------------------------------------

    def rhs(self, u_flat, out):
        """Right-hand side into ``out``; returns a status code."""
        self._stencil(u_flat)
        self.regs[REG_STATE][:] = u_flat
        status = self._run_tape()
        if self.mode == MODE_PRODUCT:
            out[:] = self._contraction
        else:
            np.divide(self._contraction, self.regs[REG_OMEGA], out=out)
        if self.tape.result >= 0:
            out += self.regs[self.tape.result]
        return status

    def advance(self, u_flat, n_steps, dt):
        """RK2 midpoint steps in place; stops early on a table-range fault."""
        for _ in range(n_steps):
            status = self.rhs(u_flat, self._k1)
            if status != STATUS_OK:
                return status
            np.multiply(self._k1, 0.5 * dt, out=self._mid)
            self._mid += u_flat
            status = self.rhs(self._mid, self._k2)
            if status != STATUS_OK:
                return status
            self._k2 *= dt
            u_flat += self._k2
        return STATUS_OK

    @property
    def fault_node(self):
        return self._status_node
