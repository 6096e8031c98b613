# Compiled stepping kernel: stencil contraction + block-tape interpreter + RK2.
# Mirrors numpy_backend semantics; selected at import when built.

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, sinh, cosh, tanh, exp, log

cnp.import_array()

DEF OP_ADD = 0
DEF OP_SUB = 1
DEF OP_MUL = 2
DEF OP_DIV = 3
DEF OP_NEG = 4
DEF OP_SIN = 5
DEF OP_COS = 6
DEF OP_SINH = 7
DEF OP_COSH = 8
DEF OP_TANH = 9
DEF OP_EXP = 10
DEF OP_LOG = 11
DEF OP_TABLE = 12

DEF STATUS_OK = 0
DEF STATUS_TABLE_RANGE = 2


cdef class CompiledWorkspace:
    cdef int dim, n1, n2, nn, mode, n_instr, result_reg
    cdef double inv2dx1, invdx1sq, inv2dx2, invdx2sq, inv4dxdy
    cdef double s11, s12, s22
    cdef double[:, ::1] regs
    cdef double[::1] contraction, k1buf, k2buf, midbuf
    cdef int[::1] ops, dst, aa, bb
    cdef int[::1] ip1, im1, ip2, im2
    cdef double[::1] tab_lo, tab_istep, tab_step
    cdef int[::1] tab_off, tab_last
    cdef double[::1] tab_vals, tab_ders
    cdef int fault

    def __init__(self, stencil, mode, tape):
        cdef int i
        self.dim = stencil.dim
        self.mode = mode
        self.n1 = stencil.shape[0]
        self.n2 = stencil.shape[1] if stencil.dim == 2 else 1
        self.nn = self.n1 * self.n2
        dx1 = stencil.spacing[0]
        self.inv2dx1 = 1.0 / (2.0 * dx1)
        self.invdx1sq = 1.0 / (dx1 * dx1)
        inv = np.asarray(stencil.metric_inv, dtype=float)
        self.s11 = inv[0, 0]
        if stencil.dim == 2:
            dx2 = stencil.spacing[1]
            self.inv2dx2 = 1.0 / (2.0 * dx2)
            self.invdx2sq = 1.0 / (dx2 * dx2)
            self.inv4dxdy = 1.0 / (4.0 * dx1 * dx2)
            self.s12 = inv[0, 1]
            self.s22 = inv[1, 1]
        else:
            self.inv2dx2 = self.invdx2sq = self.inv4dxdy = 0.0
            self.s12 = self.s22 = 0.0

        self.ip1 = (np.arange(1, self.n1 + 1) % self.n1).astype(np.int32)
        self.im1 = (np.arange(-1, self.n1 - 1) % self.n1).astype(np.int32)
        self.ip2 = (np.arange(1, self.n2 + 1) % self.n2).astype(np.int32)
        self.im2 = (np.arange(-1, self.n2 - 1) % self.n2).astype(np.int32)

        regs = np.zeros((tape.n_regs, self.nn))
        for reg, v in tape.const_preload:
            regs[reg, :] = v
        for reg, arr in tape.leaf_preload:
            regs[reg, :] = arr
        self.regs = regs
        self.n_instr = len(tape.ops)
        self.ops = np.ascontiguousarray(tape.ops, dtype=np.int32)
        self.dst = np.ascontiguousarray(tape.dst, dtype=np.int32)
        self.aa = np.ascontiguousarray(tape.a, dtype=np.int32)
        self.bb = np.ascontiguousarray(tape.b, dtype=np.int32)
        self.result_reg = tape.result

        n_tab = len(tape.tables)
        lo = np.zeros(n_tab)
        istep = np.zeros(n_tab)
        step = np.zeros(n_tab)
        off = np.zeros(n_tab, dtype=np.int32)
        last = np.zeros(n_tab, dtype=np.int32)
        vals = []
        ders = []
        total = 0
        for i, t in enumerate(tape.tables):
            lo[i] = t.lo
            istep[i] = 1.0 / t.step
            step[i] = t.step
            off[i] = total
            last[i] = len(t.values) - 1
            vals.append(np.asarray(t.values, dtype=float))
            ders.append(np.asarray(t.derivs, dtype=float))
            total += len(t.values)
        self.tab_lo = lo
        self.tab_istep = istep
        self.tab_step = step
        self.tab_off = off
        self.tab_last = last
        self.tab_vals = np.concatenate(vals) if vals else np.zeros(1)
        self.tab_ders = np.concatenate(ders) if ders else np.zeros(1)

        self.contraction = np.zeros(self.nn)
        self.k1buf = np.zeros(self.nn)
        self.k2buf = np.zeros(self.nn)
        self.midbuf = np.zeros(self.nn)
        self.fault = -1

    cdef void _stencil(self, double[::1] u) noexcept nogil:
        cdef int i1, i2, j, jp, jm, jpp, jpm, jmp, jmm
        cdef double u1, u2, u11, u22, u12, nd2, om2, up1, up2, g11, g12, g22
        cdef double s11 = self.s11, s12 = self.s12, s22 = self.s22
        cdef double[::1] omega = self.regs[1]
        cdef double[::1] c = self.contraction
        if self.dim == 1:
            for j in range(self.nn):
                jp = self.ip1[j]
                jm = self.im1[j]
                u1 = (u[jp] - u[jm]) * self.inv2dx1
                u11 = (u[jp] - 2.0 * u[j] + u[jm]) * self.invdx1sq
                nd2 = s11 * u1 * u1
                om2 = 1.0 + nd2
                omega[j] = sqrt(om2)
                up1 = s11 * u1
                g11 = s11 - up1 * up1 / om2
                c[j] = g11 * u11
        else:
            for i1 in range(self.n1):
                for i2 in range(self.n2):
                    j = i1 * self.n2 + i2
                    jp = self.ip1[i1] * self.n2 + i2
                    jm = self.im1[i1] * self.n2 + i2
                    jpp = self.ip1[i1] * self.n2 + self.ip2[i2]
                    jpm = self.ip1[i1] * self.n2 + self.im2[i2]
                    jmp = self.im1[i1] * self.n2 + self.ip2[i2]
                    jmm = self.im1[i1] * self.n2 + self.im2[i2]
                    u1 = (u[jp] - u[jm]) * self.inv2dx1
                    u11 = (u[jp] - 2.0 * u[j] + u[jm]) * self.invdx1sq
                    u2 = (u[i1 * self.n2 + self.ip2[i2]] - u[i1 * self.n2 + self.im2[i2]]) * self.inv2dx2
                    u22 = (u[i1 * self.n2 + self.ip2[i2]] - 2.0 * u[j] + u[i1 * self.n2 + self.im2[i2]]) * self.invdx2sq
                    u12 = (u[jpp] - u[jpm] - u[jmp] + u[jmm]) * self.inv4dxdy
                    nd2 = s11 * u1 * u1 + 2.0 * s12 * u1 * u2 + s22 * u2 * u2
                    om2 = 1.0 + nd2
                    omega[j] = sqrt(om2)
                    up1 = s11 * u1 + s12 * u2
                    up2 = s12 * u1 + s22 * u2
                    g11 = s11 - up1 * up1 / om2
                    g12 = s12 - up1 * up2 / om2
                    g22 = s22 - up2 * up2 / om2
                    c[j] = g11 * u11 + 2.0 * g12 * u12 + g22 * u22

    cdef int _run_tape(self) noexcept nogil:
        cdef int i, j, op, d, a, b, k, off, last
        cdef int status = STATUS_OK
        cdef double lo, istep, hstep, x, t, s, s2, s3, v0, v1, d0, d1
        cdef double[:, ::1] regs = self.regs
        cdef int nn = self.nn
        for i in range(self.n_instr):
            op = self.ops[i]
            d = self.dst[i]
            a = self.aa[i]
            b = self.bb[i]
            if op == OP_ADD:
                for j in range(nn):
                    regs[d, j] = regs[a, j] + regs[b, j]
            elif op == OP_SUB:
                for j in range(nn):
                    regs[d, j] = regs[a, j] - regs[b, j]
            elif op == OP_MUL:
                for j in range(nn):
                    regs[d, j] = regs[a, j] * regs[b, j]
            elif op == OP_DIV:
                for j in range(nn):
                    regs[d, j] = regs[a, j] / regs[b, j]
            elif op == OP_NEG:
                for j in range(nn):
                    regs[d, j] = -regs[a, j]
            elif op == OP_SIN:
                for j in range(nn):
                    regs[d, j] = sin(regs[a, j])
            elif op == OP_COS:
                for j in range(nn):
                    regs[d, j] = cos(regs[a, j])
            elif op == OP_SINH:
                for j in range(nn):
                    regs[d, j] = sinh(regs[a, j])
            elif op == OP_COSH:
                for j in range(nn):
                    regs[d, j] = cosh(regs[a, j])
            elif op == OP_TANH:
                for j in range(nn):
                    regs[d, j] = tanh(regs[a, j])
            elif op == OP_EXP:
                for j in range(nn):
                    regs[d, j] = exp(regs[a, j])
            elif op == OP_LOG:
                for j in range(nn):
                    regs[d, j] = log(regs[a, j])
            elif op == OP_TABLE:
                lo = self.tab_lo[b]
                istep = self.tab_istep[b]
                hstep = self.tab_step[b]
                off = self.tab_off[b]
                last = self.tab_last[b]
                for j in range(nn):
                    x = regs[a, j]
                    t = (x - lo) * istep
                    if not (t >= 0.0 and t <= last):
                        status = STATUS_TABLE_RANGE
                        self.fault = j
                        t = 0.0 if not (t > 0.0) else <double> last
                    k = <int> t
                    if k > last - 1:
                        k = last - 1
                    s = t - k
                    v0 = self.tab_vals[off + k]
                    v1 = self.tab_vals[off + k + 1]
                    d0 = self.tab_ders[off + k] * hstep
                    d1 = self.tab_ders[off + k + 1] * hstep
                    s2 = s * s
                    s3 = s2 * s
                    regs[d, j] = ((2.0 * s3 - 3.0 * s2 + 1.0) * v0 + (s3 - 2.0 * s2 + s) * d0
                                  + (-2.0 * s3 + 3.0 * s2) * v1 + (s3 - s2) * d1)
        return status

    cdef int _rhs(self, double[::1] u, double[::1] out) noexcept nogil:
        cdef int j, status
        cdef double[:, ::1] regs = self.regs
        self._stencil(u)
        for j in range(self.nn):
            regs[0, j] = u[j]
        status = self._run_tape()
        if self.mode == 0:
            for j in range(self.nn):
                out[j] = self.contraction[j]
        else:
            for j in range(self.nn):
                out[j] = self.contraction[j] / regs[1, j]
        if self.result_reg >= 0:
            for j in range(self.nn):
                out[j] += regs[self.result_reg, j]
        return status

    def rhs(self, double[::1] u, double[::1] out):
        return self._rhs(u, out)

    def advance(self, double[::1] u, int n_steps, double dt):
        cdef int step, j, status
        cdef double half = 0.5 * dt
        with nogil:
            for step in range(n_steps):
                status = self._rhs(u, self.k1buf)
                if status != STATUS_OK:
                    with gil:
                        return status
                for j in range(self.nn):
                    self.midbuf[j] = u[j] + half * self.k1buf[j]
                status = self._rhs(self.midbuf, self.k2buf)
                if status != STATUS_OK:
                    with gil:
                        return status
                for j in range(self.nn):
                    u[j] = u[j] + dt * self.k2buf[j]
        return STATUS_OK

    @property
    def fault_node(self):
        return self.fault
