# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; a statement-for-statement port of ``_pykernels``.

Cycle loops run without the GIL so simulation workers scale across cores.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t
from posix.time cimport clock_gettime, nanosleep, timespec, CLOCK_MONOTONIC

cnp.import_array()

BACKEND = "cython"

cdef uint32_t SAT = 0xFFFFFFFF
cdef uint64_t M32 = 0xFFFFFFFF

# ---------------------------------------------------------------- periph-fsm
cdef enum:
    P_CTRL = 0
    P_PRESC = 1
    P_TXR = 2
    P_RXR = 3
    P_FSM = 4
    P_TICKS = 5
    P_DIR = 6
    P_WB = 7
    P_RB = 8
    P_IF = 9
    P_BUG = 10
    P_RXVALID = 11
    P_AL = 12
    P_RXACK = 13
    P_MACK = 14
    P_SCRATCH = 16

cdef enum:
    IDLE = 0
    START = 1
    ADDR = 2
    ADDR_ACK = 3
    WRITE = 4
    READ = 5
    HOLD = 6
    RESTART = 7
    STOP = 8
    ERROR = 9

cdef enum:
    PC_WR = 0
    PC_RD = 16
    PC_STATE = 32
    PC_ABORT = 42
    PC_TXR_BUSY = 43
    PC_RXR_FRESH = 44
    PC_RXR_STALE = 45
    PC_STATUS_BUSY = 46
    PC_CMD_DISABLED = 47
    PC_IACK = 48
    PC_IACK_SPURIOUS = 49
    PC_CMD_BUSY = 50
    PC_ARB_LOST = 51
    PC_CMD_NOSTART = 52
    PC_START_NOCLK = 53
    PC_TICKS = 54
    PC_RESTART_W2R = 58
    PC_RESTART_R2W = 59
    PC_RESTART_SAME = 60
    PC_ERR_WR = 61
    PC_ERR_RD = 62
    PC_ERR_RECOVER = 63
    PC_ERR_IGNORED = 64
    PC_ADDR_BUCKET = 65
    PC_ADDR_ACK = 73
    PC_ADDR_NACK = 74
    PC_DATA_NACK = 75
    PC_WBURST = 76
    PC_RBURST = 84
    PC_WDATA = 92
    PC_RDATA = 95
    PC_MASTER_ACK = 98
    PC_MASTER_NACK = 99
    PC_RX_OVERRUN = 100
    PC_STOP_DONE = 101
    PC_MIXED = 102
    PC_IRQ = 103
    PC_IF_NOIRQ = 104
    PC_PRESC_BUSY = 105
    PC_DISABLE_HOLD = 106
    PC_STOP_IF_PENDING = 107
    PC_SCRATCH_NZ = 108


cdef inline void inc(uint32_t[::1] cv, Py_ssize_t i) noexcept nogil:
    if cv[i] != SAT:
        cv[i] += 1


cdef inline bint p_busy(int64_t fsm) noexcept nogil:
    return fsm != IDLE and fsm != HOLD and fsm != ERROR


cdef inline void p_enter(int64_t[::1] s, uint32_t[::1] cv, int64_t state) noexcept nogil:
    s[P_FSM] = state
    inc(cv, PC_STATE + state)
    if p_busy(state):
        s[P_TICKS] = (s[P_PRESC] & 3) + 1


cdef inline void p_raise_if(int64_t[::1] s, uint32_t[::1] cv) noexcept nogil:
    s[P_IF] = 1
    if s[P_CTRL] & 2:
        inc(cv, PC_IRQ)
    else:
        inc(cv, PC_IF_NOIRQ)


cdef inline int byte_class(int64_t v) noexcept nogil:
    if v == 0:
        return 0
    if v == 0xFF:
        return 1
    return 2


cdef void p_command(int64_t[::1] s, uint32_t[::1] cv, int64_t c) noexcept nogil:
    cdef int k
    cdef int64_t fsm
    if not (s[P_CTRL] & 1):
        inc(cv, PC_CMD_DISABLED)
        return
    if c & 0x01:
        if s[P_IF]:
            inc(cv, PC_IACK)
            s[P_IF] = 0
        else:
            inc(cv, PC_IACK_SPURIOUS)
    if c & 0x80:
        k = 0
    elif c & 0x40:
        k = 1
    elif c & 0x20:
        k = 2
    elif c & 0x10:
        k = 3
    else:
        return
    fsm = s[P_FSM]
    if p_busy(fsm):
        inc(cv, PC_CMD_BUSY)
        if k == 0:
            inc(cv, PC_ARB_LOST)
            s[P_AL] = 1
            p_enter(s, cv, IDLE)
        return
    if fsm == IDLE:
        if k != 0:
            inc(cv, PC_CMD_NOSTART)
        elif s[P_PRESC] == 0:
            inc(cv, PC_START_NOCLK)
        else:
            inc(cv, PC_TICKS + (s[P_PRESC] & 3))
            s[P_WB] = 0
            s[P_RB] = 0
            s[P_AL] = 0
            p_enter(s, cv, START)
    elif fsm == HOLD:
        if k == 0:
            p_enter(s, cv, RESTART)
        elif k == 1:
            if s[P_IF]:
                inc(cv, PC_STOP_IF_PENDING)
            p_enter(s, cv, STOP)
        elif k == 3:
            if s[P_DIR] == 0:
                p_enter(s, cv, WRITE)
            else:
                inc(cv, PC_ERR_WR)
                p_enter(s, cv, ERROR)
        else:
            if s[P_DIR] == 1:
                s[P_MACK] = (c >> 3) & 1
                p_enter(s, cv, READ)
            else:
                inc(cv, PC_ERR_RD)
                p_enter(s, cv, ERROR)
    else:
        if k == 1:
            inc(cv, PC_ERR_RECOVER)
            p_enter(s, cv, STOP)
        else:
            inc(cv, PC_ERR_IGNORED)


cdef void p_advance(int64_t[::1] s, uint32_t[::1] cv, uint64_t word) noexcept nogil:
    cdef int64_t sda = (word >> 40) & 1
    cdef int64_t fsm = s[P_FSM]
    cdef int64_t newdir, v
    if fsm == START or fsm == RESTART:
        newdir = s[P_TXR] & 1
        if fsm == RESTART:
            if s[P_DIR] == 0 and newdir == 1:
                inc(cv, PC_RESTART_W2R)
            elif s[P_DIR] == 1 and newdir == 0:
                inc(cv, PC_RESTART_R2W)
            else:
                inc(cv, PC_RESTART_SAME)
        s[P_DIR] = newdir
        inc(cv, PC_ADDR_BUCKET + (s[P_TXR] >> 5))
        p_enter(s, cv, ADDR)
    elif fsm == ADDR:
        p_enter(s, cv, ADDR_ACK)
    elif fsm == ADDR_ACK:
        s[P_RXACK] = sda
        p_raise_if(s, cv)
        if sda == 0:
            inc(cv, PC_ADDR_ACK)
            p_enter(s, cv, HOLD)
        else:
            inc(cv, PC_ADDR_NACK)
            p_enter(s, cv, STOP)
    elif fsm == WRITE:
        inc(cv, PC_WDATA + byte_class(s[P_TXR]))
        s[P_RXACK] = sda
        if sda == 0:
            s[P_WB] += 1
            inc(cv, PC_WBURST + (s[P_WB] if s[P_WB] < 8 else 8) - 1)
        else:
            inc(cv, PC_DATA_NACK)
        p_raise_if(s, cv)
        p_enter(s, cv, HOLD)
    elif fsm == READ:
        if s[P_RXVALID]:
            inc(cv, PC_RX_OVERRUN)
        v = (word >> 48) & 0xFF
        s[P_RXR] = v
        s[P_RXVALID] = 1
        inc(cv, PC_RDATA + byte_class(v))
        s[P_RB] += 1
        inc(cv, PC_RBURST + (s[P_RB] if s[P_RB] < 8 else 8) - 1)
        if s[P_MACK]:
            inc(cv, PC_MASTER_NACK)
        else:
            inc(cv, PC_MASTER_ACK)
        p_raise_if(s, cv)
        p_enter(s, cv, HOLD)
    elif fsm == STOP:
        inc(cv, PC_STOP_DONE)
        if s[P_WB] > 0 and s[P_RB] > 0:
            inc(cv, PC_MIXED)
        p_enter(s, cv, IDLE)


cdef void periph_cycle(int64_t[::1] s, uint32_t[::1] cv, uint64_t word) noexcept nogil:
    cdef int64_t op = word & 3
    cdef int64_t addr = (word >> 2) & 15
    cdef int64_t data = (word >> 8) & M32
    cdef int64_t fsm = s[P_FSM]
    cdef bint busy = p_busy(fsm)
    if op == 1:
        inc(cv, PC_WR + addr)
        if addr == 0:
            if (s[P_CTRL] & 1) and not (data & 1):
                if busy:
                    inc(cv, PC_ABORT)
                    p_enter(s, cv, IDLE)
                elif fsm == HOLD or fsm == ERROR:
                    inc(cv, PC_DISABLE_HOLD)
                    p_enter(s, cv, IDLE)
            s[P_CTRL] = data & 3
        elif addr == 1:
            if fsm == HOLD and s[P_DIR] == 1 and s[P_RB] >= 3:
                s[P_BUG] = 1
            if busy:
                inc(cv, PC_PRESC_BUSY)
            s[P_PRESC] = data & 0xFFFF
        elif addr == 2:
            if busy:
                inc(cv, PC_TXR_BUSY)
            s[P_TXR] = data & 0xFF
        elif addr == 4:
            p_command(s, cv, data & 0xFF)
        elif addr >= 6:
            s[P_SCRATCH + addr - 6] = data
    elif op == 2:
        inc(cv, PC_RD + addr)
        if addr == 3:
            if s[P_RXVALID]:
                inc(cv, PC_RXR_FRESH)
                s[P_RXVALID] = 0
            else:
                inc(cv, PC_RXR_STALE)
        elif addr == 5:
            if busy:
                inc(cv, PC_STATUS_BUSY)
        elif addr >= 6:
            if s[P_SCRATCH + addr - 6] != 0:
                inc(cv, PC_SCRATCH_NZ + addr - 6)
    if p_busy(s[P_FSM]):
        s[P_TICKS] -= 1
        if s[P_TICKS] <= 0:
            p_advance(s, cv, word)


def periph_run(const uint64_t[::1] words, int64_t[::1] state, uint32_t[::1] cov):
    cdef Py_ssize_t i, n = words.shape[0]
    with nogil:
        for i in range(n):
            periph_cycle(state, cov, words[i])
    return n


# ------------------------------------------------------------------- toy-cpu
cdef enum:
    C_ACC = 0
    C_FLAGS = 1
    C_SP = 2
    C_SKIP = 3
    C_TRAPPED = 4
    C_LDW_PEND = 5
    C_LDW_LO = 6
    C_TAKEN = 7
    C_WMASK = 8
    C_BUG = 9
    C_RETIRED = 10
    C_MEM = 16
    C_STACK = 32
    FLAG_Z = 1
    FLAG_C = 2
    FLAG_N = 4
    STACK_DEPTH = 8

cdef enum:
    OP_NOP = 0
    OP_LDI = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_AND = 4
    OP_XOR = 5
    OP_SHF = 6
    OP_LD = 7
    OP_ST = 8
    OP_BZ = 9
    OP_BNZ = 10
    OP_BC = 11
    OP_PUSH = 12
    OP_POP = 13
    OP_LDW = 14
    OP_ILL = 15

cdef enum:
    CC_DECODE = 0
    CC_LDI_Z = 16
    CC_LDI_NZ = 17
    CC_ADD_C = 18
    CC_ADD_NC = 19
    CC_ADD_Z = 20
    CC_ADD_N = 21
    CC_SUB_B = 22
    CC_SUB_NB = 23
    CC_SUB_Z = 24
    CC_SUB_N = 25
    CC_AND_Z = 26
    CC_AND_NZ = 27
    CC_XOR_Z = 28
    CC_XOR_NZ = 29
    CC_SHL = 30
    CC_SHR = 31
    CC_SHF_ZERO = 32
    CC_SHF_C = 33
    CC_LD = 34
    CC_LD_WRITTEN = 50
    CC_LD_UNWRITTEN = 51
    CC_ST = 52
    CC_ST_OVERWRITE = 68
    CC_BRANCH = 69
    CC_SKIPLEN = 75
    CC_SKIPPED = 79
    CC_TAKEN = 80
    CC_PUSH = 88
    CC_POP = 96
    CC_OVERFLOW = 104
    CC_UNDERFLOW = 105
    CC_LDW_DONE = 106
    CC_LDW_INT = 107
    CC_LDW_HI = 108
    CC_ILL = 109
    CC_POST_TRAP = 110
    CC_MEMFILL = 111
    CC_NIBBLE = 127
    CC_RETIRED = 143
    TAKEN_LADDER = 8
    RETIRED_STEP = 8
    RETIRED_LADDER = 8


cdef inline void c_result(int64_t[::1] s, uint32_t[::1] cv, int64_t acc) noexcept nogil:
    cdef int64_t flags
    s[C_ACC] = acc
    flags = s[C_FLAGS] & FLAG_C
    if acc == 0:
        flags |= FLAG_Z
    if acc >> 31:
        flags |= FLAG_N
    s[C_FLAGS] = flags
    inc(cv, CC_NIBBLE + (acc >> 28))


cdef inline void c_carry(int64_t[::1] s, int64_t c) noexcept nogil:
    if c:
        s[C_FLAGS] |= FLAG_C
    else:
        s[C_FLAGS] &= ~(<int64_t>FLAG_C)


cdef inline int popcount16(int64_t m) noexcept nogil:
    cdef int n = 0
    while m:
        n += <int>(m & 1)
        m >>= 1
    return n


cdef void cpu_cycle(int64_t[::1] s, uint32_t[::1] cv, uint64_t word) noexcept nogil:
    cdef int64_t op, imm, acc, r, v, borrow, amt, c, a, base
    cdef uint64_t wide
    cdef bint taken
    if s[C_TRAPPED]:
        inc(cv, CC_POST_TRAP)
        return
    if s[C_SKIP] > 0:
        s[C_SKIP] -= 1
        inc(cv, CC_SKIPPED)
        return
    op = word & 15
    imm = (word >> 8) & 0xFFFFFF
    if s[C_LDW_PEND] and op != OP_LDW:
        inc(cv, CC_LDW_INT)
        s[C_LDW_PEND] = 0
    inc(cv, CC_DECODE + op)
    s[C_RETIRED] += 1
    if s[C_RETIRED] % RETIRED_STEP == 0 and s[C_RETIRED] <= RETIRED_STEP * RETIRED_LADDER:
        inc(cv, CC_RETIRED + s[C_RETIRED] // RETIRED_STEP - 1)
    acc = s[C_ACC]
    if op == OP_LDI:
        inc(cv, CC_LDI_Z if imm == 0 else CC_LDI_NZ)
        c_result(s, cv, imm)
    elif op == OP_ADD:
        r = acc + (imm & 0xFFFF)
        c_carry(s, r >> 32)
        inc(cv, CC_ADD_C if r >> 32 else CC_ADD_NC)
        r &= M32
        if r == 0:
            inc(cv, CC_ADD_Z)
        if r >> 31:
            inc(cv, CC_ADD_N)
        c_result(s, cv, r)
    elif op == OP_SUB:
        v = imm & 0xFFFF
        borrow = 1 if v > acc else 0
        c_carry(s, borrow)
        inc(cv, CC_SUB_B if borrow else CC_SUB_NB)
        r = (acc - v) & M32
        if r == 0:
            inc(cv, CC_SUB_Z)
        if r >> 31:
            inc(cv, CC_SUB_N)
        c_result(s, cv, r)
    elif op == OP_AND:
        r = acc & (imm | <int64_t>0xFF000000LL)
        inc(cv, CC_AND_Z if r == 0 else CC_AND_NZ)
        c_result(s, cv, r)
    elif op == OP_XOR:
        r = acc ^ imm
        inc(cv, CC_XOR_Z if r == 0 else CC_XOR_NZ)
        c_result(s, cv, r)
    elif op == OP_SHF:
        amt = imm & 31
        if amt == 0:
            inc(cv, CC_SHF_ZERO)
        if (imm >> 5) & 1:
            inc(cv, CC_SHL)
            wide = (<uint64_t>acc) << amt
            c = 1 if (wide >> 32) != 0 else 0
            r = <int64_t>(wide & M32)
        else:
            inc(cv, CC_SHR)
            c = 1 if (acc & ((<int64_t>1 << amt) - 1)) != 0 else 0
            r = acc >> amt
        c_carry(s, c)
        if c:
            inc(cv, CC_SHF_C)
        c_result(s, cv, r)
    elif op == OP_LD:
        a = imm & 15
        inc(cv, CC_LD + a)
        inc(cv, CC_LD_WRITTEN if (s[C_WMASK] >> a) & 1 else CC_LD_UNWRITTEN)
        c_result(s, cv, s[C_MEM + a])
    elif op == OP_ST:
        a = imm & 15
        inc(cv, CC_ST + a)
        if (s[C_WMASK] >> a) & 1:
            inc(cv, CC_ST_OVERWRITE)
        else:
            s[C_WMASK] |= (<int64_t>1) << a
            inc(cv, CC_MEMFILL + popcount16(s[C_WMASK]) - 1)
        s[C_MEM + a] = acc
    elif op == OP_BZ or op == OP_BNZ or op == OP_BC:
        if op == OP_BZ:
            taken = (s[C_FLAGS] & FLAG_Z) != 0
        elif op == OP_BNZ:
            taken = (s[C_FLAGS] & FLAG_Z) == 0
        else:
            taken = (s[C_FLAGS] & FLAG_C) != 0
        base = CC_BRANCH + 2 * (op - OP_BZ)
        if taken:
            inc(cv, base)
            s[C_SKIP] = (imm & 3) + 1
            inc(cv, CC_SKIPLEN + (imm & 3))
            s[C_TAKEN] += 1
            if s[C_TAKEN] <= TAKEN_LADDER:
                inc(cv, CC_TAKEN + s[C_TAKEN] - 1)
        else:
            inc(cv, base + 1)
    elif op == OP_PUSH:
        if s[C_SP] == STACK_DEPTH:
            inc(cv, CC_OVERFLOW)
            s[C_TRAPPED] = 1
        else:
            s[C_STACK + s[C_SP]] = acc
            s[C_SP] += 1
            inc(cv, CC_PUSH + s[C_SP] - 1)
    elif op == OP_POP:
        if s[C_SP] == 0:
            inc(cv, CC_UNDERFLOW)
            s[C_TRAPPED] = 1
        else:
            if s[C_SP] == STACK_DEPTH and s[C_FLAGS] & FLAG_C:
                s[C_BUG] = 1
            inc(cv, CC_POP + s[C_SP] - 1)
            s[C_SP] -= 1
            c_result(s, cv, s[C_STACK + s[C_SP]])
    elif op == OP_LDW:
        if not s[C_LDW_PEND]:
            s[C_LDW_PEND] = 1
            s[C_LDW_LO] = imm & 0xFFFF
        else:
            s[C_LDW_PEND] = 0
            r = s[C_LDW_LO] | ((imm & 0xFFFF) << 16)
            inc(cv, CC_LDW_DONE)
            if r >> 16:
                inc(cv, CC_LDW_HI)
            c_result(s, cv, r)
    elif op == OP_ILL:
        inc(cv, CC_ILL)
        s[C_TRAPPED] = 1


def cpu_run(const uint64_t[::1] words, int64_t[::1] state, uint32_t[::1] cov):
    cdef Py_ssize_t i, n = words.shape[0]
    with nogil:
        for i in range(n):
            cpu_cycle(state, cov, words[i])
    return n


# --------------------------------------------------------------- synth-delay
cdef uint64_t[4] SYNTH_KEY = [0x5A, 0xC3, 0x99, 0x3C]


cdef inline int64_t now_ns() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <int64_t>ts.tv_sec * 1000000000 + ts.tv_nsec


cdef void delay(int64_t ns, bint sleep) noexcept nogil:
    cdef timespec req
    cdef int64_t deadline
    if sleep:
        req.tv_sec = ns // 1000000000
        req.tv_nsec = ns % 1000000000
        nanosleep(&req, NULL)
    else:
        deadline = now_ns() + ns
        while now_ns() < deadline:
            pass


def synth_run(const uint64_t[::1] words, int64_t[::1] state, uint32_t[::1] cov, int64_t delay_ns, bint sleep):
    cdef Py_ssize_t i, n = words.shape[0]
    cdef Py_ssize_t bins = cov.shape[0] - 8
    cdef int64_t match = state[0]
    cdef int64_t bug = state[1]
    cdef uint64_t word, target
    with nogil:
        for i in range(n):
            word = words[i]
            inc(cov, word % bins)
            target = SYNTH_KEY[match]
            if (word >> 4) == (target >> 4):
                inc(cov, bins + 2 * match)
            if word == target:
                inc(cov, bins + 2 * match + 1)
                match += 1
                if match == 4:
                    bug = 1
                    match = 0
            elif word == SYNTH_KEY[0]:
                inc(cov, bins)
                inc(cov, bins + 1)
                match = 1
            else:
                match = 0
            if delay_ns > 0:
                delay(delay_ns, sleep)
    state[0] = match
    state[1] = bug
    return n


# ------------------------------------------------------------------- grammar
def txn_expand(const uint8_t[::1] data, const int64_t[::1] payload, const int64_t[::1] cycles, int width):
    cdef Py_ssize_t n = data.shape[0], table = payload.shape[0]
    cdef Py_ssize_t pos = 0, count = 0, t, p, c, chunk, k, lo, hi, b, maxc = 1
    cdef uint64_t value, mask
    for t in range(table):
        if cycles[t] > maxc:
            maxc = cycles[t]
    mask = <uint64_t>0xFFFFFFFFFFFFFFFFULL if width >= 64 else ((<uint64_t>1 << width) - 1)
    out = np.empty(n * maxc, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    with nogil:
        while pos < n:
            t = data[pos] % table
            p = payload[t]
            c = cycles[t]
            chunk = (p + c - 1) // c
            for k in range(c):
                lo = k * chunk
                hi = lo + chunk
                if hi > p:
                    hi = p
                value = 0
                for b in range(lo, hi):
                    if pos + 1 + b < n and b - lo < 8:
                        value |= (<uint64_t>data[pos + 1 + b]) << (8 * (b - lo))
                ov[count] = (<uint64_t>t | (value << 8)) & mask
                count += 1
            pos += 1 + p
    return out[:count]


# ------------------------------------------------------------------ mutation
def havoc_apply(unsigned char[::1] buf, const int64_t[::1] kinds, const int64_t[::1] positions, const uint32_t[::1] rnd):
    cdef Py_ssize_t i, n = kinds.shape[0], pos
    cdef uint32_t r, delta
    with nogil:
        for i in range(n):
            pos = positions[i]
            r = rnd[i]
            if kinds[i] == 0:
                buf[pos] ^= <unsigned char>(1 << (r & 7))
            elif kinds[i] == 1:
                buf[pos] = <unsigned char>(r & 0xFF)
            else:
                delta = 1 + ((r >> 8) % 35)
                if (r >> 31) & 1:
                    buf[pos] = <unsigned char>((buf[pos] - delta) & 0xFF)
                else:
                    buf[pos] = <unsigned char>((buf[pos] + delta) & 0xFF)
