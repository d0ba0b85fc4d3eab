"""Pure-Python kernels.

Reference implementation of every hot loop. ``_ckernels.pyx`` mirrors this
file statement for statement; the test suite runs both on the same inputs and
requires identical results.
"""

import time

import numpy as np

BACKEND = "python"
SAT = 0xFFFFFFFF
M32 = 0xFFFFFFFF

# ---------------------------------------------------------------- periph-fsm
# state slots
P_CTRL, P_PRESC, P_TXR, P_RXR, P_FSM, P_TICKS, P_DIR, P_WB, P_RB = range(9)
P_IF, P_BUG, P_RXVALID, P_AL, P_RXACK, P_MACK = range(9, 15)
P_SCRATCH = 16
P_STATE_SIZE = 32

# controller states
IDLE, START, ADDR, ADDR_ACK, WRITE, READ, HOLD, RESTART, STOP, ERROR = range(10)
PERIPH_STATES = ("IDLE", "START", "ADDR", "ADDR_ACK", "WRITE", "READ", "HOLD", "RESTART", "STOP", "ERROR")

# coverpoints
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
PERIPH_COVERPOINTS = 118


def _p_busy(fsm):
    return fsm != IDLE and fsm != HOLD and fsm != ERROR


def _p_enter(s, cv, state):
    s[P_FSM] = state
    cv[PC_STATE + state] += 1
    if _p_busy(state):
        s[P_TICKS] = (s[P_PRESC] & 3) + 1


def _p_raise_if(s, cv):
    s[P_IF] = 1
    if s[P_CTRL] & 2:
        cv[PC_IRQ] += 1
    else:
        cv[PC_IF_NOIRQ] += 1


def _byte_class(v):
    if v == 0:
        return 0
    if v == 0xFF:
        return 1
    return 2


def _p_command(s, cv, c):
    if not (s[P_CTRL] & 1):
        cv[PC_CMD_DISABLED] += 1
        return
    if c & 0x01:
        if s[P_IF]:
            cv[PC_IACK] += 1
            s[P_IF] = 0
        else:
            cv[PC_IACK_SPURIOUS] += 1
    if c & 0x80:
        k = 0  # STA
    elif c & 0x40:
        k = 1  # STO
    elif c & 0x20:
        k = 2  # RD
    elif c & 0x10:
        k = 3  # WR
    else:
        return
    fsm = s[P_FSM]
    if _p_busy(fsm):
        cv[PC_CMD_BUSY] += 1
        if k == 0:
            cv[PC_ARB_LOST] += 1
            s[P_AL] = 1
            _p_enter(s, cv, IDLE)
        return
    if fsm == IDLE:
        if k != 0:
            cv[PC_CMD_NOSTART] += 1
        elif s[P_PRESC] == 0:
            cv[PC_START_NOCLK] += 1
        else:
            cv[PC_TICKS + (s[P_PRESC] & 3)] += 1
            s[P_WB] = 0
            s[P_RB] = 0
            s[P_AL] = 0
            _p_enter(s, cv, START)
    elif fsm == HOLD:
        if k == 0:
            _p_enter(s, cv, RESTART)
        elif k == 1:
            if s[P_IF]:
                cv[PC_STOP_IF_PENDING] += 1
            _p_enter(s, cv, STOP)
        elif k == 3:
            if s[P_DIR] == 0:
                _p_enter(s, cv, WRITE)
            else:
                cv[PC_ERR_WR] += 1
                _p_enter(s, cv, ERROR)
        else:
            if s[P_DIR] == 1:
                s[P_MACK] = (c >> 3) & 1
                _p_enter(s, cv, READ)
            else:
                cv[PC_ERR_RD] += 1
                _p_enter(s, cv, ERROR)
    else:  # ERROR
        if k == 1:
            cv[PC_ERR_RECOVER] += 1
            _p_enter(s, cv, STOP)
        else:
            cv[PC_ERR_IGNORED] += 1


def _p_advance(s, cv, word):
    sda = (word >> 40) & 1
    fsm = s[P_FSM]
    if fsm == START or fsm == RESTART:
        newdir = s[P_TXR] & 1
        if fsm == RESTART:
            if s[P_DIR] == 0 and newdir == 1:
                cv[PC_RESTART_W2R] += 1
            elif s[P_DIR] == 1 and newdir == 0:
                cv[PC_RESTART_R2W] += 1
            else:
                cv[PC_RESTART_SAME] += 1
        s[P_DIR] = newdir
        cv[PC_ADDR_BUCKET + (s[P_TXR] >> 5)] += 1
        _p_enter(s, cv, ADDR)
    elif fsm == ADDR:
        _p_enter(s, cv, ADDR_ACK)
    elif fsm == ADDR_ACK:
        s[P_RXACK] = sda
        _p_raise_if(s, cv)
        if sda == 0:
            cv[PC_ADDR_ACK] += 1
            _p_enter(s, cv, HOLD)
        else:
            cv[PC_ADDR_NACK] += 1
            _p_enter(s, cv, STOP)
    elif fsm == WRITE:
        cv[PC_WDATA + _byte_class(s[P_TXR])] += 1
        s[P_RXACK] = sda
        if sda == 0:
            s[P_WB] += 1
            cv[PC_WBURST + min(s[P_WB], 8) - 1] += 1
        else:
            cv[PC_DATA_NACK] += 1
        _p_raise_if(s, cv)
        _p_enter(s, cv, HOLD)
    elif fsm == READ:
        if s[P_RXVALID]:
            cv[PC_RX_OVERRUN] += 1
        v = (word >> 48) & 0xFF
        s[P_RXR] = v
        s[P_RXVALID] = 1
        cv[PC_RDATA + _byte_class(v)] += 1
        s[P_RB] += 1
        cv[PC_RBURST + min(s[P_RB], 8) - 1] += 1
        if s[P_MACK]:
            cv[PC_MASTER_NACK] += 1
        else:
            cv[PC_MASTER_ACK] += 1
        _p_raise_if(s, cv)
        _p_enter(s, cv, HOLD)
    elif fsm == STOP:
        cv[PC_STOP_DONE] += 1
        if s[P_WB] > 0 and s[P_RB] > 0:
            cv[PC_MIXED] += 1
        _p_enter(s, cv, IDLE)


def _periph_cycle(s, cv, word):
    op = word & 3
    addr = (word >> 2) & 15
    data = (word >> 8) & M32
    fsm = s[P_FSM]
    busy = _p_busy(fsm)
    if op == 1:
        cv[PC_WR + addr] += 1
        if addr == 0:
            if (s[P_CTRL] & 1) and not (data & 1):
                if busy:
                    cv[PC_ABORT] += 1
                    _p_enter(s, cv, IDLE)
                elif fsm == HOLD or fsm == ERROR:
                    cv[PC_DISABLE_HOLD] += 1
                    _p_enter(s, cv, IDLE)
            s[P_CTRL] = data & 3
        elif addr == 1:
            if fsm == HOLD and s[P_DIR] == 1 and s[P_RB] >= 3:
                s[P_BUG] = 1
            if busy:
                cv[PC_PRESC_BUSY] += 1
            s[P_PRESC] = data & 0xFFFF
        elif addr == 2:
            if busy:
                cv[PC_TXR_BUSY] += 1
            s[P_TXR] = data & 0xFF
        elif addr == 4:
            _p_command(s, cv, data & 0xFF)
        elif addr >= 6:
            s[P_SCRATCH + addr - 6] = data
    elif op == 2:
        cv[PC_RD + addr] += 1
        if addr == 3:
            if s[P_RXVALID]:
                cv[PC_RXR_FRESH] += 1
                s[P_RXVALID] = 0
            else:
                cv[PC_RXR_STALE] += 1
        elif addr == 5:
            if busy:
                cv[PC_STATUS_BUSY] += 1
        elif addr >= 6:
            if s[P_SCRATCH + addr - 6] != 0:
                cv[PC_SCRATCH_NZ + addr - 6] += 1
    if _p_busy(s[P_FSM]):
        s[P_TICKS] -= 1
        if s[P_TICKS] <= 0:
            _p_advance(s, cv, word)


def periph_run(words, state, cov):
    s = state.tolist()
    cv = cov.tolist()
    for word in words.tolist():
        _periph_cycle(s, cv, word)
    state[:] = s
    cov[:] = np.minimum(cv, SAT)
    return len(words)


# ------------------------------------------------------------------- toy-cpu
C_ACC, C_FLAGS, C_SP, C_SKIP, C_TRAPPED, C_LDW_PEND, C_LDW_LO, C_TAKEN, C_WMASK, C_BUG, C_RETIRED = range(11)
C_MEM = 16
C_STACK = 32
C_STATE_SIZE = 40
FLAG_Z, FLAG_C, FLAG_N = 1, 2, 4
STACK_DEPTH = 8

(OP_NOP, OP_LDI, OP_ADD, OP_SUB, OP_AND, OP_XOR, OP_SHF, OP_LD, OP_ST,
 OP_BZ, OP_BNZ, OP_BC, OP_PUSH, OP_POP, OP_LDW, OP_ILL) = range(16)

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
CPU_COVERPOINTS = 151
TAKEN_LADDER = 8
RETIRED_STEP = 8
RETIRED_LADDER = 8


def _c_result(s, cv, acc):
    s[C_ACC] = acc
    flags = s[C_FLAGS] & FLAG_C
    if acc == 0:
        flags |= FLAG_Z
    if acc >> 31:
        flags |= FLAG_N
    s[C_FLAGS] = flags
    cv[CC_NIBBLE + (acc >> 28)] += 1


def _c_carry(s, c):
    if c:
        s[C_FLAGS] |= FLAG_C
    else:
        s[C_FLAGS] &= ~FLAG_C


def _cpu_cycle(s, cv, word):
    if s[C_TRAPPED]:
        cv[CC_POST_TRAP] += 1
        return
    if s[C_SKIP] > 0:
        s[C_SKIP] -= 1
        cv[CC_SKIPPED] += 1
        return
    op = word & 15
    imm = (word >> 8) & 0xFFFFFF
    if s[C_LDW_PEND] and op != OP_LDW:
        cv[CC_LDW_INT] += 1
        s[C_LDW_PEND] = 0
    cv[CC_DECODE + op] += 1
    s[C_RETIRED] += 1
    if s[C_RETIRED] % RETIRED_STEP == 0 and s[C_RETIRED] <= RETIRED_STEP * RETIRED_LADDER:
        cv[CC_RETIRED + s[C_RETIRED] // RETIRED_STEP - 1] += 1
    acc = s[C_ACC]
    if op == OP_LDI:
        cv[CC_LDI_Z if imm == 0 else CC_LDI_NZ] += 1
        _c_result(s, cv, imm)
    elif op == OP_ADD:
        r = acc + (imm & 0xFFFF)
        _c_carry(s, r >> 32)
        cv[CC_ADD_C if r >> 32 else CC_ADD_NC] += 1
        r &= M32
        if r == 0:
            cv[CC_ADD_Z] += 1
        if r >> 31:
            cv[CC_ADD_N] += 1
        _c_result(s, cv, r)
    elif op == OP_SUB:
        v = imm & 0xFFFF
        borrow = 1 if v > acc else 0
        _c_carry(s, borrow)
        cv[CC_SUB_B if borrow else CC_SUB_NB] += 1
        r = (acc - v) & M32
        if r == 0:
            cv[CC_SUB_Z] += 1
        if r >> 31:
            cv[CC_SUB_N] += 1
        _c_result(s, cv, r)
    elif op == OP_AND:
        r = acc & (imm | 0xFF000000)
        cv[CC_AND_Z if r == 0 else CC_AND_NZ] += 1
        _c_result(s, cv, r)
    elif op == OP_XOR:
        r = acc ^ imm
        cv[CC_XOR_Z if r == 0 else CC_XOR_NZ] += 1
        _c_result(s, cv, r)
    elif op == OP_SHF:
        amt = imm & 31
        if amt == 0:
            cv[CC_SHF_ZERO] += 1
        if (imm >> 5) & 1:
            cv[CC_SHL] += 1
            wide = acc << amt
            c = 1 if (wide >> 32) != 0 else 0
            r = wide & M32
        else:
            cv[CC_SHR] += 1
            c = 1 if (acc & ((1 << amt) - 1)) != 0 else 0
            r = acc >> amt
        _c_carry(s, c)
        if c:
            cv[CC_SHF_C] += 1
        _c_result(s, cv, r)
    elif op == OP_LD:
        a = imm & 15
        cv[CC_LD + a] += 1
        cv[CC_LD_WRITTEN if (s[C_WMASK] >> a) & 1 else CC_LD_UNWRITTEN] += 1
        _c_result(s, cv, s[C_MEM + a])
    elif op == OP_ST:
        a = imm & 15
        cv[CC_ST + a] += 1
        if (s[C_WMASK] >> a) & 1:
            cv[CC_ST_OVERWRITE] += 1
        else:
            s[C_WMASK] |= 1 << a
            cv[CC_MEMFILL + bin(s[C_WMASK]).count("1") - 1] += 1
        s[C_MEM + a] = acc
    elif op == OP_BZ or op == OP_BNZ or op == OP_BC:
        if op == OP_BZ:
            taken = s[C_FLAGS] & FLAG_Z
        elif op == OP_BNZ:
            taken = not (s[C_FLAGS] & FLAG_Z)
        else:
            taken = s[C_FLAGS] & FLAG_C
        base = CC_BRANCH + 2 * (op - OP_BZ)
        if taken:
            cv[base] += 1
            s[C_SKIP] = (imm & 3) + 1
            cv[CC_SKIPLEN + (imm & 3)] += 1
            s[C_TAKEN] += 1
            if s[C_TAKEN] <= TAKEN_LADDER:
                cv[CC_TAKEN + s[C_TAKEN] - 1] += 1
        else:
            cv[base + 1] += 1
    elif op == OP_PUSH:
        if s[C_SP] == STACK_DEPTH:
            cv[CC_OVERFLOW] += 1
            s[C_TRAPPED] = 1
        else:
            s[C_STACK + s[C_SP]] = acc
            s[C_SP] += 1
            cv[CC_PUSH + s[C_SP] - 1] += 1
    elif op == OP_POP:
        if s[C_SP] == 0:
            cv[CC_UNDERFLOW] += 1
            s[C_TRAPPED] = 1
        else:
            if s[C_SP] == STACK_DEPTH and s[C_FLAGS] & FLAG_C:
                s[C_BUG] = 1
            cv[CC_POP + s[C_SP] - 1] += 1
            s[C_SP] -= 1
            _c_result(s, cv, s[C_STACK + s[C_SP]])
    elif op == OP_LDW:
        if not s[C_LDW_PEND]:
            s[C_LDW_PEND] = 1
            s[C_LDW_LO] = imm & 0xFFFF
        else:
            s[C_LDW_PEND] = 0
            r = s[C_LDW_LO] | ((imm & 0xFFFF) << 16)
            cv[CC_LDW_DONE] += 1
            if r >> 16:
                cv[CC_LDW_HI] += 1
            _c_result(s, cv, r)
    elif op == OP_ILL:
        cv[CC_ILL] += 1
        s[C_TRAPPED] = 1


def cpu_run(words, state, cov):
    s = state.tolist()
    cv = cov.tolist()
    for word in words.tolist():
        _cpu_cycle(s, cv, word)
    state[:] = s
    cov[:] = np.minimum(cv, SAT)
    return len(words)


# --------------------------------------------------------------- synth-delay
SYNTH_KEY = (0x5A, 0xC3, 0x99, 0x3C)
S_MATCH, S_BUG = 0, 1
S_STATE_SIZE = 2


def synth_run(words, state, cov, delay_ns, sleep):
    match = int(state[S_MATCH])
    bug = int(state[S_BUG])
    cv = cov.tolist()
    bins = len(cv) - 2 * len(SYNTH_KEY)
    for word in words.tolist():
        cv[word % bins] += 1
        target = SYNTH_KEY[match]
        if word >> 4 == target >> 4:
            cv[bins + 2 * match] += 1
        if word == target:
            cv[bins + 2 * match + 1] += 1
            match += 1
            if match == len(SYNTH_KEY):
                bug = 1
                match = 0
        elif word == SYNTH_KEY[0]:
            cv[bins] += 1
            cv[bins + 1] += 1
            match = 1
        else:
            match = 0
        if delay_ns > 0:
            if sleep:
                time.sleep(delay_ns * 1e-9)
            else:
                deadline = time.perf_counter_ns() + delay_ns
                while time.perf_counter_ns() < deadline:
                    pass
    state[S_MATCH] = match
    state[S_BUG] = bug
    cov[:] = np.minimum(cv, SAT)
    return len(words)


# ------------------------------------------------------------------- grammar
def txn_expand(data, payload, cycles, width):
    """Expand template-framed bytes into cycle words (width <= 64)."""
    mask = (1 << width) - 1
    table = len(payload)
    pl = payload.tolist()
    cy = cycles.tolist()
    raw = data.tobytes()
    n = len(raw)
    out = []
    pos = 0
    while pos < n:
        t = raw[pos] % table
        p = pl[t]
        c = cy[t]
        chunk = -(-p // c)
        body = raw[pos + 1:pos + 1 + p]
        pos += 1 + p
        for k in range(c):
            lo = k * chunk
            hi = min(lo + chunk, p)
            value = int.from_bytes(body[lo:hi], "little") if lo < len(body) else 0
            out.append((t | (value << 8)) & mask)
    return np.array(out, dtype=np.uint64)


# ------------------------------------------------------------------ mutation
HAVOC_FLIP, HAVOC_SET, HAVOC_ARITH = 0, 1, 2


def havoc_apply(buf, kinds, positions, rnd):
    """Apply a drawn edit plan to ``buf`` in place, in plan order."""
    for kind, pos, r in zip(kinds.tolist(), positions.tolist(), rnd.tolist()):
        if kind == HAVOC_FLIP:
            buf[pos] ^= 1 << (r & 7)
        elif kind == HAVOC_SET:
            buf[pos] = r & 0xFF
        else:
            delta = 1 + ((r >> 8) % 35)
            if (r >> 31) & 1:
                buf[pos] = (buf[pos] - delta) & 0xFF
            else:
                buf[pos] = (buf[pos] + delta) & 0xFF
