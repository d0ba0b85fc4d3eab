"""periph-fsm: an I2C-style master controller behind a small register file.

Each 64-bit cycle word is a bus operation::

    bits  0-1   op (1 = write, 2 = read, else idle)
    bits  2-5   register address
    bits  8-39  write data
    bit   40    SDA level sampled from the slave (0 = ACK)
    bits 48-55  byte returned by the slave during a read phase

Registers: 0 CTRL (bit0 enable, bit1 irq enable), 1 PRESC, 2 TXR, 3 RXR (ro),
4 CMD (STA 0x80, STO 0x40, RD 0x20, WR 0x10, ACK 0x08, IACK 0x01),
5 STATUS (ro), 6-15 scratch.

Planted bug: writing PRESC while holding between bytes of a read burst that
has already returned three or more bytes sets the failure flag.
"""

from .. import _pykernels as L
from ..grammar import RAW
from .base import DutDescriptor, KernelDut

REG_NAMES = ("CTRL", "PRESC", "TXR", "RXR", "CMD", "STATUS") + tuple(f"SCRATCH{i}" for i in range(10))
CTRL, PRESC, TXR, RXR, CMD, STATUS = range(6)
STA, STO, RD, WR, ACK, IACK = 0x80, 0x40, 0x20, 0x10, 0x08, 0x01


def _names():
    names = [""] * L.PERIPH_COVERPOINTS
    for i, reg in enumerate(REG_NAMES):
        names[L.PC_WR + i] = f"bus.write.{reg}"
        names[L.PC_RD + i] = f"bus.read.{reg}"
    for i, st in enumerate(L.PERIPH_STATES):
        names[L.PC_STATE + i] = f"fsm.enter.{st}"
    for i in range(4):
        names[L.PC_TICKS + i] = f"start.ticks{i + 1}"
    for i in range(8):
        names[L.PC_ADDR_BUCKET + i] = f"addr.bucket{i}"
        names[L.PC_WBURST + i] = f"write.burst{i + 1}"
        names[L.PC_RBURST + i] = f"read.burst{i + 1}"
    for i, cls in enumerate(("zero", "ones", "other")):
        names[L.PC_WDATA + i] = f"write.data.{cls}"
        names[L.PC_RDATA + i] = f"read.data.{cls}"
    for i in range(10):
        names[L.PC_SCRATCH_NZ + i] = f"scratch{i}.readback"
    singles = {
        "PC_ABORT": "ctrl.abort_busy", "PC_TXR_BUSY": "txr.write_busy",
        "PC_RXR_FRESH": "rxr.read_fresh", "PC_RXR_STALE": "rxr.read_stale",
        "PC_STATUS_BUSY": "status.read_busy", "PC_CMD_DISABLED": "cmd.disabled",
        "PC_IACK": "cmd.iack", "PC_IACK_SPURIOUS": "cmd.iack_spurious",
        "PC_CMD_BUSY": "cmd.busy", "PC_ARB_LOST": "cmd.arb_lost",
        "PC_CMD_NOSTART": "cmd.no_start", "PC_START_NOCLK": "cmd.start_no_clock",
        "PC_RESTART_W2R": "restart.write_to_read", "PC_RESTART_R2W": "restart.read_to_write",
        "PC_RESTART_SAME": "restart.same_dir", "PC_ERR_WR": "error.write_in_read",
        "PC_ERR_RD": "error.read_in_write", "PC_ERR_RECOVER": "error.recover",
        "PC_ERR_IGNORED": "error.ignored", "PC_ADDR_ACK": "addr.ack",
        "PC_ADDR_NACK": "addr.nack", "PC_DATA_NACK": "write.nack",
        "PC_MASTER_ACK": "read.master_ack", "PC_MASTER_NACK": "read.master_nack",
        "PC_RX_OVERRUN": "read.overrun", "PC_STOP_DONE": "stop.done",
        "PC_MIXED": "txn.mixed_direction", "PC_IRQ": "irq.raised",
        "PC_IF_NOIRQ": "irq.masked", "PC_PRESC_BUSY": "presc.write_busy",
        "PC_DISABLE_HOLD": "ctrl.disable_hold", "PC_STOP_IF_PENDING": "stop.if_pending",
    }
    for const, name in singles.items():
        names[getattr(L, const)] = name
    assert all(names), "unnamed periph-fsm coverpoint"
    return tuple(names)


class PeriphFsm(KernelDut):
    descriptor = DutDescriptor("periph-fsm", 64, L.PERIPH_COVERPOINTS, RAW)
    coverpoint_names = _names()
    state_size = L.P_STATE_SIZE
    bug_slot = L.P_BUG
    bug_message = "periph-fsm: PRESC rewritten mid read burst"

    def _kernel(self, words):
        return self.kernels.periph_run(words, self.state, self.cov)


def word(op=0, addr=0, data=0, sda=0, rx=0) -> int:
    return (op & 3) | (addr & 15) << 2 | (data & 0xFFFFFFFF) << 8 | (sda & 1) << 40 | (rx & 0xFF) << 48


def wr(addr, data, sda=0, rx=0):
    return word(1, addr, data, sda, rx)


def rd(addr, sda=0, rx=0):
    return word(2, addr, 0, sda, rx)


def idle(sda=0, rx=0):
    return word(0, 0, 0, sda, rx)


def encode(words) -> bytes:
    return b"".join(int(w).to_bytes(8, "little") for w in words)
