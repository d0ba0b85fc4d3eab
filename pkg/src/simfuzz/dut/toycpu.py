"""toy-cpu: a 32-bit accumulator machine fed one instruction per cycle.

Instructions arrive from the stimulus stream through a transaction grammar;
the low nibble of each word is the opcode and bits 8-31 the immediate.
A taken branch skips the next ``(imm & 3) + 1`` cycles. Illegal opcodes and
stack over/underflow trap; a trapped core ignores the rest of the stimulus.

Planted bug: POP from a full stack while the carry flag is set.
"""

from .. import _pykernels as L
from ..grammar import transaction_grammar
from .base import DutDescriptor, KernelDut

MNEMONICS = ("NOP", "LDI", "ADD", "SUB", "AND", "XOR", "SHF", "LD", "ST",
             "BZ", "BNZ", "BC", "PUSH", "POP", "LDW", "ILL")
PAYLOAD = (0, 3, 2, 2, 3, 3, 1, 1, 1, 1, 1, 1, 0, 0, 4, 0)
CYCLES = (1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 1)
GRAMMAR = transaction_grammar(list(zip(MNEMONICS, PAYLOAD, CYCLES)))
OPCODES = {m: i for i, m in enumerate(MNEMONICS)}


def _names():
    names = [""] * L.CPU_COVERPOINTS
    for i, m in enumerate(MNEMONICS):
        names[L.CC_DECODE + i] = f"decode.{m}"
    for i in range(16):
        names[L.CC_LD + i] = f"ld.addr{i}"
        names[L.CC_ST + i] = f"st.addr{i}"
        names[L.CC_NIBBLE + i] = f"acc.top{i:x}"
    for i, br in enumerate(("BZ", "BNZ", "BC")):
        names[L.CC_BRANCH + 2 * i] = f"branch.{br}.taken"
        names[L.CC_BRANCH + 2 * i + 1] = f"branch.{br}.not_taken"
    for i in range(4):
        names[L.CC_SKIPLEN + i] = f"branch.skip{i + 1}"
    for i in range(16):
        names[L.CC_MEMFILL + i] = f"mem.distinct_written{i + 1}"
    for i in range(L.TAKEN_LADDER):
        names[L.CC_TAKEN + i] = f"branch.taken_count{i + 1}"
    for i in range(L.RETIRED_LADDER):
        names[L.CC_RETIRED + i] = f"retired.count{L.RETIRED_STEP * (i + 1)}"
    for i in range(8):
        names[L.CC_PUSH + i] = f"stack.push_depth{i + 1}"
        names[L.CC_POP + i] = f"stack.pop_depth{i + 1}"
    singles = {
        "CC_LDI_Z": "ldi.zero", "CC_LDI_NZ": "ldi.nonzero", "CC_ADD_C": "add.carry",
        "CC_ADD_NC": "add.no_carry", "CC_ADD_Z": "add.zero", "CC_ADD_N": "add.negative",
        "CC_SUB_B": "sub.borrow", "CC_SUB_NB": "sub.no_borrow", "CC_SUB_Z": "sub.zero",
        "CC_SUB_N": "sub.negative", "CC_AND_Z": "and.zero", "CC_AND_NZ": "and.nonzero",
        "CC_XOR_Z": "xor.zero", "CC_XOR_NZ": "xor.nonzero", "CC_SHL": "shf.left",
        "CC_SHR": "shf.right", "CC_SHF_ZERO": "shf.by_zero", "CC_SHF_C": "shf.carry_out",
        "CC_LD_WRITTEN": "ld.written", "CC_LD_UNWRITTEN": "ld.unwritten",
        "CC_ST_OVERWRITE": "st.overwrite", "CC_SKIPPED": "branch.shadow_cycle",
        "CC_OVERFLOW": "trap.stack_overflow", "CC_UNDERFLOW": "trap.stack_underflow",
        "CC_LDW_DONE": "ldw.done", "CC_LDW_INT": "ldw.interrupted", "CC_LDW_HI": "ldw.upper",
        "CC_ILL": "trap.illegal", "CC_POST_TRAP": "trap.post_trap_cycle",
    }
    for const, name in singles.items():
        names[getattr(L, const)] = name
    assert all(names), "unnamed toy-cpu coverpoint"
    return tuple(names)


class ToyCpu(KernelDut):
    descriptor = DutDescriptor("toy-cpu", 35, L.CPU_COVERPOINTS, GRAMMAR)
    coverpoint_names = _names()
    state_size = L.C_STATE_SIZE
    bug_slot = L.C_BUG
    bug_message = "toy-cpu: POP from full stack with carry set"

    def reset(self):
        super().reset()
        self.state[L.C_FLAGS] = L.FLAG_Z

    def _kernel(self, words):
        return self.kernels.cpu_run(words, self.state, self.cov)


def assemble(program) -> bytes:
    """Encode ``[(mnemonic, imm), ...]`` (or bare mnemonics) as chromosome bytes."""
    out = bytearray()
    for item in program:
        mnem, imm = (item, 0) if isinstance(item, str) else item
        op = OPCODES[mnem]
        out.append(op)
        out += int(imm).to_bytes(PAYLOAD[op], "little") if PAYLOAD[op] else b""
    return bytes(out)
