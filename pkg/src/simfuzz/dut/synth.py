"""synth-delay: a scaling probe with a tunable per-cycle cost.

Each 8-bit cycle word increments one of ``coverpoints - 8`` value bins. The
last eight coverpoints track progress through a four-byte key, two per key
byte: the high nibble matching, then the whole byte. Entering the full key
trips the check. ``delay_us`` burns time per cycle, busy-waiting by
default or sleeping with ``delay_mode="sleep"``.
"""

from .. import _pykernels as L
from ..errors import ContractViolation
from ..grammar import RAW
from .base import DutDescriptor, KernelDut


class SynthDelay(KernelDut):
    state_size = L.S_STATE_SIZE
    bug_slot = L.S_BUG
    bug_message = "synth-delay: key sequence accepted"

    def __init__(self, backend=None, coverpoints=32, delay_us=0.0, delay_mode="spin"):
        if coverpoints < 2 * len(L.SYNTH_KEY) + 1:
            raise ContractViolation(f"synth-delay needs at least {2 * len(L.SYNTH_KEY) + 1} coverpoints")
        if delay_mode not in ("spin", "sleep"):
            raise ContractViolation(f"delay_mode must be spin or sleep, got {delay_mode!r}")
        self.descriptor = DutDescriptor("synth-delay", 8, int(coverpoints), RAW, float(delay_us))
        bins = coverpoints - 2 * len(L.SYNTH_KEY)
        self.coverpoint_names = tuple(f"value.bin{i}" for i in range(bins)) + tuple(
            name for i in range(len(L.SYNTH_KEY)) for name in (f"key.stage{i + 1}.high", f"key.stage{i + 1}"))
        self.delay_ns = int(round(delay_us * 1000))
        self.sleep = delay_mode == "sleep"
        super().__init__(backend)

    def _kernel(self, words):
        return self.kernels.synth_run(words, self.state, self.cov, self.delay_ns, self.sleep)
