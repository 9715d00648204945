"""Stand-alone cache-controller design used for the coverage-metric case study.

The design is organised in numbered blocks:

1. branch-style mux choosing FLUSH/IDLE  (select ``sel2``)
2. ``flush & en`` condition logic driving ``sel2``
3. expression-style mux choosing D_READ  (select ``sel1``)
4. password check logic driving ``sel1``
5. 3-bit state register (may float before the first clock)
6. ``vld`` logic
7. input and output registers

Each probe carries its block number in ``meta["block"]`` so the universes of
the baseline metrics can be audited per block.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .. import coverage as cov
from .bugs import NO_BUGS, BugConfig

IDLE, FLUSH, D_READ = 0, 1, 2
STATE_NAMES = ("IDLE", "FLUSH", "D_READ")
INPUT_NAMES = ("flush", "en", "debug_en", "pass", "ipass")


def build_manifest() -> cov.Manifest:
    transitions = [(a, b) for a in STATE_NAMES for b in STATE_NAMES]
    return cov.Manifest("cache-controller-v1", [
        cov.statement("blk1.when_flush", block=1),
        cov.statement("blk1.otherwise", block=1),
        cov.statement("blk3.state_assign", block=3),
        cov.statement("blk6.vld_assign", block=6),
        cov.branch("blk1.when", block=1),
        cov.condition("blk2.flush_and_en", ["flush", "en"], block=2),
        cov.expression("blk3.state_mux", ["sel1", "state_f_flush"], block=3),
        cov.expression("blk4.sel1", ["debug_en", "pass", "ipass"], block=4),
        cov.expression("blk6.vld", ["debug_en", "flush", "en"], block=6),
        cov.toggle("blk5.state", 3, tristate=True, block=5),
        cov.toggle("blk7.inputs", 5, block=7),
        cov.toggle("blk7.vld", 1, block=7),
        cov.fsm("blk5.state_fsm", STATE_NAMES, transitions, block=5),
        # mux-coverage instrumentation only recognises the `when` mux of block 1
        cov.mux("blk1.sel2", block=1),
        # control-register coverage: the five 1-bit control registers concatenated
        cov.ctrlreg("blk7.module_state", list(INPUT_NAMES), block=7),
    ])


CONTROLLER_MANIFEST = build_manifest()


class Controller:
    def __init__(self, bugs: BugConfig = NO_BUGS):
        self.bugs = bugs
        self.state: int | None = None       # None = floating until the first clock
        self.vld = 0
        self.inputs = 0

    def step(self, flush: int, en: int, debug_en: int, pass_: int, ipass: int,
             rec: cov.Recorder) -> tuple[int, int]:
        bugs = self.bugs
        sel2 = flush & en
        rec.hit("condition", "blk2.flush_and_en", (flush, en))
        rec.hit("branch", "blk1.when", sel2)
        rec.hit("mux", "blk1.sel2", sel2)
        if sel2:
            rec.hit("statement", "blk1.when_flush")
            state_f = FLUSH
        else:
            rec.hit("statement", "blk1.otherwise")
            state_f = IDLE

        rec.hit("expression", "blk4.sel1", (debug_en, pass_, ipass))
        if bugs.CS_B1:
            sel1 = debug_en & (pass_ | ipass)
        else:
            sel1 = debug_en & pass_ & (1 - ipass)
        rec.hit("expression", "blk3.state_mux", (sel1, int(state_f == FLUSH)))
        rec.hit("statement", "blk3.state_assign")
        nxt = D_READ if sel1 else state_f

        rec.hit("expression", "blk6.vld", (debug_en, flush, en))
        rec.hit("statement", "blk6.vld_assign")
        vld = debug_en | (flush | en) if bugs.CS_B2 else debug_en | (flush & en)

        inputs = flush | en << 1 | debug_en << 2 | pass_ << 3 | ipass << 4
        rec.hit("ctrlreg", "blk7.module_state", inputs)
        rec.toggle_word("blk7.inputs", self.inputs, inputs)
        rec.toggle_word("blk7.vld", self.vld, vld)
        if self.state is None:
            rec.toggle_tristate("blk5.state", 0, 0b111, nxt, 0)
        else:
            rec.toggle_tristate("blk5.state", self.state, 0, nxt, 0)
            rec.hit("fsm", "blk5.state_fsm", (STATE_NAMES[self.state], STATE_NAMES[nxt]))
        rec.hit("fsm", "blk5.state_fsm", STATE_NAMES[nxt])

        self.state, self.vld, self.inputs = nxt, vld, inputs
        return nxt, vld


def controller_run(inputs: Iterable[Sequence[int]], bugs: BugConfig = NO_BUGS,
                   controller: Controller | None = None
                   ) -> tuple[list[tuple[int, int]], cov.CoverageMap]:
    """Clock the controller once per 5-bit input tuple.

    Returns the per-cycle ``(state, vld)`` outputs and the coverage hit.  Pass
    ``controller`` to continue from an existing register state.
    """
    ctl = controller or Controller(bugs)
    rec = cov.Recorder(CONTROLLER_MANIFEST)
    out = []
    for tup in inputs:
        bits = tuple(int(v) for v in tup)
        if len(bits) != 5 or any(v not in (0, 1) for v in bits):
            raise ValueError(f"controller inputs are five bits, got {tup!r}")
        out.append(ctl.step(*bits, rec))
    return out, rec.to_map()
