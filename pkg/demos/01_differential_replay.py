"""
Differential replay of one bug witness
======================================

Every input runs on two models: the architectural reference and the
pipelined core with injected bugs. Their commit traces are compared event by
event. The first field that differs is the mismatch.

This walk-through replays the shipped witness for the user-mode EPCR bug.
"""

from procfuzz import witnesses
from procfuzz.cli import side_by_side
from procfuzz.dut.bugs import BUG_DESCRIPTIONS, NO_BUGS, BugConfig
from procfuzz.engine import run_input
from procfuzz.isa import disasm

# %%
# The witness is an ordinary 20-TI program. Only the first two slots matter.
prog = witnesses.load("PRIV_EPCR")
for word in prog.ti_words[:3]:
    print(f"{word:08x}  {disasm(word)}")
print("bug:", BUG_DESCRIPTIONS["PRIV_EPCR"])

# %%
# With the bug off both traces agree. The TIs run twice: once in machine mode
# (where the EPCR write is legal) and once in user mode (where it must trap).
clean = run_input(prog, NO_BUGS)
print(clean.status, len(clean.grm_trace), "events, mismatches:", clean.mismatches)

# %%
# With the bug on, the user-mode pass writes EPCR instead of trapping.
buggy = run_input(prog, BugConfig.of("PRIV_EPCR"))
first = buggy.mismatches[0]
print("\n".join(side_by_side(buggy.dut_trace, buggy.grm_trace, first.event_index)[-4:]))
print(f"\nfirst mismatch: event {first.event_index}, field {first.field}")
print("  dut:", first.dut)
print("  grm:", first.grm)
