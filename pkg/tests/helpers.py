from procfuzz import grm
from procfuzz.isa import NOP_WORD, encode
from procfuzz.stimulus import TI_COUNT, Program


def program(*tis):
    return Program.with_tis(list(tis) + [NOP_WORD] * (TI_COUNT - len(tis)))


def grm_trace(prog, budget=2000):
    return grm.grm_run(grm.grm_reset(prog.image(), prog.entry_pc), budget, prog.halt_pc)


def events_at(trace, pc):
    """Commit events at ``pc``: [machine pass, user pass] for a TI slot."""
    return [e for e in trace.events if e.pc == pc]


def ti_pc(k):
    return 0x400 + 4 * k


def asm(m, **kw):
    return encode(m, **kw)
