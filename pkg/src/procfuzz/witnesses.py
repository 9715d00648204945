"""Minimal programs that expose each injected bug, plus controller input sequences.

Each program is 20 TIs; unused slots are NOPs.  The shipped ``.thzi`` files in
``data/witnesses`` are generated from :data:`PROGRAMS` by :func:`write_all`.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .isa import NOP_WORD, encode
from .stimulus import TI_COUNT, Program

WITNESS_DIR = "data/witnesses"


def _program(*tis: int) -> Program:
    words = list(tis) + [NOP_WORD] * (TI_COUNT - len(tis))
    return Program.with_tis(words)


def _reserved_add(rd: int, rs1: int, rs2: int) -> int:
    # opcode 0x5B, funct3 0: reserved; trapping is the only correct behaviour
    return 0x5B | rd << 7 | rs1 << 15 | rs2 << 20


PROGRAMS: dict[str, Program] = {
    # FENCE.I with a nonzero immediate is still FENCE.I
    "FENCE_FIELDS": _program(encode("FENCE.I", imm=1)),
    # jump into the no-fetch region: cause 1, not a page fault
    "EXC_TYPE": _program(encode("LUI", rd=1, imm=0xF), encode("JALR", rd=0, rs1=1, imm=0)),
    "ILLEGAL_ACCEPT": _program(encode("ADDI", rd=2, rs1=0, imm=3), _reserved_add(1, 2, 2)),
    # overwrite the first TI after it has been fetched; the user pass fetches it again
    "CACHE_INCOHERENCE": _program(encode("ADDI", rd=1, rs1=0, imm=0x7B),
                                  encode("SW", rs1=0, rs2=1, imm=0x400)),
    # a - a: no borrow
    "CARRY_SUB": _program(encode("ADDI", rd=1, rs1=0, imm=5), encode("SUB", rd=2, rs1=1, rs2=1)),
    # harmless in the machine pass, must trap in the user pass
    "PRIV_EPCR": _program(encode("ADDI", rd=1, rs1=0, imm=0x400),
                          encode("CSRRW", rd=0, rs1=1, imm=0x341)),
    "EEAR_RO": _program(encode("ADDI", rd=1, rs1=0, imm=0x44), encode("CSRRW", rd=0, rs1=1, imm=0x343)),
    # x0 must read as zero even right after a write to it
    "GPR0_FWD": _program(encode("ADDI", rd=0, rs1=0, imm=7), encode("ADD", rd=1, rs1=0, rs2=0)),
    # 0x10000 * 0x10000 = 2**32: low word 0, full product overflows
    "MAC_OVERFLOW": _program(encode("LUI", rd=1, imm=0x10), encode("MAC", rd=3, rs1=1, rs2=1)),
    # INT_MIN - 1 overflows; the ADD sign rule says it cannot
    "OVERFLOW_SUB": _program(encode("LUI", rd=1, imm=0x80000), encode("ADDI", rd=2, rs1=0, imm=1),
                             encode("SUB", rd=3, rs1=1, rs2=2)),
    # the handler samples INSTRET right after the breakpoint
    "INSTRET_EBREAK": _program(encode("EBREAK")),
}

# controller input tuples (flush, en, debug_en, pass, ipass)
CONTROLLER_INPUTS: dict[str, list[tuple[int, ...]]] = {
    "CS_B1": [(0, 0, 1, 0, 1)],     # debug read with the wrong password
    "CS_B2": [(1, 0, 0, 0, 0)],     # flush request while the cache is disabled
}


def filename(bug: str) -> str:
    return f"{bug.lower()}.thzi" if bug in PROGRAMS else f"{bug.lower()}.json"


def load(bug: str):
    """Read a shipped witness: a :class:`Program` or a list of controller inputs."""
    data = resources.files("procfuzz").joinpath(WITNESS_DIR, filename(bug)).read_bytes()
    if bug in PROGRAMS:
        return Program.from_bytes(data)
    if bug in CONTROLLER_INPUTS:
        return [tuple(t) for t in json.loads(data)]
    raise KeyError(bug)


def write_all(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for bug, prog in PROGRAMS.items():
        path = directory / filename(bug)
        prog.save(path)
        out.append(path)
    for bug, inputs in CONTROLLER_INPUTS.items():
        path = directory / filename(bug)
        path.write_text(json.dumps([list(t) for t in inputs]) + "\n")
        out.append(path)
    return out
