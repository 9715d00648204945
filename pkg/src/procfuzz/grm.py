"""Golden reference model: a plain architectural interpreter for MiniRV."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import isa
from .isa import MASK32, decode, sext

# writable bits per CSR (WARL); INSTRET is read-only
CSR_WRITE_MASK = {
    isa.CSR_STATUS: 0x1,
    isa.CSR_EPCR: MASK32 & ~0x3,
    isa.CSR_ESTATUS: 0x1,
    isa.CSR_EEAR: MASK32,
    isa.CSR_FLAGS: 0x3,
}

STATUS_HALTED = "halted"
STATUS_BUDGET = "budget"
STATUS_DOUBLEFAULT = "doublefault"


class ImageTooLarge(ValueError):
    pass


@dataclass(slots=True)
class CommitEvent:
    seq: int
    pc: int
    instr_word: int
    gpr_writes: tuple = ()
    csr_writes: tuple = ()
    mem_writes: tuple = ()
    exception: int | None = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "pc": self.pc,
            "instr_word": self.instr_word,
            "gpr_writes": [list(w) for w in self.gpr_writes],
            "csr_writes": [list(w) for w in self.csr_writes],
            "mem_writes": [list(w) for w in self.mem_writes],
            "exception": self.exception,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CommitEvent":
        return cls(d["seq"], d["pc"], d["instr_word"],
                   tuple(tuple(w) for w in d["gpr_writes"]),
                   tuple(tuple(w) for w in d["csr_writes"]),
                   tuple(tuple(w) for w in d["mem_writes"]),
                   d["exception"])


@dataclass
class ArchTrace:
    events: list[CommitEvent]
    status: str

    def __len__(self) -> int:
        return len(self.events)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict()) + "\n" for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str, status: str = STATUS_HALTED) -> "ArchTrace":
        return cls([CommitEvent.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()],
                   status)


@dataclass
class ArchState:
    pc: int
    gpr: list[int] = field(default_factory=lambda: [0] * 32)
    csr: dict[int, int] = field(default_factory=dict)
    mem: bytearray = field(default_factory=lambda: bytearray(isa.MEM_SIZE))
    instret: int = 0

    @property
    def mode(self) -> int:
        return self.csr[isa.CSR_STATUS] & 1


def load_image(image: bytes | bytearray) -> bytearray:
    if len(image) > isa.MEM_SIZE:
        raise ImageTooLarge(f"image of {len(image)} bytes exceeds {isa.MEM_SIZE}")
    mem = bytearray(isa.MEM_SIZE)
    mem[:len(image)] = image
    return mem


def reset_csrs() -> dict[int, int]:
    return {isa.CSR_STATUS: isa.MODE_MACHINE, isa.CSR_EPCR: 0, isa.CSR_ESTATUS: 0,
            isa.CSR_EEAR: 0, isa.CSR_FLAGS: 0}


def grm_reset(image: bytes | bytearray, entry_pc: int) -> ArchState:
    return ArchState(pc=entry_pc, csr=reset_csrs(), mem=load_image(image))


def add_flags(a: int, b: int, old_flags: int) -> tuple[int, int]:
    total = a + b
    result = total & MASK32
    carry = total >> 32
    overflow = not -(1 << 31) <= sext(a, 32) + sext(b, 32) < (1 << 31)
    return result, carry | (overflow << 1)


def sub_flags(a: int, b: int, old_flags: int) -> tuple[int, int]:
    result = (a - b) & MASK32
    borrow = int(a < b)
    overflow = not -(1 << 31) <= sext(a, 32) - sext(b, 32) < (1 << 31)
    return result, borrow | (overflow << 1)


def mac_flags(acc: int, a: int, b: int, old_flags: int) -> tuple[int, int]:
    full = sext(acc, 32) + sext(a, 32) * sext(b, 32)
    overflow = not -(1 << 31) <= full < (1 << 31)
    return full & MASK32, (old_flags & isa.FLAG_CARRY) | (overflow << 1)


def _shift_right_arith(value: int, amount: int) -> int:
    return (sext(value, 32) >> amount) & MASK32


_LOAD_SIZE = {"LB": 1, "LBU": 1, "LH": 2, "LHU": 2, "LW": 4}
_STORE_SIZE = {"SB": 1, "SH": 2, "SW": 4}


def grm_step(s: ArchState) -> CommitEvent:
    """Execute one instruction and return its architectural effects."""
    pc = s.pc
    seq = s.instret
    gpr = s.gpr
    csr = s.csr

    def trap(cause: int, word: int, addr: int | None = None) -> CommitEvent:
        status = csr[isa.CSR_STATUS]
        eear = pc if addr is None else addr & MASK32
        writes = ((isa.CSR_EPCR, pc), (isa.CSR_ESTATUS, status), (isa.CSR_EEAR, eear),
                  (isa.CSR_STATUS, isa.MODE_MACHINE))
        for a, v in writes:
            csr[a] = v
        s.pc = isa.TRAP_VECTOR
        s.instret += 1
        return CommitEvent(seq, pc, word, (), writes, (), cause)

    if pc >= isa.NO_FETCH_BASE:
        return trap(isa.CAUSE_FETCH_ACCESS, 0)
    mem = s.mem
    word = int.from_bytes(mem[pc:pc + 4], "little")
    insn = decode(word)
    if insn is None:
        return trap(isa.CAUSE_ILLEGAL, word)

    m = insn.mnemonic
    a = gpr[insn.rs1]
    b = gpr[insn.rs2]
    rd = insn.rd
    imm = insn.imm
    next_pc = (pc + 4) & MASK32
    result = None
    csr_writes: tuple = ()
    mem_writes: tuple = ()

    if m in ("ADD", "ADDI", "SUB", "MAC"):
        flags = csr[isa.CSR_FLAGS]
        if m == "ADD":
            result, flags = add_flags(a, b, flags)
        elif m == "ADDI":
            result, flags = add_flags(a, imm & MASK32, flags)
        elif m == "SUB":
            result, flags = sub_flags(a, b, flags)
        else:
            result, flags = mac_flags(gpr[rd], a, b, flags)
        csr[isa.CSR_FLAGS] = flags
        csr_writes = ((isa.CSR_FLAGS, flags),)
    elif m == "SLT":
        result = int(sext(a, 32) < sext(b, 32))
    elif m == "SLTU":
        result = int(a < b)
    elif m == "SLTI":
        result = int(sext(a, 32) < imm)
    elif m == "AND":
        result = a & b
    elif m == "OR":
        result = a | b
    elif m == "XOR":
        result = a ^ b
    elif m == "ANDI":
        result = a & imm & MASK32
    elif m == "ORI":
        result = (a | imm) & MASK32
    elif m == "XORI":
        result = (a ^ imm) & MASK32
    elif m == "SLL":
        result = (a << (b & 31)) & MASK32
    elif m == "SRL":
        result = a >> (b & 31)
    elif m == "SRA":
        result = _shift_right_arith(a, b & 31)
    elif m == "SLLI":
        result = (a << imm) & MASK32
    elif m == "SRLI":
        result = a >> imm
    elif m == "SRAI":
        result = _shift_right_arith(a, imm)
    elif m == "LUI":
        result = imm << 12
    elif m == "AUIPC":
        result = (pc + (imm << 12)) & MASK32
    elif m in _LOAD_SIZE:
        size = _LOAD_SIZE[m]
        addr = (a + imm) & MASK32
        if addr % size:
            return trap(isa.CAUSE_MISALIGNED_LOAD, word, addr)
        if addr + size > isa.MEM_SIZE:
            return trap(isa.CAUSE_LOAD_ACCESS, word, addr)
        result = int.from_bytes(mem[addr:addr + size], "little")
        if m in ("LB", "LH"):
            result = sext(result, 8 * size) & MASK32
    elif m in _STORE_SIZE:
        size = _STORE_SIZE[m]
        addr = (a + imm) & MASK32
        if addr % size:
            return trap(isa.CAUSE_MISALIGNED_STORE, word, addr)
        if addr + size > isa.MEM_SIZE:
            return trap(isa.CAUSE_STORE_ACCESS, word, addr)
        value = b & ((1 << (8 * size)) - 1)
        mem[addr:addr + size] = value.to_bytes(size, "little")
        mem_writes = ((addr, size, value),)
    elif m in isa.BRANCH_OPS:
        if m == "BEQ":
            taken = a == b
        elif m == "BNE":
            taken = a != b
        elif m == "BLT":
            taken = sext(a, 32) < sext(b, 32)
        elif m == "BGE":
            taken = sext(a, 32) >= sext(b, 32)
        elif m == "BLTU":
            taken = a < b
        else:
            taken = a >= b
        if taken:
            next_pc = (pc + imm) & MASK32
            if next_pc & 3:
                return trap(isa.CAUSE_MISALIGNED_FETCH, word)
    elif m == "JAL" or m == "JALR":
        target = (pc + imm) & MASK32 if m == "JAL" else (a + imm) & MASK32 & ~1
        if target & 3:
            return trap(isa.CAUSE_MISALIGNED_FETCH, word)
        result = next_pc
        next_pc = target
    elif m == "FENCE.I":
        pass
    elif m == "ECALL":
        mode = csr[isa.CSR_STATUS] & 1
        return trap(isa.CAUSE_ECALL_MACHINE if mode else isa.CAUSE_ECALL_USER, word)
    elif m == "EBREAK":
        return trap(isa.CAUSE_BREAKPOINT, word)
    elif m == "MRET":
        if not csr[isa.CSR_STATUS] & 1:
            return trap(isa.CAUSE_ILLEGAL, word)
        status = csr[isa.CSR_ESTATUS]
        csr[isa.CSR_STATUS] = status
        csr_writes = ((isa.CSR_STATUS, status),)
        next_pc = csr[isa.CSR_EPCR]
    elif m in isa.CSR_OPS:
        addr = imm
        rule = isa.CSR_MAP.get(addr)
        writes = m == "CSRRW" or insn.rs1 != 0
        if (rule is None or (rule.machine_only and not csr[isa.CSR_STATUS] & 1)
                or (writes and rule.read_only)):
            return trap(isa.CAUSE_ILLEGAL, word)
        old = s.instret & MASK32 if addr == isa.CSR_INSTRET else csr[addr]
        if writes:
            if m == "CSRRW":
                new = a
            elif m == "CSRRS":
                new = old | a
            else:
                new = old & ~a
            new &= CSR_WRITE_MASK[addr]
            csr[addr] = new
            csr_writes = ((addr, new),)
        result = old
    else:  # pragma: no cover - decode only yields the ops handled above
        raise AssertionError(m)

    gpr_writes: tuple = ()
    if result is not None and rd:
        gpr[rd] = result
        gpr_writes = ((rd, result),)
    s.pc = next_pc
    s.instret += 1
    return CommitEvent(seq, pc, word, gpr_writes, csr_writes, mem_writes, None)


def in_handler(pc: int) -> bool:
    return isa.TRAP_VECTOR <= pc < isa.HANDLER_END


def grm_run(s: ArchState, max_instructions: int, halt_pc: int) -> ArchTrace:
    """Step until ``halt_pc`` is reached, the budget runs out, or a trap hits the handler."""
    if max_instructions < 1:
        raise ValueError("max_instructions must be >= 1")
    events = []
    while len(events) < max_instructions:
        if s.pc == halt_pc:
            return ArchTrace(events, STATUS_HALTED)
        pc = s.pc
        ev = grm_step(s)
        events.append(ev)
        if ev.exception is not None and in_handler(pc):
            return ArchTrace(events, STATUS_DOUBLEFAULT)
    if s.pc == halt_pc:
        return ArchTrace(events, STATUS_HALTED)
    return ArchTrace(events, STATUS_BUDGET)
