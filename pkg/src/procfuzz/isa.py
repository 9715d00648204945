"""MiniRV-32: a small RV32I-flavoured instruction set shared by the GRM and the DUT.

Base operations reuse the RV32I encodings bit-for-bit.  On top of that MiniRV
adds a custom MAC instruction (opcode 0x0B), an OpenRISC-style FLAGS CSR and a
tiny machine/user privilege model.  See ``docs/isa.md`` for the manual.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

MASK32 = 0xFFFFFFFF

# ---- memory map -----------------------------------------------------------
MEM_SIZE = 64 * 1024
TRAP_VECTOR = 0x0100
HANDLER_END = 0x0200          # [TRAP_VECTOR, HANDLER_END) is the handler region
CI_BASE = 0x0200
TI_BASE = 0x0400
NO_FETCH_BASE = 0xF000        # fetches at or above this address fault

NOP_WORD = 0x00000013         # ADDI x0, x0, 0
HALT_WORD = 0x0000006F        # JAL x0, 0

# ---- CSRs -----------------------------------------------------------------
CSR_STATUS = 0x300
CSR_EPCR = 0x341
CSR_ESTATUS = 0x342
CSR_EEAR = 0x343
CSR_FLAGS = 0x800
CSR_INSTRET = 0xC02

FLAG_CARRY = 0x1
FLAG_OVERFLOW = 0x2

MODE_USER = 0
MODE_MACHINE = 1

# ---- exception causes -----------------------------------------------------
CAUSE_MISALIGNED_FETCH = 0
CAUSE_FETCH_ACCESS = 1
CAUSE_ILLEGAL = 2
CAUSE_BREAKPOINT = 3
CAUSE_MISALIGNED_LOAD = 4
CAUSE_LOAD_ACCESS = 5
CAUSE_MISALIGNED_STORE = 6
CAUSE_STORE_ACCESS = 7
CAUSE_ECALL_USER = 8
CAUSE_ECALL_MACHINE = 11
CAUSE_FETCH_PAGE_FAULT = 12   # only ever reported by the buggy frontend

FORMATS = ("R", "I", "S", "B", "U", "J", "SYS")


@dataclass(frozen=True)
class CsrRule:
    name: str
    machine_only: bool
    read_only: bool


CSR_MAP: dict[int, CsrRule] = {
    CSR_STATUS: CsrRule("STATUS", True, False),
    CSR_EPCR: CsrRule("EPCR", True, False),
    CSR_ESTATUS: CsrRule("ESTATUS", True, False),
    CSR_EEAR: CsrRule("EEAR", True, False),
    CSR_FLAGS: CsrRule("FLAGS", False, False),
    CSR_INSTRET: CsrRule("INSTRET", False, True),
}


@dataclass(frozen=True)
class OpDef:
    mnemonic: str
    fmt: str
    opcode: int
    funct3: int | None = None
    funct7: int | None = None
    shift: bool = False       # I-type with funct7 in [31:25] and shamt in [24:20]
    klass: str = "alu"        # alu | mem | ctrl | sys

    @property
    def opcode_mask(self) -> int:
        if self.fmt == "SYS":
            return MASK32
        mask = 0x7F
        if self.funct3 is not None:
            mask |= 0x7 << 12
        if self.funct7 is not None:
            mask |= 0x7F << 25
        return mask

    @property
    def match(self) -> int:
        if self.fmt == "SYS":
            return self.opcode
        m = self.opcode
        if self.funct3 is not None:
            m |= self.funct3 << 12
        if self.funct7 is not None:
            m |= self.funct7 << 25
        return m


def _r(name, f3, f7, opcode=0x33, klass="alu"):
    return OpDef(name, "R", opcode, f3, f7, klass=klass)


def _i(name, opcode, f3, klass="alu"):
    return OpDef(name, "I", opcode, f3, klass=klass)


OPS: tuple[OpDef, ...] = (
    _r("ADD", 0, 0x00), _r("SUB", 0, 0x20),
    _i("ADDI", 0x13, 0),
    _r("SLT", 2, 0), _r("SLTU", 3, 0), _i("SLTI", 0x13, 2),
    _r("AND", 7, 0), _r("OR", 6, 0), _r("XOR", 4, 0),
    _i("ANDI", 0x13, 7), _i("ORI", 0x13, 6), _i("XORI", 0x13, 4),
    _r("SLL", 1, 0), _r("SRL", 5, 0), _r("SRA", 5, 0x20),
    OpDef("SLLI", "I", 0x13, 1, 0x00, shift=True),
    OpDef("SRLI", "I", 0x13, 5, 0x00, shift=True),
    OpDef("SRAI", "I", 0x13, 5, 0x20, shift=True),
    OpDef("LUI", "U", 0x37), OpDef("AUIPC", "U", 0x17),
    _i("LW", 0x03, 2, "mem"), _i("LH", 0x03, 1, "mem"), _i("LHU", 0x03, 5, "mem"),
    _i("LB", 0x03, 0, "mem"), _i("LBU", 0x03, 4, "mem"),
    OpDef("SW", "S", 0x23, 2, klass="mem"), OpDef("SH", "S", 0x23, 1, klass="mem"),
    OpDef("SB", "S", 0x23, 0, klass="mem"),
    OpDef("BEQ", "B", 0x63, 0, klass="ctrl"), OpDef("BNE", "B", 0x63, 1, klass="ctrl"),
    OpDef("BLT", "B", 0x63, 4, klass="ctrl"), OpDef("BGE", "B", 0x63, 5, klass="ctrl"),
    OpDef("BLTU", "B", 0x63, 6, klass="ctrl"), OpDef("BGEU", "B", 0x63, 7, klass="ctrl"),
    OpDef("JAL", "J", 0x6F, klass="ctrl"), _i("JALR", 0x67, 0, "ctrl"),
    _i("FENCE.I", 0x0F, 1, "sys"),
    OpDef("ECALL", "SYS", 0x00000073, klass="sys"),
    OpDef("EBREAK", "SYS", 0x00100073, klass="sys"),
    OpDef("MRET", "SYS", 0x30200073, klass="sys"),
    _i("CSRRW", 0x73, 1, "sys"), _i("CSRRS", 0x73, 2, "sys"), _i("CSRRC", 0x73, 3, "sys"),
    _r("MAC", 0, 0x00, opcode=0x0B),
)

OP_BY_NAME: dict[str, OpDef] = {op.mnemonic: op for op in OPS}
CSR_OPS = frozenset({"CSRRW", "CSRRS", "CSRRC"})
BRANCH_OPS = frozenset(op.mnemonic for op in OPS if op.fmt == "B")
LOAD_OPS = frozenset({"LW", "LH", "LHU", "LB", "LBU"})
STORE_OPS = frozenset({"SW", "SH", "SB"})
# ops whose 12-bit immediate is an unsigned field rather than a signed value
_UNSIGNED_IMM = frozenset({"CSRRW", "CSRRS", "CSRRC", "FENCE.I"})


@dataclass(frozen=True)
class IsaSpec:
    legal_ops: tuple[str, ...]
    safe_ops: tuple[str, ...]
    csr_map: dict[int, CsrRule]
    trap_vector: int = TRAP_VECTOR
    nop_word: int = NOP_WORD

    def __post_init__(self):
        if not set(self.safe_ops) <= set(self.legal_ops):
            raise ValueError("safe_ops must be a subset of legal_ops")
        for name in self.safe_ops:
            if OP_BY_NAME[name].klass != "alu":
                raise ValueError(f"{name} cannot be a safe op")


MINIRV = IsaSpec(
    legal_ops=tuple(op.mnemonic for op in OPS),
    safe_ops=tuple(op.mnemonic for op in OPS if op.klass == "alu" and op.mnemonic != "MAC"),
    csr_map=CSR_MAP,
)


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class Instruction:
    word: int
    mnemonic: str
    format: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    opcode_bits: int = MASK32

    @property
    def data_bits(self) -> int:
        return ~self.opcode_bits & MASK32

    @property
    def fields(self) -> dict:
        return {"rd": self.rd, "rs1": self.rs1, "rs2": self.rs2, "imm": self.imm}

    def __str__(self) -> str:
        return disasm(self)


def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def _check(name: str, value: int, lo: int, hi: int, mnemonic: str) -> None:
    if not lo <= value <= hi:
        raise EncodeError(f"{mnemonic}: {name}={value} outside [{lo}, {hi}]")


def encode(mnemonic: str, rd: int = 0, rs1: int = 0, rs2: int = 0, imm: int = 0) -> int:
    """Assemble one instruction word.

    ``imm`` is the architectural immediate: a signed byte offset for branches,
    jumps, loads, stores and ALU immediates; the shift amount for SLLI/SRLI/SRAI;
    the raw 20-bit field for LUI/AUIPC; and the unsigned 12-bit field for CSR
    ops (the CSR address) and FENCE.I.
    """
    op = OP_BY_NAME.get(mnemonic.upper())
    if op is None:
        raise EncodeError(f"unknown mnemonic {mnemonic!r}")
    mnemonic = op.mnemonic
    for name, value in (("rd", rd), ("rs1", rs1), ("rs2", rs2)):
        _check(name, value, 0, 31, mnemonic)
    fmt = op.fmt
    if fmt == "SYS":
        return op.match
    if fmt == "R":
        return op.match | rs2 << 20 | rs1 << 15 | rd << 7
    if fmt == "I":
        if op.shift:
            _check("shamt", imm, 0, 31, mnemonic)
            field = imm
        elif mnemonic in _UNSIGNED_IMM:
            _check("imm", imm, 0, 0xFFF, mnemonic)
            field = imm
        else:
            _check("imm", imm, -2048, 2047, mnemonic)
            field = imm & 0xFFF
        return op.match | field << 20 | rs1 << 15 | rd << 7
    if fmt == "S":
        _check("imm", imm, -2048, 2047, mnemonic)
        f = imm & 0xFFF
        return op.match | (f >> 5) << 25 | rs2 << 20 | rs1 << 15 | (f & 0x1F) << 7
    if fmt == "B":
        _check("imm", imm, -4096, 4094, mnemonic)
        if imm & 1:
            raise EncodeError(f"{mnemonic}: branch offset must be even")
        f = imm & 0x1FFF
        return (op.match | ((f >> 12) & 1) << 31 | ((f >> 5) & 0x3F) << 25 | rs2 << 20
                | rs1 << 15 | ((f >> 1) & 0xF) << 8 | ((f >> 11) & 1) << 7)
    if fmt == "U":
        _check("imm", imm, 0, 0xFFFFF, mnemonic)
        return op.match | imm << 12 | rd << 7
    # J
    _check("imm", imm, -(1 << 20), (1 << 20) - 2, mnemonic)
    if imm & 1:
        raise EncodeError(f"{mnemonic}: jump offset must be even")
    f = imm & 0x1FFFFF
    return (op.match | ((f >> 20) & 1) << 31 | ((f >> 1) & 0x3FF) << 21
            | ((f >> 11) & 1) << 20 | ((f >> 12) & 0xFF) << 12 | rd << 7)


# candidates per 7-bit opcode, checked in order
_BY_OPCODE: dict[int, list[OpDef]] = {}
for _op in OPS:
    _BY_OPCODE.setdefault(_op.opcode & 0x7F, []).append(_op)


def _match(word: int) -> OpDef | None:
    for op in _BY_OPCODE.get(word & 0x7F, ()):
        if word & op.opcode_mask == op.match:
            return op
    return None


@lru_cache(maxsize=1 << 17)
def decode(word: int) -> Instruction | None:
    """Decode a 32-bit word; ``None`` means the word is illegal. Total over all words."""
    word &= MASK32
    op = _match(word)
    if op is None:
        return None
    rd = (word >> 7) & 0x1F
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    fmt = op.fmt
    mask = op.opcode_mask
    if fmt == "SYS":
        return Instruction(word, op.mnemonic, fmt, opcode_bits=mask)
    if fmt == "R":
        return Instruction(word, op.mnemonic, fmt, rd, rs1, rs2, 0, mask)
    if fmt == "I":
        if op.shift:
            imm = rs2
        elif op.mnemonic in _UNSIGNED_IMM:
            imm = word >> 20
        else:
            imm = sext(word >> 20, 12)
        return Instruction(word, op.mnemonic, fmt, rd, rs1, 0, imm, mask)
    if fmt == "S":
        imm = sext(((word >> 25) << 5) | ((word >> 7) & 0x1F), 12)
        return Instruction(word, op.mnemonic, fmt, 0, rs1, rs2, imm, mask)
    if fmt == "B":
        imm = (((word >> 31) & 1) << 12 | ((word >> 7) & 1) << 11
               | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1)
        return Instruction(word, op.mnemonic, fmt, 0, rs1, rs2, sext(imm, 13), mask)
    if fmt == "U":
        return Instruction(word, op.mnemonic, fmt, rd, 0, 0, word >> 12, mask)
    imm = (((word >> 31) & 1) << 20 | ((word >> 12) & 0xFF) << 12
           | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1)
    return Instruction(word, op.mnemonic, fmt, rd, 0, 0, sext(imm, 21), mask)


def opcode_mask(word: int) -> int:
    """Opcode/funct bits of ``word``; 0 for illegal words (all bits count as data)."""
    insn = decode(word)
    return 0 if insn is None else insn.opcode_bits


def data_mask(word: int) -> int:
    """Register/immediate bits of ``word``; all 32 bits for illegal words."""
    return ~opcode_mask(word) & MASK32


def fields_of(insn: Instruction) -> dict:
    """Operand fields that are meaningful for the instruction's format."""
    fmt = insn.format
    if fmt == "SYS":
        return {}
    if fmt == "R":
        return {"rd": insn.rd, "rs1": insn.rs1, "rs2": insn.rs2}
    if fmt == "I":
        return {"rd": insn.rd, "rs1": insn.rs1, "imm": insn.imm}
    if fmt in ("S", "B"):
        return {"rs1": insn.rs1, "rs2": insn.rs2, "imm": insn.imm}
    return {"rd": insn.rd, "imm": insn.imm}


def disasm(insn: Instruction | int | None) -> str:
    if isinstance(insn, int):
        word, insn = insn, decode(insn)
        if insn is None:
            return f"<illegal 0x{word:08x}>"
    if insn is None:
        return "<illegal>"
    m, fmt = insn.mnemonic.lower(), insn.format
    if fmt == "SYS":
        return m
    if insn.mnemonic in CSR_OPS:
        csr = CSR_MAP.get(insn.imm)
        name = csr.name.lower() if csr else f"0x{insn.imm:03x}"
        return f"{m} x{insn.rd}, {name}, x{insn.rs1}"
    if insn.mnemonic in LOAD_OPS or insn.mnemonic == "JALR":
        return f"{m} x{insn.rd}, {insn.imm}(x{insn.rs1})"
    if insn.mnemonic == "FENCE.I":
        return m if insn.word == 0x0000100F else f"{m} [x{insn.rd}, x{insn.rs1}, imm=0x{insn.imm:x}]"
    if fmt == "R":
        return f"{m} x{insn.rd}, x{insn.rs1}, x{insn.rs2}"
    if fmt == "I":
        return f"{m} x{insn.rd}, x{insn.rs1}, {insn.imm}"
    if fmt == "S":
        return f"{m} x{insn.rs2}, {insn.imm}(x{insn.rs1})"
    if fmt == "B":
        return f"{m} x{insn.rs1}, x{insn.rs2}, {insn.imm:+d}"
    if fmt == "U":
        return f"{m} x{insn.rd}, 0x{insn.imm:x}"
    return f"{m} x{insn.rd}, {insn.imm:+d}"
