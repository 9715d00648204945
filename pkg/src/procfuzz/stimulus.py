"""Seed generation, AFL-style instruction mutation and coverage-driven retention."""

from __future__ import annotations

import hashlib
import logging
import random
import struct
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path

from . import isa
from .isa import MASK32, data_mask, decode, encode, opcode_mask
from .weights import ALL_MUTATIONS, MutationId, WeightTable

log = logging.getLogger(__name__)

TI_COUNT = 20
SAFE_HALF = 10
ARITH_MAX = 35
CSR_RANDOM_ADDR_P = 0.25
CSR_READ_IDIOM_P = 0.5      # CSRRS/CSRRC with rs1=x0, the plain read form

MAGIC = b"THZI"
VERSION = 0x01
_HEADER = struct.Struct("<4sBHH")


class MalformedProgram(ValueError):
    pass


def _trap_handler() -> tuple[int, ...]:
    scratch = 31
    return (
        encode("CSRRS", rd=scratch, rs1=0, imm=isa.CSR_EPCR),
        encode("ADDI", rd=scratch, rs1=scratch, imm=4),
        encode("CSRRW", rd=0, rs1=scratch, imm=isa.CSR_EPCR),
        encode("CSRRS", rd=scratch, rs1=0, imm=isa.CSR_INSTRET),   # puts the retire count in the trace
        encode("ADDI", rd=scratch, rs1=0, imm=0),
        encode("MRET"),
    )


PASS_MARK = 0x03FC   # last word of the CI region; nonzero once the user-mode pass started


def _preamble() -> list[int]:
    return [
        encode("LUI", rd=2, imm=isa.MEM_SIZE >> 12),             # sp = top of RAM
        encode("ADDI", rd=5, rs1=0, imm=isa.TI_BASE),
        encode("CSRRW", rd=0, rs1=5, imm=isa.CSR_EPCR),          # a TI MRET restarts the TIs
        encode("CSRRW", rd=0, rs1=0, imm=isa.CSR_ESTATUS),       # ... in user mode
        encode("ADDI", rd=5, rs1=0, imm=0),
        encode("JAL", rd=0, imm=isa.TI_BASE - (isa.CI_BASE + 20)),
    ]


def _epilogue() -> list[int]:
    """Run the TIs a second time in user mode, then halt.

    The mode probe reads STATUS: in user mode that traps and the handler
    clears x31, so the CIs never touch machine-only CSRs from user mode.
    """
    t = 31
    return [
        encode("LW", rd=t, rs1=0, imm=PASS_MARK),
        encode("BNE", rs1=t, rs2=0, imm=4 * 9),                  # second pass done -> halt
        encode("ADDI", rd=t, rs1=0, imm=1),
        encode("SW", rs1=0, rs2=t, imm=PASS_MARK),
        encode("CSRRS", rd=t, rs1=0, imm=isa.CSR_STATUS),        # mode probe
        encode("BEQ", rs1=t, rs2=0, imm=4 * 5),                  # TIs left us in user mode -> halt
        encode("ADDI", rd=t, rs1=0, imm=isa.TI_BASE),
        encode("CSRRW", rd=0, rs1=t, imm=isa.CSR_EPCR),
        encode("CSRRW", rd=0, rs1=0, imm=isa.CSR_ESTATUS),
        encode("MRET"),
        isa.HALT_WORD,
    ]


TRAP_HANDLER = _trap_handler()
CI_PREAMBLE = tuple(_preamble())
CI_EPILOGUE = tuple(_epilogue())
CI_WORDS = CI_PREAMBLE + CI_EPILOGUE
EPILOGUE_PC = isa.CI_BASE + 4 * len(CI_PREAMBLE)


@dataclass(frozen=True)
class Program:
    ci_words: tuple[int, ...]
    ti_words: tuple[int, ...]
    entry_pc: int = isa.CI_BASE
    ti_base: int = isa.TI_BASE

    @classmethod
    def with_tis(cls, ti_words) -> "Program":
        return cls(CI_WORDS, tuple(w & MASK32 for w in ti_words))

    @property
    def halt_pc(self) -> int:
        """The last CI word is the halt loop."""
        return self.entry_pc + 4 * (len(self.ci_words) - 1)

    @property
    def ti_end(self) -> int:
        return self.ti_base + 4 * len(self.ti_words)

    def replace_ti(self, index: int, word: int) -> "Program":
        tis = list(self.ti_words)
        tis[index] = word & MASK32
        return replace(self, ti_words=tuple(tis))

    def image(self) -> bytes:
        """Memory image: trap handler at the vector, CIs, then the TIs and a jump to the epilogue."""
        end = self.ti_end + 4
        if end > isa.MEM_SIZE or self.entry_pc + 4 * len(self.ci_words) > PASS_MARK:
            raise MalformedProgram("program does not fit the memory map")
        if not self.ci_words:
            raise MalformedProgram("program has no CIs")
        back = encode("JAL", rd=0, imm=EPILOGUE_PC - self.ti_end)
        mem = bytearray(end)
        for base, words in ((isa.TRAP_VECTOR, TRAP_HANDLER), (self.entry_pc, self.ci_words),
                            (self.ti_base, self.ti_words + (back,))):
            mem[base:base + 4 * len(words)] = struct.pack(f"<{len(words)}I", *words)
        return bytes(mem)

    def to_bytes(self) -> bytes:
        words = self.ci_words + self.ti_words
        return (_HEADER.pack(MAGIC, VERSION, len(self.ci_words), len(self.ti_words))
                + struct.pack(f"<{len(words)}I", *words))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Program":
        if len(data) < _HEADER.size:
            raise MalformedProgram("truncated header")
        magic, version, n_ci, n_ti = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedProgram(f"bad magic {magic!r}")
        if version != VERSION:
            raise MalformedProgram(f"unsupported version {version}")
        if len(data) != _HEADER.size + 4 * (n_ci + n_ti):
            raise MalformedProgram(f"expected {n_ci + n_ti} words, got {len(data) - _HEADER.size} bytes")
        words = struct.unpack_from(f"<{n_ci + n_ti}I", data, _HEADER.size)
        return cls(tuple(words[:n_ci]), tuple(words[n_ci:]))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "Program":
        return cls.from_bytes(Path(path).read_bytes())

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]


# ---- seed generation --------------------------------------------------------

def random_operands(mnemonic: str, rng: random.Random) -> dict:
    op = isa.OP_BY_NAME[mnemonic]
    fmt = op.fmt
    r = rng.randrange
    if fmt == "SYS":
        return {}
    if fmt == "R":
        return {"rd": r(32), "rs1": r(32), "rs2": r(32)}
    if fmt == "I":
        if op.shift:
            imm = r(32)
        elif mnemonic in isa.CSR_OPS:
            # mostly architected CSRs; a uniform 12-bit address would almost never hit one
            imm = r(4096) if rng.random() < CSR_RANDOM_ADDR_P else rng.choice(sorted(isa.CSR_MAP))
            if mnemonic != "CSRRW" and rng.random() < CSR_READ_IDIOM_P:
                return {"rd": r(32), "rs1": 0, "imm": imm}
        elif mnemonic == "FENCE.I":
            imm = r(4096)
        else:
            imm = r(-2048, 2048)
        return {"rd": r(32), "rs1": r(32), "imm": imm}
    if fmt == "S":
        return {"rs1": r(32), "rs2": r(32), "imm": r(-2048, 2048)}
    if fmt == "B":
        return {"rs1": r(32), "rs2": r(32), "imm": 2 * r(-2048, 2048)}
    if fmt == "U":
        return {"rd": r(32), "imm": r(1 << 20)}
    return {"rd": r(32), "imm": 2 * r(-(1 << 19), 1 << 19)}


def random_instruction(mnemonic: str, rng: random.Random) -> int:
    return encode(mnemonic, **random_operands(mnemonic, rng))


def gen_seed(rng: random.Random, weights: WeightTable | None = None,
             spec: isa.IsaSpec = isa.MINIRV) -> Program:
    """Build a CI+TI program: 10 safe TIs, then 10 drawn from the weighted instruction set."""
    weights = weights or WeightTable.uniform()
    pool = weights.instructions(spec.legal_ops)
    if not pool:
        log.info("weight table selects no instructions; falling back to all legal ops")
        pool = list(spec.legal_ops)
    tis = [random_instruction(rng.choice(spec.safe_ops), rng) for _ in range(SAFE_HALF)]
    tis += [random_instruction(rng.choice(pool), rng) for _ in range(TI_COUNT - SAFE_HALF)]
    return Program.with_tis(tis)


# ---- mutation ---------------------------------------------------------------

def _set_bits(mask: int) -> list[int]:
    return [i for i in range(32) if mask >> i & 1]


def flip_bits(word: int, position: int, width: int, mask: int) -> int:
    """Flip ``width`` adjacent bits starting at ``position``, restricted to ``mask``."""
    window = ((1 << width) - 1) << position
    return word ^ (window & mask & MASK32)


def gather(word: int, mask: int) -> int:
    """Pack the bits of ``word`` selected by ``mask`` into a dense integer (LSB first)."""
    out = 0
    k = 0
    for i in range(32):
        if mask >> i & 1:
            out |= (word >> i & 1) << k
            k += 1
    return out


def scatter(value: int, word: int, mask: int) -> int:
    """Inverse of :func:`gather`: write ``value`` back into the bits selected by ``mask``."""
    k = 0
    for i in range(32):
        if mask >> i & 1:
            word = (word & ~(1 << i)) | ((value >> k & 1) << i)
            k += 1
    return word & MASK32


def arith(word: int, start_byte: int, nbytes: int, delta: int, mask: int) -> int:
    """Add ``delta`` to the data bits of ``nbytes`` bytes starting at ``start_byte`` (wrapping)."""
    window = (((1 << (8 * nbytes)) - 1) << (8 * start_byte)) & mask & MASK32
    n = window.bit_count()
    if not n:
        return word
    value = (gather(word, window) + delta) % (1 << n)
    return scatter(value, word, window)


_FLIP_WIDTH = {MutationId.M0: 1, MutationId.M1: 2, MutationId.M2: 4}
_FLIP_BYTES = {MutationId.M3: 1, MutationId.M4: 2}
_ARITH_BYTES = {MutationId.M5: 1, MutationId.M6: 2, MutationId.M7: 4}


def _byte_windows(nbytes: int, mask: int) -> list[int]:
    starts = [s for s in range(5 - nbytes) if (((1 << (8 * nbytes)) - 1) << (8 * s)) & mask]
    return starts


def mutate_word(word: int, m: MutationId, rng: random.Random,
                others: tuple[int, ...] = ()) -> tuple[int, dict]:
    """Apply one mutation to a single word. Returns the new word and what was done."""
    m = MutationId(m)
    dmask = data_mask(word)
    if m in _FLIP_WIDTH:
        bits = _set_bits(dmask)
        if not bits:
            return word, {}
        pos = rng.choice(bits)
        return flip_bits(word, pos, _FLIP_WIDTH[m], dmask), {"position": pos}
    if m in _FLIP_BYTES:
        n = _FLIP_BYTES[m]
        starts = _byte_windows(n, dmask)
        if not starts:
            return word, {}
        s = rng.choice(starts)
        return word ^ ((((1 << (8 * n)) - 1) << (8 * s)) & dmask), {"byte": s}
    if m in _ARITH_BYTES:
        n = _ARITH_BYTES[m]
        starts = _byte_windows(n, dmask)
        if not starts:
            return word, {}
        s = rng.choice(starts)
        delta = rng.randint(0, ARITH_MAX) * rng.choice((1, -1))
        return arith(word, s, n, delta, dmask), {"byte": s, "delta": delta}
    if m == MutationId.M8:
        s = rng.randrange(4)
        value = rng.randrange(256)
        return (word & ~(0xFF << (8 * s))) | value << (8 * s), {"byte": s, "value": value}
    if m == MutationId.M9:
        return isa.NOP_WORD, {}
    if m == MutationId.M10:
        if not others:
            return word, {}
        return rng.choice(others), {}
    # M11: fresh opcode/funct bits, data bits untouched
    omask = opcode_mask(word)
    return (word & ~omask) | (rng.getrandbits(32) & omask), {}


def mutate(program: Program, ti_index: int, m: MutationId, rng: random.Random) -> Program:
    """Return a copy of ``program`` with TI ``ti_index`` mutated by ``m``. CIs are never touched."""
    if not 0 <= ti_index < len(program.ti_words):
        raise IndexError(f"TI index {ti_index} out of range")
    others = program.ti_words[:ti_index] + program.ti_words[ti_index + 1:]
    word, _ = mutate_word(program.ti_words[ti_index], m, rng, others)
    return program.replace_ti(ti_index, word)


def select_im(weights: WeightTable | None, rng: random.Random,
              program: Program) -> tuple[int, str | None, MutationId]:
    """Pick a TI uniformly, then a mutation allowed for its instruction by the weights."""
    weights = weights or WeightTable.uniform()
    idx = rng.randrange(len(program.ti_words))
    insn = decode(program.ti_words[idx])
    name = insn.mnemonic if insn is not None else None
    allowed = weights.mutations_for(name) if name is not None else []
    m = rng.choice(allowed or ALL_MUTATIONS)
    return idx, name, m


# ---- corpus -----------------------------------------------------------------

KEEP = "keep"
DISCARD = "discard"


class Corpus:
    """FIFO queue of retained programs, optionally mirrored to a directory of THZI files."""

    def __init__(self, directory: str | Path | None = None):
        self.entries: list[Program] = []
        self.queue: deque[int] = deque()
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, program: Program) -> int:
        idx = len(self.entries)
        self.entries.append(program)
        self.queue.append(idx)
        if self.directory is not None:
            program.save(self.path_of(idx))
        return idx

    def path_of(self, idx: int) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / f"{idx:06d}-{self.entries[idx].digest()}.thzi"

    def next(self) -> tuple[int, Program]:
        """Dequeue the next entry; an exhausted queue restarts from the whole corpus."""
        if not self.queue:
            self.queue.extend(range(len(self.entries)))
        idx = self.queue.popleft()
        return idx, self.entries[idx]


def retain(corpus: Corpus, candidate: Program, delta_points) -> str:
    if delta_points:
        corpus.add(candidate)
        return KEEP
    return DISCARD
