"""Cycle-stepped 3-stage MiniRV core with an instrumented I-cache.

Stages, evaluated once per clock in this order:

* X  - decode/execute the instruction latched by F last cycle.  CSR, memory,
  privilege and trap side effects happen here; GPR results go to the X/W latch.
  Operands are read from the register file or forwarded from the X/W latch.
* W  - retire the X/W latch: write the GPR and emit the CommitEvent.
* F  - fetch through a direct-mapped I-cache (16 lines x 16 bytes) driven by
  a small controller FSM.  A taken redirect from X costs one bubble.

All injected defects are gated by :class:`~procfuzz.dut.bugs.BugConfig`; with
every toggle off the commit stream equals the GRM's.
"""

from __future__ import annotations

from .. import coverage as cov
from .. import isa
from ..grm import (CSR_WRITE_MASK, STATUS_BUDGET, STATUS_DOUBLEFAULT, STATUS_HALTED, ArchTrace,
                   CommitEvent, in_handler, load_image, reset_csrs)
from ..isa import MASK32
from .bugs import NO_BUGS, BugConfig

DEFAULT_MAX_CYCLES = 2000
LINES = 64            # 1 KiB: handler, CI and TI regions map to disjoint lines
LINE_BYTES = 16
REFILL_LATENCY = 2
RESERVED_OPCODE = 0x5B

IDLE, LOOKUP, REFILL, FLUSH = range(4)
CACHE_STATES = ("IDLE", "LOOKUP", "REFILL", "FLUSH")

ARMS = tuple(op.mnemonic for op in isa.OPS) + ("<illegal>", "<reserved>")
ARM_INDEX = {name: i for i, name in enumerate(ARMS)}
_ILLEGAL_ARM = ARM_INDEX["<illegal>"]
_RESERVED_ARM = ARM_INDEX["<reserved>"]
BRANCH_NAMES = tuple(sorted(isa.BRANCH_OPS))

# default arms of the decoder's major-opcode case statement
ILLEGAL_GROUPS = ("LOAD", "MISC-MEM", "OP-IMM", "STORE", "OP", "BRANCH", "JALR", "SYSTEM",
                  "CUSTOM-0", "CUSTOM-2", "OTHER", "NOT32")
_GROUP_OF_OPCODE = {0x03: 0, 0x0F: 1, 0x13: 2, 0x23: 3, 0x33: 4, 0x63: 5, 0x67: 6, 0x73: 7,
                    0x0B: 8, 0x5B: 9}


def illegal_group(word: int) -> int:
    if word & 3 != 3:
        return ILLEGAL_GROUPS.index("NOT32")
    return _GROUP_OF_OPCODE.get(word & 0x7F, ILLEGAL_GROUPS.index("OTHER"))

TOGGLE_SIGNALS = (
    ("fx.instr", 32), ("fx.pc", 16), ("xw.result", 32), ("xw.rd", 5),
    ("csr.flags", 2), ("csr.mode", 1), ("csr.epcr", 16), ("csr.eear", 16), ("icache.state", 2),
)


class ManifestMismatch(ValueError):
    pass


def build_manifest() -> cov.Manifest:
    probes = [
        cov.statement("decode.arm", len(ARMS), arms=list(ARMS)),
        cov.statement("trap.cause", 13),
        cov.statement("decode.illegal_group", len(ILLEGAL_GROUPS), groups=list(ILLEGAL_GROUPS)),
        cov.statement("icache.fill"),
        cov.statement("icache.flush"),
    ]
    probes += [cov.branch(f"exec.{m}") for m in BRANCH_NAMES]
    probes += [cov.branch(u) for u in ("fetch.hit", "x.redirect", "csr.write", "mret.to_user")]
    probes += [
        cov.condition("csr.access", ["machine_only", "user_mode", "write", "read_only"]),
        cov.condition("lsu.load_fault", ["misaligned", "out_of_range"]),
        cov.condition("lsu.store_fault", ["misaligned", "out_of_range"]),
        cov.condition("fwd.rs1", ["w_valid", "rd_match", "rd_nonzero"]),
        cov.condition("fwd.rs2", ["w_valid", "rd_match", "rd_nonzero"]),
        cov.condition("fwd.acc", ["w_valid", "rd_match", "rd_nonzero"]),
        cov.condition("retire.instret", ["retire", "is_ebreak"]),
        cov.condition("csr.eear_write", ["write", "is_eear", "machine"]),
        cov.condition("fetch.protect", ["protected", "beyond_mem"]),
        cov.condition("decode.fence_fields", ["imm_nonzero", "rs1_nonzero", "rd_nonzero"]),
        cov.condition("decode.reserved", ["funct3_zero", "funct7_zero"]),
        cov.condition("icache.snoop", ["store", "line_valid", "tag_match"]),
        cov.condition("jump.misaligned", ["is_jump", "target_bit1"]),
        cov.expression("alu.add_flags", ["a31", "b31", "r31", "carry"]),
        cov.expression("alu.sub_flags", ["a31", "b31", "r31", "borrow", "a_eq_b"]),
        cov.expression("alu.mac_flags", ["prod_wide", "acc31", "prod31", "r31"]),
        cov.expression("alu.compare", ["a31", "b31", "lt"]),
        cov.expression("alu.shift", ["amount_zero", "a31", "arith"]),
        cov.expression("lsu.load_ext", ["signed", "msb"]),
    ]
    probes += [cov.toggle(name, width) for name, width in TOGGLE_SIGNALS]
    probes.append(cov.toggle("fetch.bus", 32, tristate=True))
    probes.append(cov.fsm("icache.ctrl", CACHE_STATES,
                          [(a, b) for a in CACHE_STATES for b in CACHE_STATES]))
    probes.append(cov.fsm("priv.mode", ["USER", "MACHINE"],
                          [(a, b) for a in ("USER", "MACHINE") for b in ("USER", "MACHINE")]))
    probes += [cov.mux("fwd.rs1_sel"), cov.mux("fwd.rs2_sel"), cov.mux("fwd.acc_sel"),
               cov.mux("pc.next_sel")]
    probes.append(cov.ctrlreg("icache.ctrl_group", ["flush_pending", "cache_en"]))
    return cov.Manifest("minirv-dut-v1", probes)


DUT_MANIFEST = build_manifest()


def _b(metric: str, unit: str) -> int:
    return DUT_MANIFEST.base(metric, unit)


B_ARM = _b("statement", "decode.arm")
B_CAUSE = _b("statement", "trap.cause")
B_ILLEGAL_GROUP = _b("statement", "decode.illegal_group")
B_FILL = _b("statement", "icache.fill")
B_FLUSH = _b("statement", "icache.flush")
B_BRANCH = {m: _b("branch", f"exec.{m}") for m in BRANCH_NAMES}
B_HIT = _b("branch", "fetch.hit")
B_REDIRECT = _b("branch", "x.redirect")
B_CSRWRITE = _b("branch", "csr.write")
B_MRET_USER = _b("branch", "mret.to_user")
B_CSR_ACCESS = _b("condition", "csr.access")
B_LOAD_FAULT = _b("condition", "lsu.load_fault")
B_STORE_FAULT = _b("condition", "lsu.store_fault")
B_FWD = {"rs1": _b("condition", "fwd.rs1"), "rs2": _b("condition", "fwd.rs2"),
         "acc": _b("condition", "fwd.acc")}
B_FWD_SEL = {"rs1": _b("mux", "fwd.rs1_sel"), "rs2": _b("mux", "fwd.rs2_sel"),
             "acc": _b("mux", "fwd.acc_sel")}
B_INSTRET = _b("condition", "retire.instret")
B_EEAR = _b("condition", "csr.eear_write")
B_PROTECT = _b("condition", "fetch.protect")
B_FENCE = _b("condition", "decode.fence_fields")
B_RESERVED = _b("condition", "decode.reserved")
B_SNOOP = _b("condition", "icache.snoop")
B_JMIS = _b("condition", "jump.misaligned")
B_ADD = _b("expression", "alu.add_flags")
B_SUB = _b("expression", "alu.sub_flags")
B_MAC = _b("expression", "alu.mac_flags")
B_CMP = _b("expression", "alu.compare")
B_SHIFT = _b("expression", "alu.shift")
B_LOADEXT = _b("expression", "lsu.load_ext")
B_TOGGLE = {name: (_b("toggle", name), width) for name, width in TOGGLE_SIGNALS}
B_BUS = _b("toggle", "fetch.bus")
B_CACHE_FSM = _b("fsm", "icache.ctrl")
B_MODE_FSM = _b("fsm", "priv.mode")
B_PCSEL = _b("mux", "pc.next_sel")
B_CTRLREG = _b("ctrlreg", "icache.ctrl_group")

_SIGNED_LOADS = {"LB": 1, "LH": 2}
_LOAD_BYTES = {"LB": 1, "LBU": 1, "LH": 2, "LHU": 2, "LW": 4}
_STORE_BYTES = {"SB": 1, "SH": 2, "SW": 4}


def _sx(v: int, bits: int) -> int:
    """Sign-extend ``bits`` wide ``v`` into a 32-bit pattern."""
    sign = 1 << (bits - 1)
    return ((v & ((1 << bits) - 1)) ^ sign) - sign & MASK32


class DutState:
    def __init__(self, image: bytes, entry_pc: int, bugs: BugConfig = NO_BUGS):
        self.mem = load_image(image)
        self.gpr = [0] * 32
        self.csr = reset_csrs()
        self.instret = 0
        self.bugs = bugs
        self.fetch_pc = entry_pc
        self.fx: tuple | None = None          # (pc, word, fault cause | None)
        self.xw: tuple | None = None          # (rd | None, value, CommitEvent)
        self.tags = [0] * LINES
        self.valid = [False] * LINES
        self.lines = [b""] * LINES
        self.cstate = IDLE
        self.refill_left = 0
        self.cycles = 0
        self.commits = 0
        self.halt_pc: int | None = None
        self.stopped: str | None = None
        self._drain: str | None = None
        self._flush_pending = 0
        # previous values of toggle-instrumented signals
        self._sig = {name: 0 for name, _ in TOGGLE_SIGNALS}
        self._sig["csr.mode"] = isa.MODE_MACHINE
        self._bus = (0, MASK32)               # (value, z-mask); floating after reset

    @property
    def pc(self) -> int:
        return self.fx[0] if self.fx is not None else self.fetch_pc

    @property
    def cache_state(self) -> str:
        return CACHE_STATES[self.cstate]

    def snapshot(self) -> tuple:
        return (bytes(self.mem), tuple(self.gpr), tuple(sorted(self.csr.items())), self.instret,
                self.fetch_pc, self.fx, tuple(self.tags), tuple(self.valid), tuple(self.lines),
                self.cstate, self.refill_left, self.cycles)

    # ---- operand network -----------------------------------------------------
    def _read(self, r: int, port: str) -> tuple[int, int]:
        """Return (value, coverage bits) for a register read through the forwarding mux."""
        xw = self.xw
        w_valid = xw is not None and xw[0] is not None
        match = w_valid and xw[0] == r
        nonzero = r != 0
        bits = 1 << (B_FWD[port] + (w_valid << 2 | match << 1 | nonzero))
        if match and (nonzero or self.bugs.GPR0_FWD):
            return xw[1], bits | 1 << (B_FWD_SEL[port] + 1)
        return self.gpr[r], bits | 1 << B_FWD_SEL[port]

    # ---- X stage -------------------------------------------------------------
    def _trap(self, pc: int, word: int, cause: int, addr: int | None = None):
        csr = self.csr
        status = csr[isa.CSR_STATUS]
        writes = ((isa.CSR_EPCR, pc), (isa.CSR_ESTATUS, status),
                  (isa.CSR_EEAR, pc if addr is None else addr),
                  (isa.CSR_STATUS, isa.MODE_MACHINE))
        for a, v in writes:
            csr[a] = v
        return CommitEvent(0, pc, word, (), writes, (), cause), isa.TRAP_VECTOR

    def _execute(self, pc: int, word: int, fault: int | None):
        """Run one instruction; returns (rd | None, value, event, redirect | None, coverage bits)."""
        bugs = self.bugs
        csr = self.csr
        hits = 0
        if fault is not None:
            event, target = self._trap(pc, word, fault)
            return None, 0, event, target, hits | 1 << (B_CAUSE + fault)

        insn = isa.decode(word)
        opcode = word & 0x7F
        funct3 = (word >> 12) & 7
        if opcode == 0x0F and funct3 == 1:
            imm_nz = word >> 20 != 0
            rs1_nz = (word >> 15) & 0x1F != 0
            rd_nz = (word >> 7) & 0x1F != 0
            hits |= 1 << (B_FENCE + (imm_nz << 2 | rs1_nz << 1 | rd_nz))
            if bugs.FENCE_FIELDS and (imm_nz or rs1_nz):
                insn = None
        reserved = False
        if opcode == RESERVED_OPCODE:
            f3z = funct3 == 0
            hits |= 1 << (B_RESERVED + (f3z << 1 | (word >> 25 == 0)))
            reserved = f3z and bugs.ILLEGAL_ACCEPT

        if insn is None:
            if reserved:
                a, h1 = self._read((word >> 15) & 0x1F, "rs1")
                b, h2 = self._read((word >> 20) & 0x1F, "rs2")
                rd = (word >> 7) & 0x1F
                value = (a + b) & MASK32
                ev = CommitEvent(0, pc, word, ((rd, value),) if rd else ())
                return rd, value, ev, None, hits | h1 | h2 | 1 << (B_ARM + _RESERVED_ARM)
            event, target = self._trap(pc, word, isa.CAUSE_ILLEGAL)
            return (None, 0, event, target,
                    hits | 1 << (B_ARM + _ILLEGAL_ARM) | 1 << (B_CAUSE + isa.CAUSE_ILLEGAL)
                    | 1 << (B_ILLEGAL_GROUP + illegal_group(word)))

        m = insn.mnemonic
        hits |= 1 << (B_ARM + ARM_INDEX[m])
        rd = insn.rd
        imm = insn.imm
        fmt = insn.format
        a = b = 0
        if fmt in ("R", "I", "S", "B") and m not in ("FENCE.I",):
            a, h = self._read(insn.rs1, "rs1")
            hits |= h
        if fmt in ("R", "S", "B"):
            b, h = self._read(insn.rs2, "rs2")
            hits |= h
        nxt = (pc + 4) & MASK32
        redirect = None
        value = None
        csr_writes = ()
        mem_writes = ()

        if m in ("ADD", "ADDI"):
            if m == "ADDI":
                b = imm & MASK32
            s = a + b
            value = s & MASK32
            carry = s >> 32
            ovf = (~(a ^ b) & (a ^ value)) >> 31 & 1
            hits |= 1 << (B_ADD + ((a >> 31) << 3 | (b >> 31) << 2 | (value >> 31) << 1 | carry))
            flags = carry | ovf << 1
            csr[isa.CSR_FLAGS] = flags
            csr_writes = ((isa.CSR_FLAGS, flags),)
        elif m == "SUB":
            nb = ~b & MASK32
            s = a + nb + 1
            value = s & MASK32
            if bugs.CARRY_SUB:
                borrow = ((a + nb) >> 32) ^ 1
            else:
                borrow = (s >> 32) ^ 1
            if bugs.OVERFLOW_SUB:
                ovf = (~(a ^ b) & (a ^ value)) >> 31 & 1
            else:
                ovf = ((a ^ b) & (a ^ value)) >> 31 & 1
            hits |= 1 << (B_SUB + ((a >> 31) << 4 | (b >> 31) << 3 | (value >> 31) << 2
                                   | ((s >> 32) ^ 1) << 1 | (a == b)))
            flags = borrow | ovf << 1
            csr[isa.CSR_FLAGS] = flags
            csr_writes = ((isa.CSR_FLAGS, flags),)
        elif m == "MAC":
            acc, h = self._read(rd, "acc")
            hits |= h
            prod = (a - ((a >> 31) << 32)) * (b - ((b >> 31) << 32))
            low = prod & MASK32
            wide = not -(1 << 31) <= prod < (1 << 31)
            value = (acc + low) & MASK32
            if bugs.MAC_OVERFLOW:
                ovf = (~(acc ^ low) & (acc ^ value)) >> 31 & 1
            else:
                total = (acc - ((acc >> 31) << 32)) + prod
                ovf = int(not -(1 << 31) <= total < (1 << 31))
            hits |= 1 << (B_MAC + (wide << 3 | (acc >> 31) << 2 | (low >> 31) << 1 | value >> 31))
            flags = (csr[isa.CSR_FLAGS] & isa.FLAG_CARRY) | ovf << 1
            csr[isa.CSR_FLAGS] = flags
            csr_writes = ((isa.CSR_FLAGS, flags),)
        elif m in ("SLT", "SLTU", "SLTI"):
            if m == "SLTI":
                b = imm & MASK32
            if m == "SLTU":
                lt = a < b
            else:
                lt = (a ^ 0x80000000) < (b ^ 0x80000000)
            value = int(lt)
            hits |= 1 << (B_CMP + ((a >> 31) << 2 | (b >> 31) << 1 | lt))
        elif m in ("AND", "ANDI"):
            value = a & (b if m == "AND" else imm & MASK32)
        elif m in ("OR", "ORI"):
            value = a | (b if m == "OR" else imm & MASK32)
        elif m in ("XOR", "XORI"):
            value = a ^ (b if m == "XOR" else imm & MASK32)
        elif m in ("SLL", "SRL", "SRA", "SLLI", "SRLI", "SRAI"):
            amount = (b & 31) if fmt == "R" else imm
            arith = m in ("SRA", "SRAI")
            if m in ("SLL", "SLLI"):
                value = (a << amount) & MASK32
            elif arith:
                value = (a >> amount) | ((MASK32 << (32 - amount)) & MASK32 if a >> 31 else 0)
            else:
                value = a >> amount
            hits |= 1 << (B_SHIFT + ((amount == 0) << 2 | (a >> 31) << 1 | arith))
        elif m == "LUI":
            value = (imm << 12) & MASK32
        elif m == "AUIPC":
            value = (pc + (imm << 12)) & MASK32
        elif m in _LOAD_BYTES:
            size = _LOAD_BYTES[m]
            addr = (a + imm) & MASK32
            mis = addr & (size - 1) != 0
            oor = addr > isa.MEM_SIZE - size
            hits |= 1 << (B_LOAD_FAULT + (mis << 1 | oor))
            if mis or oor:
                cause = isa.CAUSE_MISALIGNED_LOAD if mis else isa.CAUSE_LOAD_ACCESS
                event, target = self._trap(pc, word, cause, addr)
                return None, 0, event, target, hits | 1 << (B_CAUSE + cause)
            raw = int.from_bytes(self.mem[addr:addr + size], "little")
            signed = m in _SIGNED_LOADS
            msb = raw >> (8 * size - 1)
            hits |= 1 << (B_LOADEXT + (signed << 1 | msb))
            value = _sx(raw, 8 * size) if signed else raw
        elif m in _STORE_BYTES:
            size = _STORE_BYTES[m]
            addr = (a + imm) & MASK32
            mis = addr & (size - 1) != 0
            oor = addr > isa.MEM_SIZE - size
            hits |= 1 << (B_STORE_FAULT + (mis << 1 | oor))
            if mis or oor:
                cause = isa.CAUSE_MISALIGNED_STORE if mis else isa.CAUSE_STORE_ACCESS
                event, target = self._trap(pc, word, cause, addr)
                return None, 0, event, target, hits | 1 << (B_CAUSE + cause)
            data = b & ((1 << (8 * size)) - 1)
            self.mem[addr:addr + size] = data.to_bytes(size, "little")
            mem_writes = ((addr, size, data),)
            idx = (addr >> 4) & (LINES - 1)
            lv = self.valid[idx]
            tm = self.tags[idx] == addr >> 8
            hits |= 1 << (B_SNOOP + (4 | lv << 1 | tm))
            if lv and tm and not bugs.CACHE_INCOHERENCE:
                self.valid[idx] = False
        elif m in isa.BRANCH_OPS:
            if m == "BEQ":
                taken = a == b
            elif m == "BNE":
                taken = a != b
            elif m == "BLT":
                taken = (a ^ 0x80000000) < (b ^ 0x80000000)
            elif m == "BGE":
                taken = (a ^ 0x80000000) >= (b ^ 0x80000000)
            elif m == "BLTU":
                taken = a < b
            else:
                taken = a >= b
            hits |= 1 << (B_BRANCH[m] + (0 if taken else 1))
            if taken:
                target = (pc + imm) & MASK32
                hits |= 1 << (B_JMIS + (2 | (target >> 1) & 1))
                if target & 3:
                    event, target = self._trap(pc, word, isa.CAUSE_MISALIGNED_FETCH)
                    return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_MISALIGNED_FETCH)
                redirect = target
        elif m in ("JAL", "JALR"):
            target = (pc + imm) & MASK32 if m == "JAL" else (a + imm) & (MASK32 ^ 1)
            hits |= 1 << (B_JMIS + (2 | (target >> 1) & 1))
            if target & 3:
                event, target = self._trap(pc, word, isa.CAUSE_MISALIGNED_FETCH)
                return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_MISALIGNED_FETCH)
            value = nxt
            redirect = target
        elif m == "FENCE.I":
            self.valid = [False] * LINES
            self.cstate = FLUSH
            self._flush_pending = 1
            hits |= 1 << B_FLUSH
            redirect = nxt
        elif m == "ECALL":
            cause = isa.CAUSE_ECALL_MACHINE if csr[isa.CSR_STATUS] & 1 else isa.CAUSE_ECALL_USER
            event, target = self._trap(pc, word, cause)
            return None, 0, event, target, hits | 1 << (B_CAUSE + cause)
        elif m == "EBREAK":
            event, target = self._trap(pc, word, isa.CAUSE_BREAKPOINT)
            return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_BREAKPOINT)
        elif m == "MRET":
            if not csr[isa.CSR_STATUS] & 1:
                event, target = self._trap(pc, word, isa.CAUSE_ILLEGAL)
                return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_ILLEGAL)
            status = csr[isa.CSR_ESTATUS]
            csr[isa.CSR_STATUS] = status
            csr_writes = ((isa.CSR_STATUS, status),)
            hits |= 1 << (B_MRET_USER + (0 if status & 1 == 0 else 1))
            redirect = csr[isa.CSR_EPCR]
        else:  # CSRRW / CSRRS / CSRRC
            addr = imm
            rule = isa.CSR_MAP.get(addr)
            writes = m == "CSRRW" or insn.rs1 != 0
            machine = csr[isa.CSR_STATUS] & 1
            hits |= 1 << (B_CSRWRITE + (0 if writes else 1))
            if rule is None:
                event, target = self._trap(pc, word, isa.CAUSE_ILLEGAL)
                return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_ILLEGAL)
            guarded = rule.machine_only and not (bugs.PRIV_EPCR and addr == isa.CSR_EPCR)
            hits |= 1 << (B_CSR_ACCESS + (rule.machine_only << 3 | (not machine) << 2
                                          | writes << 1 | rule.read_only))
            if (guarded and not machine) or (writes and rule.read_only):
                event, target = self._trap(pc, word, isa.CAUSE_ILLEGAL)
                return None, 0, event, target, hits | 1 << (B_CAUSE + isa.CAUSE_ILLEGAL)
            old = self.instret & MASK32 if addr == isa.CSR_INSTRET else csr[addr]
            if writes:
                is_eear = addr == isa.CSR_EEAR
                hits |= 1 << (B_EEAR + (4 | is_eear << 1 | machine))
                if m == "CSRRW":
                    new = a
                elif m == "CSRRS":
                    new = old | a
                else:
                    new = old & ~a
                new &= CSR_WRITE_MASK[addr]
                if not (is_eear and bugs.EEAR_RO):
                    csr[addr] = new
                    csr_writes = ((addr, new),)
            value = old

        gpr_writes = ((rd, value),) if value is not None and rd else ()
        event = CommitEvent(0, pc, word, gpr_writes, csr_writes, mem_writes, None)
        return (rd if value is not None else None), (value or 0), event, redirect, hits

    # ---- one clock -----------------------------------------------------------
    def cycle(self) -> tuple[CommitEvent | None, int]:
        """Advance one clock. Returns the committed event (if any) and the coverage bits hit."""
        hits = 0
        self._flush_pending = 0
        prev_state = self.cstate
        prev_mode = self.csr[isa.CSR_STATUS] & 1
        redirect = None
        new_xw = None
        fx = self.fx

        # X
        if self._drain is None and fx is not None:
            pc = fx[0]
            if pc == self.halt_pc:
                self.stopped = STATUS_HALTED
            else:
                rd, value, event, redirect, h = self._execute(*fx)
                hits |= h
                is_ebreak = fx[2] is None and fx[1] == 0x00100073
                hits |= 1 << (B_INSTRET + (2 | is_ebreak))
                if not (is_ebreak and self.bugs.INSTRET_EBREAK):
                    self.instret += 1
                new_xw = (rd, value, event)
                if event.exception is not None and in_handler(pc):
                    self._drain = STATUS_DOUBLEFAULT
        else:
            hits |= 1 << B_INSTRET
        hits |= 1 << (B_REDIRECT + (0 if redirect is not None else 1))
        hits |= 1 << (B_PCSEL + (redirect is not None))

        # W
        committed = None
        xw = self.xw
        if xw is not None:
            rd = xw[0]
            if rd:
                self.gpr[rd] = xw[1]
            committed = xw[2]
            committed.seq = self.commits
            self.commits += 1
        self.xw = new_xw

        # F
        bus = None
        new_fx = None
        if self.stopped is not None or self._drain is not None:
            pass
        elif redirect is not None:
            self.fetch_pc = redirect
            if self.cstate == REFILL:
                self.cstate = IDLE
        else:
            pc = self.fetch_pc
            protected = pc >= isa.NO_FETCH_BASE
            hits |= 1 << (B_PROTECT + (protected << 1 | (pc >= isa.MEM_SIZE)))
            state = self.cstate
            if state == FLUSH:
                self.cstate = IDLE
            elif protected:
                cause = isa.CAUSE_FETCH_PAGE_FAULT if self.bugs.EXC_TYPE else isa.CAUSE_FETCH_ACCESS
                new_fx = (pc, 0, cause)
                self.fetch_pc = (pc + 4) & MASK32
            elif state == REFILL:
                self.refill_left -= 1
                if self.refill_left == 0:
                    idx = (pc >> 4) & (LINES - 1)
                    base = pc & ~(LINE_BYTES - 1)
                    self.lines[idx] = bytes(self.mem[base:base + LINE_BYTES])
                    self.tags[idx] = pc >> 8
                    self.valid[idx] = True
                    self.cstate = LOOKUP
                    hits |= 1 << B_FILL
            else:
                idx = (pc >> 4) & (LINES - 1)
                if self.valid[idx] and self.tags[idx] == pc >> 8:
                    off = pc & (LINE_BYTES - 1)
                    word = int.from_bytes(self.lines[idx][off:off + 4], "little")
                    new_fx = (pc, word, None)
                    bus = word
                    self.fetch_pc = (pc + 4) & MASK32
                    self.cstate = LOOKUP
                    hits |= 1 << B_HIT
                else:
                    self.cstate = REFILL
                    self.refill_left = REFILL_LATENCY
                    hits |= 1 << (B_HIT + 1)
        self.fx = new_fx

        # state-holding probes
        state = self.cstate
        hits |= 1 << (B_CACHE_FSM + state) | 1 << (B_CACHE_FSM + 4 + prev_state * 4 + state)
        mode = self.csr[isa.CSR_STATUS] & 1
        hits |= 1 << (B_MODE_FSM + mode) | 1 << (B_MODE_FSM + 2 + prev_mode * 2 + mode)
        hits |= 1 << (B_CTRLREG + (self._flush_pending << 1 | (state != FLUSH)))
        hits |= self._toggles(new_fx, new_xw, bus, mode, state)
        self.cycles += 1
        return committed, hits

    def _toggles(self, fx, xw, bus, mode, state) -> int:
        sig = self._sig
        csr = self.csr
        new = {
            "fx.instr": fx[1] if fx is not None else 0,
            "fx.pc": self.fetch_pc & 0xFFFF,
            "xw.result": xw[1] if xw is not None else sig["xw.result"],
            "xw.rd": (xw[0] or 0) if xw is not None else sig["xw.rd"],
            "csr.flags": csr[isa.CSR_FLAGS],
            "csr.mode": mode,
            "csr.epcr": csr[isa.CSR_EPCR] & 0xFFFF,
            "csr.eear": csr[isa.CSR_EEAR] & 0xFFFF,
            "icache.state": state,
        }
        hits = 0
        for name, value in new.items():
            old = sig[name]
            if old != value:
                base, width = B_TOGGLE[name]
                hits |= (~old & value) << base | (old & ~value) << (base + width)
                sig[name] = value
        old_v, old_z = self._bus
        new_v, new_z = (0, MASK32) if bus is None else (bus, 0)
        if (old_v, old_z) != (new_v, new_z):
            driven = ~old_z & ~new_z & MASK32
            to_z = ~old_z & new_z
            from_z = old_z & ~new_z
            parts = (driven & ~old_v & new_v, driven & old_v & ~new_v, to_z & ~old_v,
                     to_z & old_v, from_z & ~new_v, from_z & new_v)
            for k, p in enumerate(parts):
                if p:
                    hits |= (p & MASK32) << (B_BUS + 32 * k)
            self._bus = (new_v, new_z)
        return hits


def dut_reset(image: bytes, entry_pc: int, bugs: BugConfig = NO_BUGS,
              manifest: cov.Manifest | None = None) -> DutState:
    if manifest is not None and manifest.id != DUT_MANIFEST.id:
        raise ManifestMismatch(f"manifest {manifest.id} does not describe this DUT build ({DUT_MANIFEST.id})")
    return DutState(image, entry_pc, bugs)


def dut_cycle(state: DutState) -> tuple[CommitEvent | None, cov.CoverageMap]:
    event, hits = state.cycle()
    return event, cov.CoverageMap(DUT_MANIFEST, hits)


def dut_run(state: DutState, max_cycles: int = DEFAULT_MAX_CYCLES, halt_pc: int | None = None,
            max_commits: int | None = None) -> tuple[ArchTrace, cov.CoverageMap, str]:
    """Clock the core until halt, double fault, or budget (cycles, or commits if given)."""
    if max_cycles < 1:
        raise ValueError("max_cycles must be >= 1")
    state.halt_pc = halt_pc
    events: list[CommitEvent] = []
    bits = 0
    status = STATUS_BUDGET
    cycle = state.cycle
    for _ in range(max_cycles):
        event, hits = cycle()
        bits |= hits
        if event is not None:
            events.append(event)
            if state._drain is not None and state.xw is None:
                status = state._drain
                break
            if max_commits is not None and len(events) >= max_commits:
                break
        if state.stopped is not None:
            status = state.stopped
            break
    return ArchTrace(events, status), cov.CoverageMap(DUT_MANIFEST, bits), status
