from __future__ import annotations

from dataclasses import dataclass, fields

# toggle name -> the kind of defect it injects
BUG_DESCRIPTIONS = {
    "FENCE_FIELDS": "decoder rejects FENCE.I unless imm and rs1 are zero",
    "EXC_TYPE": "frontend forwards a fixed page-fault cause instead of the fetch access fault",
    "ILLEGAL_ACCEPT": "reserved opcode 0x5B/funct3=0 executes as ADD instead of trapping",
    "CACHE_INCOHERENCE": "stores do not invalidate matching I-cache lines",
    "CARRY_SUB": "SUB carry (borrow) drops the +1 carry-in",
    "PRIV_EPCR": "EPCR accessible from user mode",
    "EEAR_RO": "software writes to EEAR are ignored",
    "GPR0_FWD": "forwarding network forwards values written to x0",
    "MAC_OVERFLOW": "MAC overflow ignores the product's upper bits",
    "OVERFLOW_SUB": "SUB overflow uses the ADD sign rule",
    "INSTRET_EBREAK": "EBREAK does not increment INSTRET",
    "CS_B1": "case-study controller: debug read allowed with the wrong password",
    "CS_B2": "case-study controller: vld asserted by flush or en alone",
}

CORE_BUGS = tuple(n for n in BUG_DESCRIPTIONS if not n.startswith("CS_"))
CASE_STUDY_BUGS = ("CS_B1", "CS_B2")


@dataclass(frozen=True)
class BugConfig:
    FENCE_FIELDS: bool = False
    EXC_TYPE: bool = False
    ILLEGAL_ACCEPT: bool = False
    CACHE_INCOHERENCE: bool = False
    CARRY_SUB: bool = False
    PRIV_EPCR: bool = False
    EEAR_RO: bool = False
    GPR0_FWD: bool = False
    MAC_OVERFLOW: bool = False
    OVERFLOW_SUB: bool = False
    INSTRET_EBREAK: bool = False
    CS_B1: bool = False
    CS_B2: bool = False

    @classmethod
    def of(cls, *names: str) -> "BugConfig":
        unknown = set(names) - set(BUG_DESCRIPTIONS)
        if unknown:
            raise ValueError(f"unknown bug toggles: {sorted(unknown)}")
        return cls(**{n: True for n in names})

    @classmethod
    def all_on(cls) -> "BugConfig":
        return cls.of(*BUG_DESCRIPTIONS)

    @property
    def enabled(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self) if getattr(self, f.name))


NO_BUGS = BugConfig()
