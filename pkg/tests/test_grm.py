from hypothesis import given, settings
from hypothesis import strategies as st

from procfuzz import grm, isa
from procfuzz.isa import sext

from .helpers import asm, events_at, grm_trace, program, ti_pc

u32 = st.integers(0, 0xFFFFFFFF)


@settings(max_examples=500)
@given(u32, u32)
def test_add_flags_match_wide_arithmetic(a, b):
    r, f = grm.add_flags(a, b, 0)
    assert r == (a + b) % 2**32
    assert f & isa.FLAG_CARRY == int(a + b >= 2**32)
    signed = sext(a, 32) + sext(b, 32)
    assert bool(f & isa.FLAG_OVERFLOW) == (signed != sext(r, 32))


@settings(max_examples=500)
@given(u32, u32)
def test_sub_flags_match_wide_arithmetic(a, b):
    r, f = grm.sub_flags(a, b, 0)
    assert r == (a - b) % 2**32
    assert f & isa.FLAG_CARRY == int(a < b)
    signed = sext(a, 32) - sext(b, 32)
    assert bool(f & isa.FLAG_OVERFLOW) == (signed != sext(r, 32))


@settings(max_examples=500)
@given(u32, u32, u32, st.integers(0, 3))
def test_mac_keeps_carry_and_sets_overflow(acc, a, b, old):
    r, f = grm.mac_flags(acc, a, b, old)
    full = sext(acc, 32) + sext(a, 32) * sext(b, 32)
    assert r == full % 2**32
    assert f & isa.FLAG_CARRY == old & isa.FLAG_CARRY
    assert bool(f & isa.FLAG_OVERFLOW) == (not -2**31 <= full < 2**31)


def test_nop_program_halts_after_two_passes():
    prog = program()
    t = grm_trace(prog)
    assert t.status == grm.STATUS_HALTED
    assert len(events_at(t, ti_pc(0))) == 2


def test_x0_is_never_written():
    t = grm_trace(program(asm("ADDI", rd=0, rs1=0, imm=7), asm("ADD", rd=1, rs1=0, rs2=0)))
    e = events_at(t, ti_pc(1))[0]
    assert (1, 0) in e.gpr_writes
    assert all(r != 0 for r, _ in events_at(t, ti_pc(0))[0].gpr_writes)


def test_illegal_word_traps_with_cause_2():
    t = grm_trace(program(0x0000005B))
    machine, user = events_at(t, ti_pc(0))
    assert machine.exception == isa.CAUSE_ILLEGAL
    assert user.exception == isa.CAUSE_ILLEGAL


def test_ecall_cause_depends_on_mode():
    machine, user = events_at(grm_trace(program(asm("ECALL"))), ti_pc(0))
    assert machine.exception == isa.CAUSE_ECALL_MACHINE
    assert user.exception == isa.CAUSE_ECALL_USER


def test_machine_only_csr_traps_in_user_mode():
    machine, user = events_at(grm_trace(program(asm("CSRRS", rd=1, rs1=0, imm=isa.CSR_STATUS))), ti_pc(0))
    assert machine.exception is None
    assert user.exception == isa.CAUSE_ILLEGAL


def test_instret_is_read_only():
    machine, _ = events_at(grm_trace(program(asm("CSRRW", rd=0, rs1=0, imm=isa.CSR_INSTRET))), ti_pc(0))
    assert machine.exception == isa.CAUSE_ILLEGAL


def test_fetch_from_no_fetch_region_is_access_fault():
    t = grm_trace(program(asm("LUI", rd=1, imm=0xF), asm("JALR", rd=0, rs1=1, imm=0)))
    fault = [e for e in t.events if e.pc == isa.NO_FETCH_BASE]
    assert fault and fault[0].exception == isa.CAUSE_FETCH_ACCESS


def test_misaligned_load_traps():
    machine, _ = events_at(grm_trace(program(asm("LW", rd=1, rs1=0, imm=0x401))), ti_pc(0))
    assert machine.exception == isa.CAUSE_MISALIGNED_LOAD


def test_self_modifying_store_is_visible_to_the_next_fetch():
    # overwrite TI 2 with ADDI x3, x0, 9 before it is fetched
    new = asm("ADDI", rd=3, rs1=0, imm=9)
    prog = program(asm("LUI", rd=1, imm=new >> 12), asm("ADDI", rd=1, rs1=1, imm=sext(new & 0xFFF, 12)),
                   asm("SW", rs1=0, rs2=1, imm=0x40C), 0x13)
    t = grm_trace(prog)
    e = events_at(t, ti_pc(3))[0]
    assert e.instr_word == new and (3, 9) in e.gpr_writes


def test_trace_jsonl_roundtrip():
    t = grm_trace(program(asm("ADDI", rd=1, rs1=0, imm=5), asm("SW", rs1=0, rs2=1, imm=0x7F0)))
    back = grm.ArchTrace.from_jsonl(t.to_jsonl(), t.status)
    assert back.events == t.events
