import random

import pytest

from procfuzz import coverage as cov
from procfuzz.dut import core
from procfuzz.dut.bugs import BUG_DESCRIPTIONS, CORE_BUGS, NO_BUGS, BugConfig
from procfuzz.dut.controller import CONTROLLER_MANIFEST, controller_run
from procfuzz.engine import run_input
from procfuzz.stimulus import gen_seed, mutate, select_im

from .helpers import asm, program


def mutated_programs(n, seed):
    rng = random.Random(seed)
    for _ in range(n):
        p = gen_seed(rng)
        for _ in range(rng.randint(0, 6)):
            idx, _, m = select_im(None, rng, p)
            p = mutate(p, idx, m, rng)
        yield p


def test_bugs_off_dut_matches_reference():
    for p in mutated_programs(300, seed=7):
        r = run_input(p, NO_BUGS)
        assert r.mismatches == [], p.digest()


def test_dut_is_deterministic():
    p = next(mutated_programs(1, seed=3))
    a, b = run_input(p), run_input(p)
    assert a.dut_trace.events == b.dut_trace.events
    assert a.coverage == b.coverage


def test_coverage_stays_inside_manifest():
    for p in mutated_programs(50, seed=11):
        bits = run_input(p).coverage.bits
        assert bits >> core.DUT_MANIFEST.size == 0


def test_fence_i_flushes_the_cache():
    r = run_input(program(asm("FENCE.I")))
    assert cov.CoveragePoint("statement", "icache.flush", 0) in r.coverage.points()


def test_illegal_group_probe():
    assert core.ILLEGAL_GROUPS[core.illegal_group(0x0000005B)] == "CUSTOM-2"
    assert core.ILLEGAL_GROUPS[core.illegal_group(0x0000007F)] == "OTHER"
    assert core.ILLEGAL_GROUPS[core.illegal_group(0x00000000)] == "NOT32"
    r = run_input(program(0x02007033))      # OP with funct7=1 (REMU in RV32M, illegal here)
    hit = {p.sub for p in r.coverage.points() if p.unit == "decode.illegal_group"}
    assert core.ILLEGAL_GROUPS.index("OP") in hit


def test_bug_config_parsing():
    assert BugConfig.of("CARRY_SUB").enabled == ("CARRY_SUB",)
    assert len(CORE_BUGS) == 11
    assert set(BugConfig.all_on().enabled) == set(BUG_DESCRIPTIONS)
    with pytest.raises(ValueError):
        BugConfig.of("NOPE")


@pytest.mark.parametrize("bug", CORE_BUGS)
def test_single_bug_leaves_plain_alu_code_alone(bug):
    # a program with no flag-setting, trapping or self-modifying behaviour
    p = program(asm("ADDI", rd=1, rs1=0, imm=3), asm("XOR", rd=2, rs1=1, rs2=1), asm("ORI", rd=3, rs1=2, imm=9))
    assert run_input(p, BugConfig.of(bug)).mismatches == []


def test_controller_golden_is_clean_against_itself():
    rng = random.Random(0)
    for _ in range(200):
        seq = [tuple(rng.getrandbits(1) for _ in range(5)) for _ in range(4)]
        assert controller_run(seq, NO_BUGS)[0] == controller_run(seq, NO_BUGS)[0]


def test_controller_state_floats_until_first_clock():
    _, cmap = controller_run([(0, 0, 0, 0, 0)], NO_BUGS)
    toggles = {p for p in cmap.points() if p.unit == "blk5.state"}
    assert any(p.sub >= 2 * 3 for p in toggles)      # a Z transition was observed
    assert cmap.manifest == CONTROLLER_MANIFEST
