import json

from procfuzz import grm
from procfuzz.dut.bugs import BugConfig
from procfuzz.engine import FuzzConfig, diff_traces, fuzz_loop, run_input
from procfuzz.grm import ArchTrace, CommitEvent
from procfuzz.stimulus import Program

from .helpers import asm, program


def ev(seq, pc, word=0x13, gpr=(), csr=(), mem=(), exc=None):
    return CommitEvent(seq, pc, word, tuple(gpr), tuple(csr), tuple(mem), exc)


def test_diff_traces_reports_first_field():
    a = ArchTrace([ev(0, 0x400), ev(1, 0x404, gpr=[(1, 2)])], "halted")
    b = ArchTrace([ev(0, 0x400), ev(1, 0x404, gpr=[(1, 3)])], "halted")
    [m] = diff_traces(a, b)
    assert (m.event_index, m.field, m.dut, m.grm) == (1, "gpr_write", [[1, 2]], [[1, 3]])


def test_diff_traces_ignores_write_order():
    a = ArchTrace([ev(0, 0x400, csr=[(0x341, 1), (0x300, 0)])], "halted")
    b = ArchTrace([ev(0, 0x400, csr=[(0x300, 0), (0x341, 1)])], "halted")
    assert diff_traces(a, b) == []


def test_diff_traces_length():
    a = ArchTrace([ev(0, 0x400)], "halted")
    b = ArchTrace([ev(0, 0x400), ev(1, 0x404)], "halted")
    [m] = diff_traces(a, b)
    assert (m.field, m.event_index) == ("trace-length", 1)


def test_run_input_counts_both_passes():
    r = run_input(program())
    assert r.status == grm.STATUS_HALTED
    assert r.retired_tis == 40


def test_nonterminating_program_compares_a_window():
    loop = asm("JAL", rd=0, imm=0)
    r = run_input(program(loop))
    assert r.status == grm.STATUS_BUDGET
    assert r.mismatches == []
    assert len(r.dut_trace) == len(r.grm_trace)


def _strip(d):
    d = dict(d)
    d.pop("wall_clock")
    return d


def test_campaign_is_deterministic():
    cfg = FuzzConfig(max_inputs=120, rng_seed=5)
    a, b = fuzz_loop(cfg), fuzz_loop(cfg)
    assert _strip(a.to_dict()) == _strip(b.to_dict())


def test_lanes_do_not_change_the_campaign():
    a = fuzz_loop(FuzzConfig(max_inputs=80, rng_seed=2))
    b = fuzz_loop(FuzzConfig(max_inputs=80, rng_seed=2, lanes=2))
    assert _strip(a.to_dict())["coverage"] == _strip(b.to_dict())["coverage"]
    assert a.global_bits == b.global_bits and a.corpus_size == b.corpus_size


def test_input_budget_counts_mutants_only():
    rep = fuzz_loop(FuzzConfig(max_inputs=25, seeds=4))
    assert rep.inputs == 29


def test_instruction_budget():
    rep = fuzz_loop(FuzzConfig(max_inputs=None, max_instructions=3000))
    assert 3000 <= rep.instructions < 3000 + 200


def test_pure_random_keeps_no_corpus():
    rep = fuzz_loop(FuzzConfig(max_inputs=60, feedback_enabled=False))
    assert rep.corpus_size == 0 and rep.inputs == 60


def test_coverage_curve_is_monotone():
    rep = fuzz_loop(FuzzConfig(max_inputs=150))
    xs, ys = zip(*rep.curve)
    assert list(xs) == sorted(xs) and list(ys) == sorted(ys)


def test_artifacts_and_mismatch_replay(tmp_path):
    cfg = FuzzConfig(max_inputs=200, bugs=BugConfig.of("CARRY_SUB"), out=tmp_path, stop_on_mismatch=True)
    rep = fuzz_loop(cfg)
    assert rep.mismatches
    doc = json.loads((tmp_path / "campaign.json").read_text())
    assert doc["config"]["bugs.enabled"] == ["CARRY_SUB"]
    assert (tmp_path / "coverage.json").exists()
    lines = (tmp_path / "mismatches.jsonl").read_text().splitlines()
    first = json.loads(lines[0])
    prog = Program.load(first["program_path"])
    again = run_input(prog, cfg.bugs).mismatches[0]
    assert (again.event_index, again.field) == (first["event_index"], first["field"])
    assert list((tmp_path / "corpus").glob("*.thzi"))
