"""Campaign loop: run inputs on the DUT and the reference model, diff, keep what adds coverage."""

from __future__ import annotations

import json
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import coverage as cov
from . import grm
from .dut import core
from .dut.bugs import NO_BUGS, BugConfig
from .grm import ArchTrace, CommitEvent
from .stimulus import Corpus, Program, gen_seed, mutate, retain, select_im
from .weights import WeightTable

log = logging.getLogger(__name__)

HANDLER_SLACK = 64
FRESH_SEEDS_PER_ENTRY = 10
HAVOC_DEPTH = 8
FIELDS = ("pc", "instr_word", "gpr_write", "csr_write", "mem_write", "exception", "trace-length")
COUNTING = "retired test instructions (DUT commits inside the TI region)"


@dataclass
class MismatchReport:
    event_index: int
    field: str
    dut: object
    grm: object
    program_hash: str = ""
    program_path: str | None = None
    bugs: tuple[str, ...] = ()
    rng_seed: int | None = None
    instructions: int = 0        # retired TIs up to and including this input, campaign-wide
    input_index: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bugs"] = list(self.bugs)
        return d

    @property
    def bucket(self) -> tuple:
        return self.field, self.event_index, self.bugs


def event_fields(e: CommitEvent) -> tuple:
    return (e.pc, e.instr_word, sorted(e.gpr_writes), sorted(e.csr_writes),
            sorted(e.mem_writes), e.exception)


def diff_traces(dut: ArchTrace, ref: ArchTrace) -> list[MismatchReport]:
    """First field-level divergence between the two traces, if any."""
    for k, (a, b) in enumerate(zip(dut.events, ref.events)):
        fa, fb = event_fields(a), event_fields(b)
        for name, x, y in zip(FIELDS, fa, fb):
            if x != y:
                return [MismatchReport(k, name, _plain(x), _plain(y))]
    if len(dut) != len(ref):
        return [MismatchReport(min(len(dut), len(ref)), "trace-length", len(dut), len(ref))]
    return []


def _plain(v):
    if isinstance(v, list):
        return [list(x) for x in v]
    return v


@dataclass
class RunResult:
    dut_trace: ArchTrace
    grm_trace: ArchTrace
    coverage: cov.CoverageMap
    mismatches: list[MismatchReport]
    status: str          # halted | doublefault | budget (reference model did not terminate) | hang
    retired_tis: int


def run_input(program: Program, bugs: BugConfig = NO_BUGS,
              max_cycles: int = core.DEFAULT_MAX_CYCLES) -> RunResult:
    """Run one program on both models and compare their commit traces.

    The reference model runs first with an instruction budget.  When it does
    not terminate inside that budget only that window is compared, and the DUT
    is stopped after the same number of commits.
    """
    image = program.image()
    # the TIs run twice (machine pass, then user pass)
    budget = 2 * (len(program.ci_words) + len(program.ti_words)) + HANDLER_SLACK
    ref = grm.grm_run(grm.grm_reset(image, program.entry_pc), budget, program.halt_pc)
    window = len(ref) if ref.status == grm.STATUS_BUDGET else None
    state = core.DutState(image, program.entry_pc, bugs)
    dut, cmap, dstatus = core.dut_run(state, max_cycles, program.halt_pc, max_commits=window)
    mismatches = diff_traces(dut, ref)
    if dstatus == grm.STATUS_BUDGET and (window is None or len(dut) < window):
        status = "hang"
    else:
        status = ref.status
    lo, hi = program.ti_base, program.ti_end
    retired = sum(1 for e in dut.events if lo <= e.pc < hi)
    return RunResult(dut, ref, cmap, mismatches, status, retired)


@dataclass
class _Outcome:
    bits: int
    retired: int
    status: str
    mismatch: MismatchReport | None


def _evaluate(args) -> _Outcome:
    program, bugs, max_cycles = args
    r = run_input(program, bugs, max_cycles)
    return _Outcome(r.coverage.bits, r.retired_tis, r.status, r.mismatches[0] if r.mismatches else None)


@dataclass
class FuzzConfig:
    bugs: BugConfig = NO_BUGS
    lanes: int = 1
    max_inputs: int | None = 1000          # mutants, not counting seeds
    max_instructions: int | None = None    # retired TIs
    wall_clock: float | None = None        # seconds
    mutants_per_entry: int = 50
    seeds: int = 10
    max_cycles: int = core.DEFAULT_MAX_CYCLES
    feedback: tuple[str, ...] = cov.FEEDBACK_DEFAULT
    rng_seed: int = 0
    out: Path | None = None
    weights: WeightTable | None = None
    feedback_enabled: bool = True          # False: every input is a fresh seed, nothing retained
    stop_on_mismatch: bool = False
    havoc: int = HAVOC_DEPTH               # up to this many stacked mutations per mutant
    fresh_seeds: int = FRESH_SEEDS_PER_ENTRY

    def snapshot(self) -> dict:
        return {
            "bugs.enabled": list(self.bugs.enabled),
            "fuzz.lanes": self.lanes,
            "fuzz.max_inputs": self.max_inputs,
            "fuzz.max_instructions": self.max_instructions,
            "fuzz.wall_clock": self.wall_clock,
            "fuzz.mutants_per_entry": self.mutants_per_entry,
            "fuzz.seeds": self.seeds,
            "fuzz.feedback_enabled": self.feedback_enabled,
            "fuzz.stop_on_mismatch": self.stop_on_mismatch,
            "fuzz.havoc": self.havoc,
            "fuzz.fresh_seeds": self.fresh_seeds,
            "dut.max_cycles": self.max_cycles,
            "feedback.metrics": list(self.feedback),
            "rng.seed": self.rng_seed,
            "paths.out": str(self.out) if self.out is not None else None,
            "weights": "uniform" if self.weights is None or self.weights.is_uniform else "optimized",
            "scheduling": {"queue": "fifo", "mutants_per_entry": self.mutants_per_entry},
        }


@dataclass
class CampaignReport:
    config: dict
    inputs: int = 0
    instructions: int = 0
    curve: list[tuple[int, int]] = field(default_factory=list)
    mismatches: list[MismatchReport] = field(default_factory=list)
    hangs: list[dict] = field(default_factory=list)
    nonterminating: int = 0
    corpus_size: int = 0
    coverage: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    global_bits: int = 0

    @property
    def first_mismatch(self) -> MismatchReport | None:
        return self.mismatches[0] if self.mismatches else None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "counting": COUNTING,
            "inputs": self.inputs,
            "instructions": self.instructions,
            "corpus_size": self.corpus_size,
            "nonterminating_inputs": self.nonterminating,
            "curve": [list(p) for p in self.curve],
            "mismatches": [m.to_dict() for m in self.mismatches],
            "hangs": self.hangs,
            "coverage": self.coverage,
            "wall_clock": self.wall_clock,
        }


class _Campaign:
    def __init__(self, cfg: FuzzConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.rng_seed)
        self.manifest = core.DUT_MANIFEST
        self.mask = self.manifest.metric_mask(cfg.feedback)
        self.global_bits = 0
        self.report = CampaignReport(cfg.snapshot())
        out = cfg.out
        if out is not None:
            out = Path(out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "mismatches").mkdir(exist_ok=True)
            (out / "mismatches.jsonl").write_text("")
        self.out = out
        self.corpus = Corpus(out / "corpus" if out is not None else None)
        self.started = time.monotonic()
        self.mutants = 0
        self.done = False
        self.pool = ProcessPoolExecutor(cfg.lanes) if cfg.lanes > 1 else None

    def budget_left(self) -> bool:
        cfg, rep = self.cfg, self.report
        if cfg.max_instructions is not None and rep.instructions >= cfg.max_instructions:
            return False
        if cfg.wall_clock is not None and time.monotonic() - self.started >= cfg.wall_clock:
            return False
        return not self.done

    def run_batch(self, programs: list[Program], count_as_mutants: bool) -> None:
        cfg = self.cfg
        work = [(p, cfg.bugs, cfg.max_cycles) for p in programs]
        if self.pool is not None:
            outcomes = self.pool.map(_evaluate, work, chunksize=max(1, len(work) // (4 * cfg.lanes)))
        else:
            outcomes = map(_evaluate, work)
        # results are consumed in submission order, so lanes do not change the campaign
        for program, res in zip(programs, outcomes):
            if count_as_mutants:
                if cfg.max_inputs is not None and self.mutants >= cfg.max_inputs:
                    self.done = True
                if not self.budget_left():
                    break
                self.mutants += 1
            self.absorb(program, res, seed=not count_as_mutants)

    def absorb(self, program: Program, res: _Outcome, seed: bool = False) -> None:
        cfg, rep = self.cfg, self.report
        index = rep.inputs
        rep.inputs += 1
        rep.instructions += res.retired
        new = res.bits & self.mask & ~self.global_bits
        self.global_bits |= res.bits
        if cfg.feedback_enabled:
            if seed:
                self.corpus.add(program)      # initial seeds always enter the queue
            else:
                retain(self.corpus, program, new)
        if new or not rep.curve:
            rep.curve.append((rep.instructions, (self.global_bits & self.mask).bit_count()))
        if res.status == "hang":
            rep.hangs.append({"input": index, "hash": program.digest()})
        elif res.status == grm.STATUS_BUDGET:
            rep.nonterminating += 1
        if res.mismatch is not None:
            m = res.mismatch
            m.program_hash = program.digest()
            m.bugs = cfg.bugs.enabled
            m.rng_seed = cfg.rng_seed
            m.instructions = rep.instructions
            m.input_index = index
            if self.out is not None:
                path = self.out / "mismatches" / f"{index:06d}-{m.program_hash}.thzi"
                program.save(path)
                m.program_path = str(path)
                with open(self.out / "mismatches.jsonl", "a") as fh:
                    fh.write(json.dumps(m.to_dict()) + "\n")
            rep.mismatches.append(m)
            if cfg.stop_on_mismatch:
                self.done = True

    def run(self) -> CampaignReport:
        cfg = self.cfg
        try:
            if cfg.feedback_enabled:
                self.run_batch([gen_seed(self.rng, cfg.weights) for _ in range(cfg.seeds)], False)
                while self.budget_left() and len(self.corpus):
                    _, parent = self.corpus.next()
                    batch = []
                    for _ in range(cfg.mutants_per_entry):
                        child = parent
                        for _ in range(self.rng.randint(1, cfg.havoc)):
                            idx, _, m = select_im(cfg.weights, self.rng, child)
                            child = mutate(child, idx, m, self.rng)
                        batch.append(child)
                    # fresh seeds keep new instruction mixes flowing in
                    batch.extend(gen_seed(self.rng, cfg.weights) for _ in range(cfg.fresh_seeds))
                    self.run_batch(batch, True)
            else:
                while self.budget_left():
                    batch = [gen_seed(self.rng, cfg.weights) for _ in range(cfg.mutants_per_entry)]
                    self.run_batch(batch, True)
        finally:
            if self.pool is not None:
                self.pool.shutdown()
        return self.finish()

    def finish(self) -> CampaignReport:
        rep = self.report
        rep.wall_clock = round(time.monotonic() - self.started, 3)
        rep.corpus_size = len(self.corpus)
        rep.global_bits = self.global_bits
        gmap = cov.CoverageMap(self.manifest, self.global_bits)
        last = (rep.instructions, (self.global_bits & self.mask).bit_count())
        if not rep.curve or rep.curve[-1] != last:
            rep.curve.append(last)
        rep.coverage = cov.coverage_report(gmap, rep.curve)
        if self.out is not None:
            (self.out / "campaign.json").write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
            cov_doc = dict(rep.coverage, map=cov.map_to_json(gmap))
            (self.out / "coverage.json").write_text(json.dumps(cov_doc, indent=1) + "\n")
        return rep


def fuzz_loop(config: FuzzConfig) -> CampaignReport:
    """Seed the corpus, then mutate FIFO entries until a stop condition is met."""
    return _Campaign(config).run()


def feedback_hits(report: CampaignReport, metrics=cov.FEEDBACK_DEFAULT) -> int:
    return (report.global_bits & core.DUT_MANIFEST.metric_mask(metrics)).bit_count()
