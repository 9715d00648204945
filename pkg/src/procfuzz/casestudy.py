"""Fuzz the stand-alone cache controller under three feedback metrics and compare.

The golden controller is the reference; the target has both case-study bugs
enabled.  A state divergence can only come from b1 (the password check) and a
``vld`` divergence only from b2, so each mismatch is attributed by field.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass, field

from . import coverage as cov
from .dut.bugs import NO_BUGS, BugConfig
from .dut.controller import CONTROLLER_MANIFEST, controller_run

MODES = {
    "full": cov.FEEDBACK_DEFAULT,
    "mux": ("mux",),
    "ctrlreg": ("ctrlreg",),
}
TARGET_BUGS = BugConfig.of("CS_B1", "CS_B2")
CYCLE_BUDGET = 10_000
PLATEAU = 20            # stop after this many inputs without new feedback points
SEQ_LEN = 4
SEEDS = 5
MUTANTS_PER_ENTRY = 10
FOCUS_BLOCKS = (4, 6)


@dataclass
class ModeResult:
    mode: str
    metrics: tuple[str, ...]
    feedback_universe: int
    feedback_points_blocks_4_6: int
    feedback_hit: int
    expression_blocks_4_6: tuple[int, int]
    b1_found: bool
    b2_found: bool
    b1_cycle: int | None
    b2_cycle: int | None
    inputs: int
    cycles: int
    stop: str


@dataclass
class CaseStudyReport:
    results: list[ModeResult]
    ctrlreg_universe: int
    mux_points_blocks_4_6: int
    ctrlreg_points_blocks_4_6: int
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "results": [asdict(r) for r in self.results],
            "ctrlreg_universe": self.ctrlreg_universe,
            "mux_points_blocks_4_6": self.mux_points_blocks_4_6,
            "ctrlreg_points_blocks_4_6": self.ctrlreg_points_blocks_4_6,
            "checks": self.checks,
        }


def points_in_blocks(metrics, blocks=FOCUS_BLOCKS, manifest=CONTROLLER_MANIFEST) -> int:
    return sum(manifest.points_where(m, block=b) for m in metrics for b in blocks)


def _expr_mask(blocks=FOCUS_BLOCKS) -> int:
    man = CONTROLLER_MANIFEST
    mask = 0
    for p in man.probes:
        if p.metric == "expression" and p.meta.get("block") in blocks:
            mask |= ((1 << p.size) - 1) << man.base(p.metric, p.unit)
    return mask


def controller_diff(inputs, bugs: BugConfig = TARGET_BUGS) -> tuple[int | None, int | None]:
    """First cycle at which the state (b1) and vld (b2) outputs diverge from the golden design."""
    gold, _ = controller_run(inputs, NO_BUGS)
    dut, _ = controller_run(inputs, bugs)
    b1 = next((k for k, (g, d) in enumerate(zip(gold, dut)) if g[0] != d[0]), None)
    b2 = next((k for k, (g, d) in enumerate(zip(gold, dut)) if g[1] != d[1]), None)
    return b1, b2


def _random_tuple(rng: random.Random) -> tuple[int, ...]:
    return tuple(rng.getrandbits(1) for _ in range(5))


def _mutate(seq: list[tuple[int, ...]], rng: random.Random) -> list[tuple[int, ...]]:
    seq = list(seq)
    k = rng.randrange(len(seq))
    choice = rng.randrange(3)
    if choice == 0:                                   # single bit flip
        bit = rng.randrange(5)
        t = list(seq[k])
        t[bit] ^= 1
        seq[k] = tuple(t)
    elif choice == 1:                                 # random cycle
        seq[k] = _random_tuple(rng)
    else:                                             # clone another cycle
        seq[k] = seq[rng.randrange(len(seq))]
    return seq


def fuzz_controller(mode: str, rng_seed: int = 0, budget: int = CYCLE_BUDGET,
                    plateau: int = PLATEAU) -> ModeResult:
    metrics = MODES[mode]
    man = CONTROLLER_MANIFEST
    mask = man.metric_mask(metrics)
    expr_mask = _expr_mask()
    rng = random.Random(rng_seed)
    bits = 0
    corpus: list[list[tuple[int, ...]]] = []
    inputs = cycles = idle = 0
    b1 = b2 = None
    stop = "budget"

    def run(seq) -> bool:
        nonlocal bits, inputs, cycles, b1, b2
        _, cmap = controller_run(seq, TARGET_BUGS)
        d1, d2 = controller_diff(seq)
        if b1 is None and d1 is not None:
            b1 = cycles + d1
        if b2 is None and d2 is not None:
            b2 = cycles + d2
        inputs += 1
        cycles += len(seq)
        new = cmap.bits & mask & ~bits
        bits |= cmap.bits
        return bool(new)

    for _ in range(SEEDS):
        seq = [_random_tuple(rng) for _ in range(SEQ_LEN)]
        run(seq)
        corpus.append(seq)
    k = 0
    while cycles < budget:
        parent = corpus[k % len(corpus)]
        k += 1
        for _ in range(MUTANTS_PER_ENTRY):
            if cycles >= budget:
                break
            child = _mutate(parent, rng)
            if run(child):
                corpus.append(child)
                idle = 0
            else:
                idle += 1
            if idle >= plateau:
                break
        if idle >= plateau:
            stop = "plateau"
            break

    return ModeResult(
        mode=mode,
        metrics=tuple(metrics),
        feedback_universe=(mask).bit_count(),
        feedback_points_blocks_4_6=points_in_blocks(metrics),
        feedback_hit=(bits & mask).bit_count(),
        expression_blocks_4_6=((bits & expr_mask).bit_count(), expr_mask.bit_count()),
        b1_found=b1 is not None,
        b2_found=b2 is not None,
        b1_cycle=b1,
        b2_cycle=b2,
        inputs=inputs,
        cycles=cycles,
        stop=stop,
    )


def run_casestudy(rng_seed: int = 0) -> CaseStudyReport:
    results = [fuzz_controller(mode, rng_seed) for mode in MODES]
    man = CONTROLLER_MANIFEST
    rep = CaseStudyReport(
        results=results,
        ctrlreg_universe=man.universe("ctrlreg"),
        mux_points_blocks_4_6=points_in_blocks(["mux"]),
        ctrlreg_points_blocks_4_6=points_in_blocks(["ctrlreg"]),
    )
    full = results[0]
    hit, total = full.expression_blocks_4_6
    rep.checks = {
        "full_expression_blocks_4_6_complete": hit == total,
        "full_flags_b1_and_b2": full.b1_found and full.b2_found,
        "mux_blind_to_blocks_4_6": rep.mux_points_blocks_4_6 == 0,
        "ctrlreg_blind_to_blocks_4_6": rep.ctrlreg_points_blocks_4_6 == 0,
        "ctrlreg_universe_is_32": rep.ctrlreg_universe == 32,
    }
    return rep


def format_report(rep: CaseStudyReport) -> str:
    lines = [f"{'feedback':<9} {'fb pts':>6} {'blk4/6':>6} {'expr 4/6':>8} {'b1':>6} {'b2':>6} "
             f"{'inputs':>6} {'cycles':>6}  stop"]
    for r in rep.results:
        e = f"{r.expression_blocks_4_6[0]}/{r.expression_blocks_4_6[1]}"
        lines.append(f"{r.mode:<9} {r.feedback_universe:>6} {r.feedback_points_blocks_4_6:>6} {e:>8} "
                     f"{_cyc(r.b1_cycle):>6} {_cyc(r.b2_cycle):>6} {r.inputs:>6} {r.cycles:>6}  {r.stop}")
    lines.append(f"ctrlreg universe: {rep.ctrlreg_universe} points")
    for name, ok in rep.checks.items():
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}")
    return "\n".join(lines)


def _cyc(c: int | None) -> str:
    return "-" if c is None else str(c)


__all__ = ["CaseStudyReport", "ModeResult", "controller_diff", "fuzz_controller",
           "run_casestudy", "format_report"]
