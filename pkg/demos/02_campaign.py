"""
A short fuzzing campaign
========================

The fuzzer starts from random programs. It mutates queued entries and keeps
any mutant that reaches a coverage point nobody has reached before. Here we
run two equal budgets, one with coverage feedback and one without, and compare
how much of the core's six-metric universe each one reaches.
"""

import numpy as np

from procfuzz import coverage as cov
from procfuzz.dut.bugs import BugConfig
from procfuzz.dut.core import DUT_MANIFEST
from procfuzz.engine import FuzzConfig, feedback_hits, fuzz_loop

BUDGET = 20_000          # retired test instructions

# %%
guided = fuzz_loop(FuzzConfig(max_inputs=None, max_instructions=BUDGET))
random_only = fuzz_loop(FuzzConfig(max_inputs=None, max_instructions=BUDGET, feedback_enabled=False))
universe = DUT_MANIFEST.metric_mask(cov.FEEDBACK_DEFAULT).bit_count()
print(f"universe: {universe} points")
print(f"feedback: {feedback_hits(guided)} points, corpus {guided.corpus_size}")
print(f"random:   {feedback_hits(random_only)} points")

# %%
# Coverage curves, sampled on a common grid of instruction counts.
grid = np.linspace(0, BUDGET, 11)
for name, rep in (("feedback", guided), ("random", random_only)):
    xs, ys = np.array(rep.curve).T
    sampled = np.interp(grid, xs, ys)
    print(f"{name:<9}", " ".join(f"{v:4.0f}" for v in sampled))

# %%
# At this small budget fresh random programs do about as well as the guided
# run, sometimes better. Feedback pulls ahead with optimized weights and a
# 100k-instruction budget: see test_c5_guidance_benefit.

# %%
# Per-metric totals for the guided run.
for metric, t in guided.coverage["totals"].items():
    print(f"  {metric:<10} {t['hit']:>4} / {t['universe']}")

# %%
# Turn on a bug and stop at the first mismatch.
hunt = fuzz_loop(FuzzConfig(max_inputs=None, max_instructions=BUDGET, stop_on_mismatch=True,
                            bugs=BugConfig.of("EEAR_RO")))
m = hunt.first_mismatch
print(f"EEAR_RO found after {m.instructions} retired TIs: event {m.event_index} {m.field}")
