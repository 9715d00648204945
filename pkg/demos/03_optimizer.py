"""
Choosing instructions and mutations
===================================

Profiling runs each (instruction, mutation) pair in isolation and records
which coverage points it reaches. A set cover over that matrix gives a small
set of pairs that still reaches every profiled point. The fuzzer then draws
only from those pairs.

A full profile takes about 20 seconds. This demo profiles a handful of pairs
so it finishes quickly.
"""

import random

from procfuzz import optimizer
from procfuzz.weights import MutationId

pairs = [(i, m) for i in ("ADD", "SUB", "LW", "SW", "BEQ", "CSRRW")
         for m in (MutationId.M0, MutationId.M9, MutationId.M11)]
matrix = optimizer.profile(runs_per_pair=2, rng=random.Random(0), pairs=pairs)
print(f"{len(matrix.pairs)} pairs x {len(matrix.points)} points")

# %%
# Points per pair: some pairs reach far more of the core than others.
hits = matrix.d.sum(axis=1)
for (instr, m), n in sorted(zip(matrix.pairs, hits), key=lambda t: -t[1])[:6]:
    print(f"  {instr:<6} {m.name:<4} {n}")

# %%
# Greedy cover versus the exact minimum (exact is feasible for <= 20 pairs).
greedy = optimizer.greedy_rows(matrix)
exact = optimizer.exact_rows(matrix)
print("greedy:", [matrix.pairs[r] for r in greedy])
print("exact: ", [matrix.pairs[r] for r in exact])
assert matrix.is_feasible(greedy) and matrix.is_feasible(exact)

# %%
# The chosen pairs become a weight table for the fuzzer.
weights = optimizer.weights_from(matrix, greedy)
print(weights.to_json()["w"])
