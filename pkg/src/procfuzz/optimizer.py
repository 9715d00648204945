"""Profile (instruction, mutation) pairs and pick a small covering subset of them."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import coverage as cov
from .dut import core
from .dut.bugs import NO_BUGS, BugConfig
from .stimulus import TI_COUNT, Program, mutate, random_instruction
from .weights import MutationId, Pair, WeightTable, all_pairs

PROFILE_SCHEMA = "procfuzz.profile/1"
EXACT_LIMIT = 20


class InfeasibleCover(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


@dataclass
class ProfileMatrix:
    """Boolean matrix ``d[p, c]``: pair ``p`` hit coverage point ``c`` during profiling."""

    pairs: list[Pair]
    points: list[str]
    d: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=bool).reshape(len(self.pairs), len(self.points))

    @classmethod
    def from_sets(cls, pairs, sets, meta=None) -> "ProfileMatrix":
        """Build from one set of hashable point labels per pair; columns are the union, sorted."""
        labels = sorted({str(c) for s in sets for c in s})
        col = {c: k for k, c in enumerate(labels)}
        d = np.zeros((len(pairs), len(labels)), dtype=bool)
        for r, s in enumerate(sets):
            for c in s:
                d[r, col[str(c)]] = True
        return cls(list(pairs), labels, d, dict(meta or {}))

    def row_sets(self) -> list[frozenset[int]]:
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.d]

    def covered_by(self, rows) -> np.ndarray:
        rows = list(rows)
        if not rows:
            return np.zeros(len(self.points), dtype=bool)
        return self.d[rows].any(axis=0)

    def is_feasible(self, rows) -> bool:
        return bool(self.covered_by(rows).all())

    def check(self) -> None:
        """Every listed point must be hit by at least one pair."""
        if len(self.points) and not self.d.any(axis=0).all():
            missing = [self.points[k] for k in np.flatnonzero(~self.d.any(axis=0))[:5]]
            raise InfeasibleCover(f"points hit by no pair, e.g. {missing}")

    def to_json(self) -> dict:
        return {
            "schema": PROFILE_SCHEMA,
            "meta": self.meta,
            "pairs": [[i, int(m)] for i, m in self.pairs],
            "points": self.points,
            "rows": [np.flatnonzero(row).tolist() for row in self.d],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ProfileMatrix":
        if d.get("schema") != PROFILE_SCHEMA:
            raise InfeasibleCover(f"unsupported profile schema {d.get('schema')!r}")
        try:
            pairs = [(str(i), MutationId(int(m))) for i, m in d["pairs"]]
            points = [str(p) for p in d["points"]]
            mat = np.zeros((len(pairs), len(points)), dtype=bool)
            for r, cols in enumerate(d["rows"]):
                mat[r, cols] = True
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InfeasibleCover(f"malformed profile: {exc}") from None
        if len(d["rows"]) != len(pairs):
            raise InfeasibleCover("row count does not match pair count")
        return cls(pairs, points, mat, d.get("meta", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ProfileMatrix":
        try:
            return cls.from_json(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InfeasibleCover(f"{path}: {exc}") from None


def profile_pair(mnemonic: str, m: MutationId, rng: random.Random, bugs: BugConfig = NO_BUGS,
                 runs: int = 5, max_cycles: int = core.DEFAULT_MAX_CYCLES) -> int:
    """OR of the DUT coverage bits over ``runs`` all-``mnemonic`` programs, each TI mutated once by ``m``."""
    bits = 0
    for _ in range(runs):
        prog = Program.with_tis(random_instruction(mnemonic, rng) for _ in range(TI_COUNT))
        for k in range(TI_COUNT):
            prog = mutate(prog, k, m, rng)
        state = core.DutState(prog.image(), prog.entry_pc, bugs)
        _, cmap, _ = core.dut_run(state, max_cycles, prog.halt_pc)
        bits |= cmap.bits
    return bits


def profile(bugs: BugConfig = NO_BUGS, runs_per_pair: int = 5, rng: random.Random | None = None,
            pairs: list[Pair] | None = None, max_cycles: int = core.DEFAULT_MAX_CYCLES,
            metrics=cov.FEEDBACK_DEFAULT) -> ProfileMatrix:
    if runs_per_pair < 1:
        raise ValueError("runs_per_pair must be >= 1")
    rng = rng or random.Random(0)
    pairs = list(pairs) if pairs is not None else all_pairs()
    manifest = core.DUT_MANIFEST
    mask = manifest.metric_mask(metrics)
    rows = [profile_pair(i, m, rng, bugs, runs_per_pair, max_cycles) & mask for i, m in pairs]
    union = 0
    for r in rows:
        union |= r
    cols = [k for k in range(manifest.size) if union >> k & 1]
    d = np.zeros((len(pairs), len(cols)), dtype=bool)
    for c, k in enumerate(cols):
        for r, bits in enumerate(rows):
            if bits >> k & 1:
                d[r, c] = True
    labels = [":".join(map(str, manifest.point(k))) for k in cols]
    meta = {"manifest": manifest.id, "runs_per_pair": runs_per_pair, "bugs": list(bugs.enabled),
            "metrics": list(metrics), "max_cycles": max_cycles}
    return ProfileMatrix(pairs, labels, d, meta)


def greedy_cover(matrix: ProfileMatrix) -> WeightTable:
    return weights_from(matrix, greedy_rows(matrix))


def greedy_rows(matrix: ProfileMatrix) -> list[int]:
    """Max-gain greedy; ties go to the earliest row.

    Rows produced by :func:`profile` are in (instruction, mutation) order, so
    the earliest row is the lowest (instruction index, mutation index).
    """
    uncovered = matrix.d.any(axis=0)
    chosen: list[int] = []
    while uncovered.any():
        gains = (matrix.d & uncovered).sum(axis=1)
        best = int(np.argmax(gains))         # argmax returns the first maximum
        chosen.append(best)
        uncovered &= ~matrix.d[best]
    return sorted(chosen)


def exact_cover(matrix: ProfileMatrix) -> WeightTable:
    return weights_from(matrix, exact_rows(matrix))


def exact_rows(matrix: ProfileMatrix) -> list[int]:
    """Minimum-cardinality cover by increasing subset size (lexicographically smallest first)."""
    n = len(matrix.pairs)
    if n > EXACT_LIMIT:
        raise InstanceTooLarge(f"exact cover supports at most {EXACT_LIMIT} pairs, got {n}")
    target = 0
    masks = []
    for row in matrix.d:
        mk = int(sum(1 << int(c) for c in np.flatnonzero(row)))
        masks.append(mk)
        target |= mk
    if target == 0:
        return []
    for k in range(1, n + 1):
        for combo in combinations(range(n), k):
            acc = 0
            for r in combo:
                acc |= masks[r]
            if acc == target:
                return list(combo)
    raise InfeasibleCover("no cover exists")   # unreachable: all rows together cover the union


def weights_from(matrix: ProfileMatrix | None, rows) -> WeightTable:
    """Indicator weights for the selected rows. An empty selection gives an all-zero table."""
    if matrix is None:
        return WeightTable.from_pairs(rows)
    return WeightTable.from_pairs(matrix.pairs[r] for r in rows)


def check_feasible(matrix: ProfileMatrix, weights: WeightTable) -> None:
    if weights.q is None:
        return
    rows = [r for r, p in enumerate(matrix.pairs) if p in weights.q]
    if not matrix.is_feasible(rows):
        raise InfeasibleCover("selected pairs do not cover every profiled point")

