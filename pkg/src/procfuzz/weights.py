"""Instruction/mutation weight tables produced by the set-cover optimizer."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

from . import isa

WEIGHTS_SCHEMA = "procfuzz.weights/1"


class MutationId(IntEnum):
    M0 = 0    # bitflip 1/1
    M1 = 1    # bitflip 2/1
    M2 = 2    # bitflip 4/1
    M3 = 3    # bitflip 8/8
    M4 = 4    # bitflip 16/8
    M5 = 5    # arith 8/8
    M6 = 6    # arith 16/8
    M7 = 7    # arith 32/8
    M8 = 8    # random byte
    M9 = 9    # delete (NOP)
    M10 = 10  # clone
    M11 = 11  # opcode

    @property
    def data_only(self) -> bool:
        return self <= MutationId.M7

    @property
    def label(self) -> str:
        return self.name


ALL_MUTATIONS = tuple(MutationId)

Pair = tuple[str, MutationId]


def all_pairs(ops=isa.MINIRV.legal_ops) -> list[Pair]:
    return [(i, m) for i in ops for m in ALL_MUTATIONS]


class InvalidWeights(ValueError):
    pass


@dataclass(frozen=True)
class WeightTable:
    """Indicator weights: w(i, m) = 1 iff (i, m) is in the selected set ``q``.

    ``q=None`` is the uniform table used before any optimisation.
    """

    q: frozenset | None = None

    @classmethod
    def uniform(cls) -> "WeightTable":
        return cls(None)

    @classmethod
    def from_pairs(cls, pairs) -> "WeightTable":
        return cls(frozenset((i, MutationId(m)) for i, m in pairs))

    @property
    def is_uniform(self) -> bool:
        return self.q is None

    def w(self, mnemonic: str, m: MutationId) -> int:
        return 1 if self.q is None or (mnemonic, m) in self.q else 0

    def w_instr(self, mnemonic: str) -> int:
        if self.q is None:
            return 1
        return int(any(i == mnemonic for i, _ in self.q))

    def instructions(self, legal_ops=isa.MINIRV.legal_ops) -> list[str]:
        """Instructions with nonzero weight, in ISA order."""
        if self.q is None:
            return list(legal_ops)
        chosen = {i for i, _ in self.q}
        return [i for i in legal_ops if i in chosen]

    def mutations_for(self, mnemonic: str) -> list[MutationId]:
        if self.q is None:
            return list(ALL_MUTATIONS)
        return [m for m in ALL_MUTATIONS if (mnemonic, m) in self.q]

    def to_json(self) -> dict:
        pairs = None if self.q is None else sorted([i, int(m)] for i, m in self.q)
        table = {}
        if self.q is not None:
            for i in isa.MINIRV.legal_ops:
                row = [self.w(i, m) for m in ALL_MUTATIONS]
                if any(row):
                    table[i] = row
        return {"schema": WEIGHTS_SCHEMA, "uniform": self.q is None, "q": pairs, "w": table}

    @classmethod
    def from_json(cls, d: dict) -> "WeightTable":
        if d.get("schema") != WEIGHTS_SCHEMA:
            raise InvalidWeights(f"unsupported weights schema {d.get('schema')!r}")
        if d.get("uniform"):
            return cls.uniform()
        try:
            pairs = [(str(i), MutationId(int(m))) for i, m in d["q"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidWeights(f"malformed q: {exc}") from None
        unknown = {i for i, _ in pairs} - set(isa.MINIRV.legal_ops)
        if unknown:
            raise InvalidWeights(f"unknown instructions in weights: {sorted(unknown)}")
        return cls(frozenset(pairs))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "WeightTable":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidWeights(f"{path}: {exc}") from None
        return cls.from_json(d)
