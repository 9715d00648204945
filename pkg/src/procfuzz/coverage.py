"""Hardware-style coverage: declared probe universes and mergeable hit maps.

A :class:`Manifest` fixes an ordered list of probes; every probe owns a
contiguous slice of one global bit index.  A :class:`CoverageMap` is a plain
Python int over that index plus the manifest it belongs to, so merge is ``|``
and delta is ``& ~``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

METRICS = ("statement", "branch", "condition", "expression", "toggle", "fsm", "mux", "ctrlreg")
FEEDBACK_DEFAULT = ("statement", "branch", "condition", "expression", "toggle", "fsm")

MAX_EXPR_INPUTS = 6
MAX_CTRLREG_WIDTH = 10

BINARY_TRANSITIONS = ("0->1", "1->0")
TRISTATE_TRANSITIONS = ("0->1", "1->0", "0->Z", "1->Z", "Z->0", "Z->1")


class CoverageError(ValueError):
    pass


class ManifestMismatch(CoverageError):
    pass


class CoveragePoint(NamedTuple):
    metric: str
    unit: str
    sub: int


@dataclass(frozen=True)
class Probe:
    metric: str
    unit: str
    size: int
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def to_json(self) -> dict:
        return {"metric": self.metric, "unit": self.unit, "size": self.size, "meta": self.meta}


def statement(unit: str, count: int = 1, **meta) -> Probe:
    return Probe("statement", unit, count, {"count": count, **meta})


def branch(unit: str, **meta) -> Probe:
    return Probe("branch", unit, 2, meta)


def _inputs_probe(metric: str, unit: str, inputs: Iterable[str], meta: dict) -> Probe:
    inputs = list(inputs)
    if not 1 <= len(inputs) <= MAX_EXPR_INPUTS:
        raise CoverageError(f"{unit}: {metric} probes take 1..{MAX_EXPR_INPUTS} inputs")
    return Probe(metric, unit, 1 << len(inputs), {"inputs": inputs, **meta})


def condition(unit: str, inputs: Iterable[str], **meta) -> Probe:
    return _inputs_probe("condition", unit, inputs, meta)


def expression(unit: str, inputs: Iterable[str], **meta) -> Probe:
    return _inputs_probe("expression", unit, inputs, meta)


def toggle(unit: str, width: int, tristate: bool = False, **meta) -> Probe:
    kinds = len(TRISTATE_TRANSITIONS if tristate else BINARY_TRANSITIONS)
    return Probe("toggle", unit, kinds * width, {"width": width, "tristate": tristate, **meta})


def fsm(unit: str, states: Iterable[str], transitions: Iterable[tuple[str, str]], **meta) -> Probe:
    states = list(states)
    transitions = [list(t) for t in transitions]
    return Probe("fsm", unit, len(states) + len(transitions),
                 {"states": states, "transitions": transitions, **meta})


def mux(unit: str, selects: int = 1, **meta) -> Probe:
    return Probe("mux", unit, 2 * selects, {"selects": selects, **meta})


def ctrlreg(unit: str, registers: Iterable[str], **meta) -> Probe:
    registers = list(registers)
    if not 1 <= len(registers) <= MAX_CTRLREG_WIDTH:
        raise CoverageError(f"{unit}: control-register groups hold 1..{MAX_CTRLREG_WIDTH} bits")
    return Probe("ctrlreg", unit, 1 << len(registers), {"registers": registers, **meta})


def expected_size(probe: Probe) -> int:
    """Universe size implied by the probe's metadata."""
    m, meta = probe.metric, probe.meta
    if m == "statement":
        return meta["count"]
    if m == "branch":
        return 2
    if m in ("condition", "expression"):
        return 2 ** len(meta["inputs"])
    if m == "toggle":
        return (6 if meta["tristate"] else 2) * meta["width"]
    if m == "fsm":
        return len(meta["states"]) + len(meta["transitions"])
    if m == "mux":
        return 2 * meta["selects"]
    if m == "ctrlreg":
        return 2 ** len(meta["registers"])
    raise CoverageError(f"unknown metric {m!r}")


class Manifest:
    """Ordered probe universe. Probes are addressed by (metric, unit)."""

    def __init__(self, name: str, probes: Iterable[Probe]):
        self.name = name
        self.probes: tuple[Probe, ...] = tuple(probes)
        self._base: dict[tuple[str, str], int] = {}
        self._by_key: dict[tuple[str, str], Probe] = {}
        offset = 0
        for p in self.probes:
            if p.metric not in METRICS:
                raise CoverageError(f"unknown metric {p.metric!r}")
            key = (p.metric, p.unit)
            if key in self._base:
                raise CoverageError(f"duplicate probe {key}")
            if p.size != expected_size(p):
                raise CoverageError(f"{key}: size {p.size} does not match its metadata")
            self._base[key] = offset
            self._by_key[key] = p
            offset += p.size
        self.size = offset
        blob = json.dumps([self.name, [p.to_json() for p in self.probes]], sort_keys=True)
        self.id = hashlib.sha256(blob.encode()).hexdigest()[:16]
        self._metric_masks: dict[str, int] = {}
        for p in self.probes:
            base = self._base[(p.metric, p.unit)]
            self._metric_masks[p.metric] = self._metric_masks.get(p.metric, 0) | (((1 << p.size) - 1) << base)

    def __eq__(self, other) -> bool:
        return isinstance(other, Manifest) and other.id == self.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"Manifest({self.name!r}, probes={len(self.probes)}, points={self.size}, id={self.id})"

    def probe(self, metric: str, unit: str) -> Probe:
        try:
            return self._by_key[(metric, unit)]
        except KeyError:
            raise CoverageError(f"undeclared probe {metric}:{unit}") from None

    def base(self, metric: str, unit: str) -> int:
        self.probe(metric, unit)
        return self._base[(metric, unit)]

    def metric_mask(self, metrics: Iterable[str] = METRICS) -> int:
        mask = 0
        for m in metrics:
            if m not in METRICS:
                raise CoverageError(f"unknown metric {m!r}")
            mask |= self._metric_masks.get(m, 0)
        return mask

    def universe(self, metric: str) -> int:
        return sum(p.size for p in self.probes if p.metric == metric)

    def points_where(self, metric: str, **meta) -> int:
        """Number of points of ``metric`` whose probe metadata matches ``meta``."""
        return sum(p.size for p in self.probes
                   if p.metric == metric and all(p.meta.get(k) == v for k, v in meta.items()))

    def point(self, index: int) -> CoveragePoint:
        for p in self.probes:
            base = self._base[(p.metric, p.unit)]
            if base <= index < base + p.size:
                return CoveragePoint(p.metric, p.unit, index - base)
        raise CoverageError(f"point {index} outside the manifest")

    def sub_index(self, metric: str, unit: str, observation) -> int:
        """Map a probe observation to the point index within the probe."""
        p = self.probe(metric, unit)
        meta = p.meta
        if metric == "statement":
            sub = 0 if observation is None else observation
        elif metric == "branch":
            sub = 0 if observation else 1
        elif metric in ("condition", "expression"):
            bits = tuple(observation)
            if len(bits) != len(meta["inputs"]) or any(b not in (0, 1) for b in bits):
                raise CoverageError(f"{unit}: bad input vector {observation!r}")
            sub = 0
            for b in bits:
                sub = sub << 1 | b
        elif metric == "toggle":
            bit, transition = observation
            kinds = TRISTATE_TRANSITIONS if meta["tristate"] else BINARY_TRANSITIONS
            if transition not in kinds or not 0 <= bit < meta["width"]:
                raise CoverageError(f"{unit}: bad toggle observation {observation!r}")
            sub = kinds.index(transition) * meta["width"] + bit
        elif metric == "fsm":
            if isinstance(observation, str):
                if observation not in meta["states"]:
                    raise CoverageError(f"{unit}: unknown state {observation!r}")
                sub = meta["states"].index(observation)
            else:
                t = list(observation)
                if t not in meta["transitions"]:
                    raise CoverageError(f"{unit}: undeclared transition {observation!r}")
                sub = len(meta["states"]) + meta["transitions"].index(t)
        elif metric == "mux":
            sel, value = observation if isinstance(observation, tuple) else (0, observation)
            if not 0 <= sel < meta["selects"] or value not in (0, 1):
                raise CoverageError(f"{unit}: bad mux observation {observation!r}")
            sub = 2 * sel + value
        else:
            sub = observation
        if not isinstance(sub, int) or not 0 <= sub < p.size:
            raise CoverageError(f"{metric}:{unit}: observation {observation!r} outside the universe")
        return sub

    def bit(self, metric: str, unit: str, observation) -> int:
        return self.base(metric, unit) + self.sub_index(metric, unit, observation)

    def empty(self) -> "CoverageMap":
        return CoverageMap(self, 0)

    def full(self) -> "CoverageMap":
        return CoverageMap(self, (1 << self.size) - 1)

    def to_json(self) -> dict:
        return {"name": self.name, "id": self.id, "points": self.size,
                "probes": [p.to_json() for p in self.probes]}


@dataclass(frozen=True)
class CoverageMap:
    manifest: Manifest = field(compare=False, repr=False)
    bits: int = 0

    @property
    def manifest_id(self) -> str:
        return self.manifest.id

    def __eq__(self, other) -> bool:
        return (isinstance(other, CoverageMap) and other.bits == self.bits
                and other.manifest.id == self.manifest.id)

    def __hash__(self) -> int:
        return hash((self.manifest.id, self.bits))

    def __len__(self) -> int:
        return self.bits.bit_count()

    def count(self, mask: int | None = None) -> int:
        return (self.bits if mask is None else self.bits & mask).bit_count()

    def points(self) -> set[CoveragePoint]:
        return _points(self.manifest, self.bits)


def _points(manifest: Manifest, bits: int) -> set[CoveragePoint]:
    out = set()
    while bits:
        low = bits & -bits
        out.add(manifest.point(low.bit_length() - 1))
        bits ^= low
    return out


def _same(a: CoverageMap, b: CoverageMap) -> None:
    if a.manifest.id != b.manifest.id:
        raise ManifestMismatch(f"manifest {a.manifest.id} != {b.manifest.id}")


def record(cmap: CoverageMap, metric: str, unit: str, observation=None) -> CoverageMap:
    """Return ``cmap`` with the point for one probe observation set."""
    return CoverageMap(cmap.manifest, cmap.bits | 1 << cmap.manifest.bit(metric, unit, observation))


def merge(a: CoverageMap, b: CoverageMap) -> CoverageMap:
    _same(a, b)
    return CoverageMap(a.manifest, a.bits | b.bits)


def delta_bits(global_map: CoverageMap, run: CoverageMap, mask: int | None = None) -> int:
    _same(global_map, run)
    new = run.bits & ~global_map.bits
    return new if mask is None else new & mask


def delta(global_map: CoverageMap, run: CoverageMap, mask: int | None = None) -> set[CoveragePoint]:
    """Points hit by ``run`` that ``global_map`` has not seen (optionally restricted by ``mask``)."""
    return _points(run.manifest, delta_bits(global_map, run, mask))


def totals(cmap: CoverageMap) -> dict[str, tuple[int, int]]:
    man = cmap.manifest
    out = {}
    for metric in METRICS:
        universe = man.universe(metric)
        if universe:
            out[metric] = ((cmap.bits & man.metric_mask([metric])).bit_count(), universe)
    return out


def coverage_report(cmap: CoverageMap, curve: list[tuple[int, int]] | None = None) -> dict:
    return {
        "manifest": cmap.manifest.name,
        "manifest_hash": cmap.manifest_id,
        "totals": {m: {"hit": h, "universe": u} for m, (h, u) in totals(cmap).items()},
        "curve": [list(p) for p in (curve or [])],
    }


def map_to_json(cmap: CoverageMap) -> dict:
    return {"manifest_hash": cmap.manifest_id, "bits": format(cmap.bits, "x")}


def map_from_json(manifest: Manifest, d: dict) -> CoverageMap:
    if d["manifest_hash"] != manifest.id:
        raise ManifestMismatch(f"map for manifest {d['manifest_hash']}, expected {manifest.id}")
    return CoverageMap(manifest, int(d["bits"], 16))


class Recorder:
    """Per-run accumulator used by simulators on the hot path.

    Single-point hits go into one int; toggle probes keep transition masks per
    signal that are folded into the map by :meth:`to_map`.
    """

    def __init__(self, manifest: Manifest):
        self.manifest = manifest
        self.bits = 0
        self._toggles: dict[str, list[int]] = {}

    def hit(self, metric: str, unit: str, observation=None) -> None:
        self.bits |= 1 << self.manifest.bit(metric, unit, observation)

    def toggle_word(self, unit: str, old: int, new: int) -> None:
        acc = self._toggles.get(unit)
        if acc is None:
            acc = self._toggles[unit] = [0, 0, 0, 0, 0, 0]
        acc[0] |= ~old & new
        acc[1] |= old & ~new

    def toggle_tristate(self, unit: str, old: int, old_z: int, new: int, new_z: int) -> None:
        acc = self._toggles.get(unit)
        if acc is None:
            acc = self._toggles[unit] = [0, 0, 0, 0, 0, 0]
        driven = ~old_z & ~new_z
        acc[0] |= driven & ~old & new
        acc[1] |= driven & old & ~new
        to_z = ~old_z & new_z
        acc[2] |= to_z & ~old
        acc[3] |= to_z & old
        from_z = old_z & ~new_z
        acc[4] |= from_z & ~new
        acc[5] |= from_z & new

    def to_map(self) -> CoverageMap:
        bits = self.bits
        man = self.manifest
        for unit, acc in self._toggles.items():
            p = man.probe("toggle", unit)
            width = p.meta["width"]
            wmask = (1 << width) - 1
            base = man.base("toggle", unit)
            kinds = 6 if p.meta["tristate"] else 2
            for k in range(kinds):
                bits |= (acc[k] & wmask) << (base + k * width)
        return CoverageMap(man, bits)
