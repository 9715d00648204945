"""Line-oriented ``key = value`` campaign configuration.

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected.

=======================  ==========================================  =========
key                      meaning                                     default
=======================  ==========================================  =========
bugs.enabled             comma list of bug toggles                   (none)
fuzz.lanes               worker processes                            1
fuzz.max_inputs          mutated inputs, seeds not counted           1000
fuzz.max_instructions    retired test instructions                   (none)
fuzz.wall_clock          seconds                                     (none)
fuzz.mutants_per_entry   mutants per dequeued corpus entry           50
fuzz.seeds               initial random programs                     10
fuzz.havoc               max stacked mutations per mutant            8
fuzz.fresh_seeds         fresh random programs per dequeued entry    10
fuzz.feedback            ``false`` runs a pure random campaign       true
fuzz.stop_on_mismatch    stop at the first mismatch                  false
fuzz.weights             path to weights.json                        (uniform)
dut.max_cycles           DUT cycle budget per input                  2000
feedback.metrics         comma list of feedback metrics              six core metrics
rng.seed                 campaign seed                               0
paths.out                artifact directory                          (none)
=======================  ==========================================  =========

The ``THEHUZZ_OUT`` environment variable, when set, overrides ``paths.out``.
"""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path

from . import coverage as cov
from .dut.bugs import BugConfig
from .engine import FuzzConfig
from .weights import InvalidWeights, WeightTable

OUT_ENV = "THEHUZZ_OUT"


class ConfigError(ValueError):
    pass


def _int(v: str, lo: int = 0) -> int:
    n = int(v, 0)
    if n < lo:
        raise ValueError(f"must be >= {lo}")
    return n


def _opt_int(v: str) -> int | None:
    return None if v.lower() in ("", "none") else _int(v, 1)


def _opt_float(v: str) -> float | None:
    return None if v.lower() in ("", "none") else float(v)


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _names(v: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _bugs(v: str) -> BugConfig:
    return BugConfig.of(*_names(v))


def _metrics(v: str) -> tuple[str, ...]:
    names = _names(v)
    bad = [m for m in names if m not in cov.METRICS]
    if bad or not names:
        raise ValueError(f"unknown metrics {bad}" if bad else "empty metric list")
    return names


def _weights(v: str) -> WeightTable | None:
    if v.lower() in ("", "uniform", "none"):
        return None
    return WeightTable.load(v)


def _out(v: str) -> Path | None:
    return Path(v) if v else None


# key -> (FuzzConfig attribute, parser)
KEYS = {
    "bugs.enabled": ("bugs", _bugs),
    "fuzz.lanes": ("lanes", lambda v: _int(v, 1)),
    "fuzz.max_inputs": ("max_inputs", _opt_int),
    "fuzz.max_instructions": ("max_instructions", _opt_int),
    "fuzz.wall_clock": ("wall_clock", _opt_float),
    "fuzz.mutants_per_entry": ("mutants_per_entry", lambda v: _int(v, 1)),
    "fuzz.seeds": ("seeds", lambda v: _int(v, 1)),
    "fuzz.havoc": ("havoc", lambda v: _int(v, 1)),
    "fuzz.fresh_seeds": ("fresh_seeds", _int),
    "fuzz.feedback": ("feedback_enabled", _bool),
    "fuzz.stop_on_mismatch": ("stop_on_mismatch", _bool),
    "fuzz.weights": ("weights", _weights),
    "dut.max_cycles": ("max_cycles", lambda v: _int(v, 1)),
    "feedback.metrics": ("feedback", _metrics),
    "rng.seed": ("rng_seed", _int),
    "paths.out": ("out", _out),
}


def parse_pairs(lines, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` strings; later lines win."""
    pairs: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{n}: expected key = value")
        if key not in KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        pairs[key] = value.strip()
    return pairs


def build(pairs: dict[str, str], env=None) -> FuzzConfig:
    env = os.environ if env is None else env
    updates = {}
    for key, value in pairs.items():
        attr, parse = KEYS[key]
        try:
            updates[attr] = parse(value)
        except (ValueError, InvalidWeights, OSError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if env.get(OUT_ENV):
        updates["out"] = Path(env[OUT_ENV])
    return replace(FuzzConfig(), **updates)


def load(path: str | Path | None = None, overrides=(), env=None) -> FuzzConfig:
    """Read a config file (optional) and apply ``key=value`` overrides on top."""
    pairs: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(str(exc)) from None
        pairs.update(parse_pairs(text.splitlines(), str(path)))
    pairs.update(parse_pairs(overrides, "--set"))
    return build(pairs, env)


__all__ = ["ConfigError", "KEYS", "OUT_ENV", "build", "load", "parse_pairs"]
