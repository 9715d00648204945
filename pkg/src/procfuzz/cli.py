"""Command-line entry point.

Exit codes: 0 clean, 10 mismatch found, 2 usage or configuration error.
``casestudy`` exits 1 if one of its checks fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import config as cfgmod
from . import coverage as cov
from . import optimizer
from .casestudy import format_report, run_casestudy
from .dut import core
from .engine import event_fields, fuzz_loop, run_input
from .isa import disasm
from .stimulus import MalformedProgram, Program
from .weights import InvalidWeights

EXIT_CLEAN = 0
EXIT_MISMATCH = 10
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _config(args) -> "cfgmod.FuzzConfig":
    try:
        return cfgmod.load(args.config, args.set or ())
    except cfgmod.ConfigError as exc:
        raise UsageError(f"config error: {exc}") from None


def _out_dir(cfg, default: str = ".") -> Path:
    return Path(cfg.out) if cfg.out is not None else Path(default)


def cmd_fuzz(args) -> int:
    cfg = _config(args)
    rep = fuzz_loop(cfg)
    hit = sum(t["hit"] for m, t in rep.coverage["totals"].items() if m in cfg.feedback)
    print(f"inputs {rep.inputs}  retired TIs {rep.instructions}  corpus {rep.corpus_size}  "
          f"feedback points {hit}  mismatches {len(rep.mismatches)}  hangs {len(rep.hangs)}")
    for m in rep.mismatches[:10]:
        where = m.program_path or m.program_hash
        print(f"  mismatch input {m.input_index} event {m.event_index} {m.field}: "
              f"dut={m.dut} grm={m.grm}  [{where}]")
    if cfg.out is not None:
        print(f"artifacts in {cfg.out}")
    return EXIT_MISMATCH if rep.mismatches else EXIT_CLEAN


def cmd_profile(args) -> int:
    cfg = _config(args)
    matrix = optimizer.profile(cfg.bugs, args.runs, random.Random(cfg.rng_seed),
                               max_cycles=cfg.max_cycles, metrics=cfg.feedback)
    path = Path(args.output) if args.output else _out_dir(cfg) / "profile.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix.save(path)
    print(f"{len(matrix.pairs)} pairs x {len(matrix.points)} points -> {path}")
    return EXIT_CLEAN


def cmd_optimize(args) -> int:
    try:
        matrix = optimizer.ProfileMatrix.load(args.profile)
        matrix.check()
        solve = optimizer.exact_cover if args.exact else optimizer.greedy_cover
        weights = solve(matrix)
        optimizer.check_feasible(matrix, weights)
    except (optimizer.InfeasibleCover, optimizer.InstanceTooLarge, OSError) as exc:
        raise UsageError(str(exc)) from None
    path = Path(args.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    weights.save(path)
    n_instr = len({i for i, _ in weights.q or ()})
    print(f"{len(weights.q or ())} pairs over {n_instr} instructions cover "
          f"{len(matrix.points)} points -> {path}")
    return EXIT_CLEAN


def _fmt_event(e) -> str:
    if e is None:
        return "-"
    parts = [f"{e.pc:#06x} {disasm(e.instr_word):<22}"]
    parts += [f"x{r}={v:#x}" for r, v in sorted(e.gpr_writes)]
    parts += [f"csr[{a:#05x}]={v:#x}" for a, v in sorted(e.csr_writes)]
    parts += [f"mem{n * 8}[{a:#06x}]={v:#x}" for a, n, v in sorted(e.mem_writes)]
    if e.exception is not None:
        parts.append(f"trap({e.exception})")
    return " ".join(parts)


def side_by_side(dut, ref, stop: int | None) -> list[str]:
    width = 58
    lines = [f"{'#':>4}  {'DUT':<{width}} | GRM"]
    n = max(len(dut), len(ref)) if stop is None else stop + 1
    for k in range(n):
        a = dut.events[k] if k < len(dut) else None
        b = ref.events[k] if k < len(ref) else None
        mark = "!" if (a is None) != (b is None) or (a and b and event_fields(a) != event_fields(b)) else " "
        lines.append(f"{k:>4}{mark} {_fmt_event(a):<{width}} | {_fmt_event(b)}")
    return lines


def cmd_replay(args) -> int:
    cfg = _config(args)
    try:
        program = Program.load(args.input)
    except (MalformedProgram, OSError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    res = run_input(program, cfg.bugs, cfg.max_cycles)
    first = res.mismatches[0] if res.mismatches else None
    if first is None:
        if args.verbose:
            print("\n".join(side_by_side(res.dut_trace, res.grm_trace, None)))
        print(f"traces identical ({len(res.grm_trace)} events, {res.status})")
        return EXIT_CLEAN
    print("\n".join(side_by_side(res.dut_trace, res.grm_trace, first.event_index)))
    print(f"first mismatch at event {first.event_index}: {first.field} dut={first.dut} grm={first.grm}")
    return EXIT_MISMATCH


def _load_coverage(path: Path) -> tuple[cov.CoverageMap, list]:
    if path.is_dir():
        path = path / "coverage.json"
    try:
        doc = json.loads(path.read_text())
        cmap = cov.map_from_json(core.DUT_MANIFEST, doc["map"])
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read coverage from {path}: {exc}") from None
    return cmap, doc.get("curve", [])


def cmd_cov_report(args) -> int:
    cmap, curve = _load_coverage(Path(args.path))
    rows = cov.totals(cmap)
    print(f"{'metric':<11} {'hit':>6} {'universe':>9} {'pct':>7}")
    hit_all = uni_all = 0
    for metric, (hit, universe) in rows.items():
        print(f"{metric:<11} {hit:>6} {universe:>9} {100 * hit / universe:>6.1f}%")
        if metric in cov.FEEDBACK_DEFAULT:
            hit_all += hit
            uni_all += universe
    print(f"{'six-metric':<11} {hit_all:>6} {uni_all:>9} {100 * hit_all / max(uni_all, 1):>6.1f}%")
    if curve and args.curve:
        print("retired TIs -> feedback points")
        for x, y in curve:
            print(f"{x:>10} {y:>6}")
    return EXIT_CLEAN


def cmd_casestudy(args) -> int:
    rep = run_casestudy(args.seed)
    print(format_report(rep))
    if args.json:
        Path(args.json).write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    return EXIT_CLEAN if all(rep.checks.values()) else 1


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="key=value config file")
    p.add_argument("-s", "--set", action="append", metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="procfuzz", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    _config_args(p)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("profile", help="profile every (instruction, mutation) pair")
    _config_args(p)
    p.add_argument("--runs", type=int, default=5, help="programs per pair")
    p.add_argument("-o", "--output", help="profile.json path (default: <paths.out>/profile.json)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("optimize", help="select a covering set of pairs from a profile")
    p.add_argument("profile")
    p.add_argument("-o", "--output", default="weights.json")
    p.add_argument("--exact", action="store_true", help="minimum cover (small instances only)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("replay", help="replay one input file on both models")
    _config_args(p)
    p.add_argument("input")
    p.add_argument("--verbose", action="store_true", help="print the whole trace when identical")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("cov-report", help="summarize a campaign's coverage")
    p.add_argument("path", help="campaign directory or coverage.json")
    p.add_argument("--curve", action="store_true")
    p.set_defaults(func=cmd_cov_report)

    p = sub.add_parser("casestudy", help="compare feedback metrics on the cache controller")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the report here")
    p.set_defaults(func=cmd_casestudy)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:       # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidWeights) as exc:
        print(f"procfuzz: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
