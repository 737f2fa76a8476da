"""Command-line driver: build, sim, po, relay, wcet, disasm.

Exit codes: 0 ok, 1 usage, 2 stage failure, 3 simulation panic.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .b0 import B0Error, parse, typecheck
from .backends import compile_a, compile_b, disasm
from .backends.chain_a import CapacityError
from .crc import crc32
from .firmware import IntegrityError, LinkError, SeqConfig, bootload, input_decls, link
from .relay import RelayError, parse_relay, translate
from .safesim import PANIC, ScenarioError, load_scenario, run_scenario, write_trace
from .verifier import (COUNTEREXAMPLE, DEFAULT_BUDGET, UNPROVEN, export_pos, format_text,
                       generate_pos, prove_all)
from .wcet import WcetError, analyze, load_costs

EXIT_OK, EXIT_USAGE, EXIT_STAGE, EXIT_PANIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class BuildReport:
    source: str
    stages: List[tuple] = field(default_factory=list)   # (stage, status, detail)
    po_summary: Dict[str, int] = field(default_factory=dict)
    po_table: str = ""
    image_sizes: Dict[str, int] = field(default_factory=dict)
    bundle_crc: Optional[int] = None
    wcet: Optional[int] = None
    allow_unproven: bool = False
    unproven_linked: bool = False

    @property
    def ok(self) -> bool:
        return all(s[1] != "FAILED" for s in self.stages)

    def add(self, stage, status="ok", detail=""):
        self.stages.append((stage, status, detail))

    def render(self) -> str:
        lines = [f"build report for {self.source}"]
        if self.unproven_linked:
            lines.append("!!! WARNING: bundle linked with UNPROVEN obligations (--allow-unproven) !!!")
        for stage, status, detail in self.stages:
            lines.append(f"  {stage:<10} {status:<7} {detail}".rstrip())
        if self.po_summary:
            counts = ", ".join(f"{k}={v}" for k, v in sorted(self.po_summary.items()))
            lines.append(f"  proof obligations: {counts}")
        if self.po_table:
            lines.extend("    " + row for row in self.po_table.rstrip().splitlines())
        for name, size in self.image_sizes.items():
            lines.append(f"  {name} size: {size} bytes")
        if self.bundle_crc is not None:
            lines.append(f"  bundle crc32: {self.bundle_crc:08x}")
        if self.wcet is not None:
            lines.append(f"  wcet bound (image B cycle): {self.wcet}")
        return "\n".join(lines) + "\n"


def _read_text(path: str, stage="read") -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StageError(stage, f"cannot read {path}: {exc.strerror or exc}") from None


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise StageError("read", f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path, data, stage="write"):
    try:
        if isinstance(data, str):
            Path(path).write_text(data, encoding="utf-8")
        else:
            Path(path).write_bytes(data)
    except OSError as exc:
        raise StageError(stage, f"cannot write {path}: {exc.strerror or exc}") from None


def _seq_config(pairs) -> SeqConfig:
    overrides = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--seq expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    try:
        return SeqConfig().with_overrides(overrides)
    except ValueError as exc:
        raise UsageError(f"--seq: {exc}") from None


def _front_end(path: str):
    text = _read_text(path)
    try:
        model = parse(text)
    except B0Error as exc:
        raise StageError("parse", str(exc)) from None
    try:
        return typecheck(model)
    except B0Error as exc:
        raise StageError("typecheck", str(exc)) from None


def build(source: str, budget=DEFAULT_BUDGET, cfg: SeqConfig = SeqConfig(),
          allow_unproven=False):
    """Run the whole pipeline.  Returns ``(report, bundle or None)``."""
    rep = BuildReport(source, allow_unproven=allow_unproven)
    try:
        tm = _front_end(source)
    except StageError as exc:
        rep.add(exc.stage, "FAILED", str(exc).split(": ", 1)[1])
        return rep, None
    rep.add("parse")
    rep.add("typecheck")
    pos = generate_pos(tm)
    results = prove_all(pos, budget)
    for r in results:
        rep.po_summary[r.status] = rep.po_summary.get(r.status, 0) + 1
    rep.po_table = format_text(tm.name, pos, results)
    bad = [r for r in results if not r.proved]
    refuted = [r for r in bad if r.status == COUNTEREXAMPLE]
    if refuted:
        rep.add("prove", "FAILED", f"{len(refuted)} obligation(s) refuted by counterexample")
        return rep, None
    if bad and not allow_unproven:
        rep.add("prove", "FAILED", f"{len(bad)} obligation(s) unproven (see --allow-unproven)")
        return rep, None
    if bad:
        rep.unproven_linked = True
        rep.add("prove", "WARN", f"{len(bad)} obligation(s) UNPROVEN, accepted by flag")
    else:
        rep.add("prove", "ok", f"{len(results)} obligation(s) proved")
    try:
        a, b = compile_a(tm), compile_b(tm)
    except CapacityError as exc:
        rep.add("compile", "FAILED", str(exc))
        return rep, None
    rep.add("compile")
    rep.image_sizes = {"image A": len(a.code), "image B": len(b.code)}
    try:
        bundle = link(a, b, cfg, input_decls(tm))
    except LinkError as exc:
        rep.add("link", "FAILED", str(exc))
        return rep, None
    rep.add("link", "ok", f"{len(bundle)} bytes")
    try:
        fw = bootload(bundle)
    except IntegrityError as exc:
        rep.add("bootload", "FAILED", str(exc))
        return rep, None
    rep.add("bootload")
    rep.bundle_crc = fw.bundle_crc
    try:
        rep.wcet = analyze(fw.image_b)
        rep.add("wcet")
    except WcetError as exc:
        rep.add("wcet", "FAILED", str(exc))
        return rep, None
    return rep, bundle


def cmd_build(args) -> int:
    rep, bundle = build(args.source, args.budget, _seq_config(args.seq), args.allow_unproven)
    sys.stdout.write(rep.render())
    if bundle is None:
        return EXIT_STAGE
    out = args.out or str(Path(args.source).with_suffix(".bundle"))
    _write(out, bundle)
    print(f"wrote {out}")
    return EXIT_OK


def _load_firmware(path: str, seq=None):
    try:
        fw = bootload(_read_bytes(path))
    except IntegrityError as exc:
        raise StageError("bootload", str(exc)) from None
    if seq:
        cfg = _seq_config(seq)
        fw = bootload(link(fw.image_a, fw.image_b, cfg, fw.inputs))
    return fw


def cmd_sim(args) -> int:
    fw = _load_firmware(args.bundle, args.seq)
    try:
        sc = load_scenario(args.scenario)
    except OSError as exc:
        raise StageError("read", f"cannot read {args.scenario}: {exc.strerror or exc}") from None
    except ScenarioError as exc:
        raise StageError("scenario", str(exc)) from None
    try:
        trace = run_scenario(fw, sc)
    except ScenarioError as exc:
        raise StageError("sim", str(exc)) from None
    out = args.out or str(Path(args.scenario).with_suffix(".trace.jsonl"))
    write_trace(trace, out)
    if trace.status == PANIC:
        p = trace.panic
        print(f"PANIC at cycle {p['cycle']}: {p['reason']} ({p['detail']}); trace in {out}")
        return EXIT_PANIC
    print(f"RUNNING after {len(trace.reports)} cycles; trace in {out}")
    return EXIT_OK


def cmd_po(args) -> int:
    tm = _front_end(args.source)
    pos = generate_pos(tm)
    results = prove_all(pos, args.budget)
    if args.format == "text":
        text = format_text(tm.name, pos, results)
        if args.out:
            _write(args.out, text)
        else:
            sys.stdout.write(text)
    else:
        out = args.out or str(Path(args.source).with_suffix(".po.xml"))
        _write(out, export_pos(tm.name, pos, results))
        counts: Dict[str, int] = {}
        for r in results:
            counts[r.status] = counts.get(r.status, 0) + 1
        print(f"wrote {out}: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return EXIT_OK if all(r.proved for r in results) else EXIT_STAGE


def cmd_relay(args) -> int:
    text = _read_text(args.net)
    try:
        src = translate(parse_relay(text))
    except RelayError as exc:
        raise StageError("relay", str(exc)) from None
    if args.stdout:
        sys.stdout.write(src)
        return EXIT_OK
    out = args.out or str(Path(args.net).with_suffix(".b0"))
    _write(out, src)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_wcet(args) -> int:
    fw = _load_firmware(args.bundle)
    try:
        costs = load_costs(args.costs)
    except OSError as exc:
        raise StageError("read", f"cannot read {args.costs}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise StageError("costs", str(exc)) from None
    try:
        bound = analyze(fw.image_b, costs)
    except WcetError as exc:
        raise StageError("wcet", str(exc)) from None
    text = f"wcet bound (image B cycle): {bound}\n"
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_disasm(args) -> int:
    if args.input.endswith(".b0"):
        tm = _front_end(args.input)
        images = {"A": compile_a(tm), "B": compile_b(tm)}
    else:
        fw = _load_firmware(args.input)
        images = {"A": fw.image_a, "B": fw.image_b}
    chosen = [args.image] if args.image else ["A", "B"]
    text = "\n".join(disasm(images[k]) for k in chosen)
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS,
                        help="prover enumeration budget")
    common.add_argument("--seq", action="append", default=argparse.SUPPRESS,
                        metavar="KEY=VALUE", help="sequencer configuration override")
    common.add_argument("--out", default=argparse.SUPPRESS, metavar="PATH",
                        help="output file")
    p = _Parser(prog="safeplc", parents=[common],
                description="Verified compilation and simulation for a dual-MCU safety PLC.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("build", parents=[common], help="prove, compile, link and check a model")
    s.add_argument("source")
    s.add_argument("--allow-unproven", action="store_true",
                   help="link despite UNPROVEN (never refuted) obligations")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("sim", parents=[common], help="run a scenario against a bundle")
    s.add_argument("bundle")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("po", parents=[common], help="generate and discharge proof obligations")
    s.add_argument("source")
    s.add_argument("--format", choices=("xml", "text"), default="xml")
    s.set_defaults(func=cmd_po)

    s = sub.add_parser("relay", parents=[common], help="translate a relay net to B0")
    s.add_argument("net")
    s.add_argument("--stdout", action="store_true", help="print instead of writing a file")
    s.set_defaults(func=cmd_relay)

    s = sub.add_parser("wcet", parents=[common], help="worst-case cycle cost of a bundle")
    s.add_argument("bundle")
    s.add_argument("costs", nargs="?", help="cost table file (default: shipped table)")
    s.set_defaults(func=cmd_wcet)

    s = sub.add_parser("disasm", parents=[common], help="list the instructions of both images")
    s.add_argument("input", help="bundle file or .b0 source")
    s.add_argument("--image", choices=("A", "B"))
    s.set_defaults(func=cmd_disasm)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    args.budget = getattr(args, "budget", DEFAULT_BUDGET)
    args.seq = getattr(args, "seq", None)
    args.out = getattr(args, "out", None)
    if args.budget < 1:
        parser.error("--budget must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"safeplc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"safeplc: {exc.stage} failed: {str(exc).split(': ', 1)[1]}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
