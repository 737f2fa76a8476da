"""Firmware bundle linker and bootloader.

Bundle layout, all little-endian::

    magic "CSP1" | u16 version=1 | u16 section_count=5
    5 x { u8 kind, u8 pad, u32 offset, u32 length, u32 crc32 }
    payloads (in kind order)
    u32 crc32 of every preceding byte

Kinds: 1 IMAGE_A, 2 IMAGE_B, 3 VARMAP_A, 4 VARMAP_B, 5 SEQCFG.
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

from .b0 import ast as A
from .backends.chain_a import ImageA
from .backends.chain_b import ImageB, LoopEntry
from .backends.memory import PROG_A, PROG_B, VAR_A, VAR_B, WORD, Region, VarSlot
from .crc import crc32

MAGIC = b"CSP1"
VERSION = 1
IMAGE_A, IMAGE_B, VARMAP_A, VARMAP_B, SEQCFG = 1, 2, 3, 4, 5
SECTION_NAMES = {IMAGE_A: "IMAGE_A", IMAGE_B: "IMAGE_B", VARMAP_A: "VARMAP_A",
                 VARMAP_B: "VARMAP_B", SEQCFG: "SEQCFG"}
_HEADER = struct.Struct("<4sHH")
_SECTION = struct.Struct("<BBIII")
MAX_INTER_MCU_MS = 50


class LinkError(Exception):
    pass


class IntegrityError(Exception):
    """Bootloader rejection.  ``reason`` is one of ``bad magic``,
    ``bad version``, ``truncated``, ``bad section table``, ``bad CRC``,
    ``bad global CRC``, ``malformed section``, ``region overlap``."""

    def __init__(self, reason: str, detail: str = "", section: int = 0):
        self.reason = reason
        self.section = section
        msg = reason
        if section:
            msg += f" at section {section} ({SECTION_NAMES.get(section, '?')})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class SeqConfig:
    cycle_period_ms: int = 10
    inter_mcu_interval_cycles: int = 4
    deferred_bytes_per_cycle: int = 64
    readback_interval_cycles: int = 1
    # escalate a non-dynamic high input to panic instead of reading it as 0
    nondynamic_panic: bool = False

    def __post_init__(self):
        for f in ("cycle_period_ms", "inter_mcu_interval_cycles", "deferred_bytes_per_cycle",
                  "readback_interval_cycles"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be at least 1")
        if self.inter_mcu_interval_cycles * self.cycle_period_ms > MAX_INTER_MCU_MS:
            raise ValueError(
                f"inter-MCU comparison every {self.inter_mcu_interval_cycles} x "
                f"{self.cycle_period_ms} ms exceeds {MAX_INTER_MCU_MS} ms")

    def with_overrides(self, overrides: Mapping[str, str]) -> "SeqConfig":
        fields = {f.name: f for f in dataclasses.fields(self)}
        values = {}
        for key, raw in overrides.items():
            if key not in fields:
                raise ValueError(f"unknown sequencer setting {key!r}")
            if key == "nondynamic_panic":
                values[key] = str(raw).lower() in ("1", "true", "yes", "on")
            else:
                values[key] = int(raw)
        return dataclasses.replace(self, **values)


@dataclass(frozen=True)
class InputDecl:
    name: str
    kind: str      # BOOL or INT
    lo: int
    hi: int


_LOADER_KEY = object()


@dataclass(frozen=True)
class LoadedFirmware:
    """Integrity-checked firmware; only :func:`bootload` builds one."""
    image_a: ImageA
    image_b: ImageB
    cfg: SeqConfig
    inputs: Tuple[InputDecl, ...]
    bundle: bytes
    _key: object = dataclasses.field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._key is not _LOADER_KEY:
            raise TypeError("LoadedFirmware is only constructed by bootload()")

    @property
    def reference_crcs(self) -> Tuple[int, int]:
        return self.image_a.code_crc, self.image_b.code_crc

    @property
    def bundle_crc(self) -> int:
        return struct.unpack("<I", self.bundle[-4:])[0]

    @property
    def outputs(self) -> Tuple[VarSlot, ...]:
        return tuple(s for s in self.image_a.slots if s.role == "output")


# -- payload encoding ------------------------------------------------------

class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def put(self, fmt, *values):
        self.buf += struct.pack("<" + fmt, *values)

    def name(self, s: str):
        raw = s.encode("utf-8")
        if len(raw) > 255:
            raise LinkError(f"name too long: {s!r}")
        self.put("B", len(raw))
        self.buf += raw


class _Reader:
    def __init__(self, data: bytes, section: int):
        self.data = data
        self.pos = 0
        self.section = section

    def get(self, fmt):
        s = struct.Struct("<" + fmt)
        if self.pos + s.size > len(self.data):
            raise IntegrityError("malformed section", "payload too short", self.section)
        out = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return out if len(out) > 1 else out[0]

    def name(self) -> str:
        n = self.get("B")
        raw = self.data[self.pos:self.pos + n]
        if len(raw) != n:
            raise IntegrityError("malformed section", "payload too short", self.section)
        self.pos += n
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError("malformed section", "bad name", self.section) from None

    def rest(self, n) -> bytes:
        raw = self.data[self.pos:self.pos + n]
        if len(raw) != n:
            raise IntegrityError("malformed section", "payload too short", self.section)
        self.pos += n
        return raw

    def done(self):
        if self.pos != len(self.data):
            raise IntegrityError("malformed section", "trailing payload bytes", self.section)


def _image_header(w: _Writer, img):
    w.put("IIH", img.cycle_entry, img.scratch_base, img.scratch_count)
    w.put("B", len(img.inputs))
    for n in img.inputs:
        w.name(n)


def _encode_image_a(img: ImageA) -> bytes:
    w = _Writer()
    _image_header(w, img)
    w.put("I", len(img.code))
    w.buf += img.code
    return bytes(w.buf)


def _encode_image_b(img: ImageB) -> bytes:
    w = _Writer()
    _image_header(w, img)
    w.put("H", len(img.loop_table))
    for e in img.loop_table:
        w.put("III", e.head, e.exit, e.trip_count)
    w.put("I", len(img.code))
    w.buf += img.code
    return bytes(w.buf)


def _encode_varmap(slots) -> bytes:
    w = _Writer()
    w.put("H", len(slots))
    for s in slots:
        w.put("BBHiiI", 1 if s.role == "output" else 0, 1 if s.kind == "INT" else 0,
              s.length, s.lo, s.hi, s.address)
        w.name(s.name)
    return bytes(w.buf)


def _encode_seqcfg(cfg: SeqConfig, inputs) -> bytes:
    w = _Writer()
    w.put("IIIIB", cfg.cycle_period_ms, cfg.inter_mcu_interval_cycles,
          cfg.deferred_bytes_per_cycle, cfg.readback_interval_cycles,
          1 if cfg.nondynamic_panic else 0)
    w.put("B", len(inputs))
    for d in inputs:
        w.put("Bii", 1 if d.kind == "INT" else 0, d.lo, d.hi)
        w.name(d.name)
    return bytes(w.buf)


def _decode_header(r: _Reader):
    cycle_entry, scratch_base, scratch_count = r.get("IIH")
    inputs = tuple(r.name() for _ in range(r.get("B")))
    return cycle_entry, scratch_base, scratch_count, inputs


def _decode_varmap(data: bytes, section: int):
    r = _Reader(data, section)
    slots = []
    for _ in range(r.get("H")):
        role, kind, length, lo, hi, addr = r.get("BBHiiI")
        if role > 1 or kind > 1 or lo > hi:
            raise IntegrityError("malformed section", "bad slot descriptor", section)
        slots.append(VarSlot(r.name(), "output" if role else "var", "INT" if kind else "BOOL",
                             length, lo, hi, addr))
    r.done()
    return tuple(slots)


def _decode_seqcfg(data: bytes):
    r = _Reader(data, SEQCFG)
    period, inter, k, readback, flags = r.get("IIIIB")
    try:
        cfg = SeqConfig(period, inter, k, readback, bool(flags & 1))
    except ValueError as exc:
        raise IntegrityError("malformed section", str(exc), SEQCFG) from None
    inputs = []
    for _ in range(r.get("B")):
        kind, lo, hi = r.get("Bii")
        inputs.append(InputDecl(r.name(), "INT" if kind else "BOOL", lo, hi))
    r.done()
    return cfg, tuple(inputs)


def input_decls(tm) -> Tuple[InputDecl, ...]:
    out = []
    for d in tm.inputs:
        if isinstance(d.type, A.BoolType):
            out.append(InputDecl(d.name, "BOOL", 0, 1))
        else:
            out.append(InputDecl(d.name, "INT", d.type.lo, d.type.hi))
    return tuple(out)


# -- linking ---------------------------------------------------------------

def _check_regions(slots, scratch_base, scratch_count, region: Region, label):
    spans = [(s.address, s.address + WORD * s.count, s.name) for s in slots]
    spans.append((scratch_base, scratch_base + WORD * scratch_count, "<scratch>"))
    for lo, hi, name in spans:
        if hi > lo and not (region.base <= lo and hi <= region.end):
            return f"{label} slot {name} at {lo:#06x} outside {region.name}"
    spans.sort()
    for (lo1, hi1, n1), (lo2, hi2, n2) in zip(spans, spans[1:]):
        if lo2 < hi1 and hi2 > lo2 and hi1 > lo1:
            return f"{label} slots {n1} and {n2} overlap"
    return None


def link(a: ImageA, b: ImageB, cfg: SeqConfig = SeqConfig(), inputs=None) -> bytes:
    """Combine both images and the sequencer configuration into a bundle.

    ``inputs`` are the model's :class:`InputDecl` entries; by default every
    input is taken to be BOOL."""
    if len(a.slots) != len(b.slots):
        raise LinkError(f"variable count mismatch: A has {len(a.slots)}, B has {len(b.slots)}")
    for sa, sb in zip(a.slots, b.slots):
        if (sa.name, sa.role, sa.kind, sa.length, sa.lo, sa.hi) != \
                (sb.name, sb.role, sb.kind, sb.length, sb.lo, sb.hi):
            raise LinkError(f"variable {sa.name!r} differs between images")
    if a.inputs != b.inputs:
        raise LinkError("input lists differ between images")
    for problem in (_check_regions(a.slots, a.scratch_base, a.scratch_count, VAR_A, "A"),
                    _check_regions(b.slots, b.scratch_base, b.scratch_count, VAR_B, "B")):
        if problem:
            raise LinkError(f"region violation: {problem}")
    if len(a.code) > PROG_A.size or len(b.code) > PROG_B.size:
        raise LinkError("region violation: code exceeds its program region")
    if inputs is None:
        inputs = tuple(InputDecl(n, "BOOL", 0, 1) for n in a.inputs)
    if tuple(d.name for d in inputs) != a.inputs:
        raise LinkError("input declarations do not match the images")

    payloads = [
        (IMAGE_A, _encode_image_a(a)),
        (IMAGE_B, _encode_image_b(b)),
        (VARMAP_A, _encode_varmap(a.slots)),
        (VARMAP_B, _encode_varmap(b.slots)),
        (SEQCFG, _encode_seqcfg(cfg, inputs)),
    ]
    out = bytearray(_HEADER.pack(MAGIC, VERSION, len(payloads)))
    offset = _HEADER.size + _SECTION.size * len(payloads)
    for kind, data in payloads:
        out += _SECTION.pack(kind, 0, offset, len(data), crc32(data))
        offset += len(data)
    for _, data in payloads:
        out += data
    out += struct.pack("<I", crc32(bytes(out)))
    return bytes(out)


def bootload(bundle: bytes) -> LoadedFirmware:
    """Verify every CRC, the section layout and region separation, then
    decode the bundle.  Raises :class:`IntegrityError` on any defect."""
    bundle = bytes(bundle)
    if len(bundle) < _HEADER.size + 4:
        raise IntegrityError("truncated", f"{len(bundle)} bytes")
    magic, version, count = _HEADER.unpack_from(bundle, 0)
    if magic != MAGIC:
        raise IntegrityError("bad magic", repr(magic))
    if version != VERSION:
        raise IntegrityError("bad version", str(version))
    if count != 5:
        raise IntegrityError("bad section table", f"{count} sections")
    table_end = _HEADER.size + _SECTION.size * count
    if len(bundle) < table_end + 4:
        raise IntegrityError("truncated", "section table incomplete")
    body_end = len(bundle) - 4
    sections: Dict[int, bytes] = {}
    spans = []
    for k in range(count):
        kind, pad, offset, length, crc = _SECTION.unpack_from(bundle, _HEADER.size + _SECTION.size * k)
        if kind != k + 1 or pad != 0:
            raise IntegrityError("bad section table", f"entry {k} has kind {kind}")
        if offset < table_end:
            raise IntegrityError("bad section table", f"section {kind} overlaps the header")
        if offset + length > body_end:
            raise IntegrityError("truncated", f"section {kind} ends past the payload area")
        spans.append((offset, offset + length, kind, crc))
    spans.sort()
    for (lo1, hi1, k1, _), (lo2, _, k2, _) in zip(spans, spans[1:]):
        if lo2 < hi1:
            raise IntegrityError("bad section table", f"sections {k1} and {k2} overlap")
    if spans[-1][1] != body_end:
        raise IntegrityError("bad section table", "unexpected bytes after the last section")
    for lo, hi, kind, crc in sorted(spans, key=lambda s: s[2]):
        data = bundle[lo:hi]
        if crc32(data) != crc:
            raise IntegrityError("bad CRC", "", kind)
        sections[kind] = data
    (stored,) = struct.unpack_from("<I", bundle, body_end)
    if crc32(bundle[:body_end]) != stored:
        raise IntegrityError("bad global CRC")

    slots_a = _decode_varmap(sections[VARMAP_A], VARMAP_A)
    slots_b = _decode_varmap(sections[VARMAP_B], VARMAP_B)
    cfg, inputs = _decode_seqcfg(sections[SEQCFG])

    r = _Reader(sections[IMAGE_A], IMAGE_A)
    entry, sbase, scount, names = _decode_header(r)
    code = r.rest(r.get("I"))
    r.done()
    img_a = ImageA(code, entry, slots_a, names, sbase, scount, crc32(code))

    r = _Reader(sections[IMAGE_B], IMAGE_B)
    entry, sbase, scount, names = _decode_header(r)
    loops = tuple(LoopEntry(*r.get("III")) for _ in range(r.get("H")))
    code = r.rest(r.get("I"))
    r.done()
    img_b = ImageB(code, entry, slots_b, names, sbase, scount, loops, crc32(code))

    for problem in (_check_regions(slots_a, img_a.scratch_base, img_a.scratch_count, VAR_A, "A"),
                    _check_regions(slots_b, img_b.scratch_base, img_b.scratch_count, VAR_B, "B")):
        if problem:
            raise IntegrityError("region overlap", problem)
    if len(img_a.code) > PROG_A.size or len(img_b.code) > PROG_B.size:
        raise IntegrityError("region overlap", "code exceeds its program region")
    if len(slots_a) != len(slots_b) or img_a.inputs != img_b.inputs or \
            tuple(d.name for d in inputs) != img_a.inputs:
        raise IntegrityError("malformed section", "images disagree on the interface")
    return LoadedFirmware(img_a, img_b, cfg, inputs, bundle, _LOADER_KEY)
