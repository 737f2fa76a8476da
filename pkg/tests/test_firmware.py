import dataclasses
import struct

import pytest
from hypothesis import given, strategies as st

from safeplc.backends import VarSlot
from safeplc.crc import crc32
from safeplc.firmware import (IMAGE_A, SEQCFG, IntegrityError, LinkError, LoadedFirmware,
                              SeqConfig, bootload, input_decls, link)

from conftest import bundle_for, images, typed


def crc32_bitwise(data: bytes) -> int:
    """Reference CRC-32/IEEE, one bit at a time."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


def test_crc_check_values():
    assert crc32(b"") == crc32_bitwise(b"") == 0
    assert crc32(b"123456789") == crc32_bitwise(b"123456789") == 0xCBF43926


@given(st.binary(max_size=64))
def test_crc_matches_reference(data):
    assert crc32(data) == crc32_bitwise(data)


def test_crc_detects_every_single_bit_change():
    for n in range(1, 9):
        data = bytes(range(n))
        base = crc32(data)
        for bit in range(8 * n):
            flipped = bytearray(data)
            flipped[bit // 8] ^= 1 << (bit % 8)
            assert crc32(bytes(flipped)) != base


def section_table(bundle):
    magic, version, count = struct.unpack_from("<4sHH", bundle, 0)
    rows = [struct.unpack_from("<BBIII", bundle, 8 + 14 * k) for k in range(count)]
    return magic, version, rows


def test_bundle_layout():
    bundle = bundle_for("blinker")
    magic, version, rows = section_table(bundle)
    assert (magic, version) == (b"CSP1", 1)
    assert [r[0] for r in rows] == [1, 2, 3, 4, 5]
    spans = sorted((r[2], r[2] + r[3]) for r in rows)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
    for kind, _, off, length, crc in rows:
        assert crc32_bitwise(bundle[off:off + length]) == crc
    assert struct.unpack("<I", bundle[-4:])[0] == crc32_bitwise(bundle[:-4])


def test_link_is_deterministic():
    assert bundle_for("sum_window") == bundle_for("sum_window")


@pytest.mark.parametrize("name", ["blinker", "sum_window", "shift_register", "divider"])
def test_round_trip(name):
    a, b = images(name)
    cfg = SeqConfig(cycle_period_ms=5, inter_mcu_interval_cycles=10, deferred_bytes_per_cycle=16)
    bundle = link(a, b, cfg, input_decls(typed(name)))
    fw = bootload(bundle)
    assert fw.image_a == a and fw.image_b == b and fw.cfg == cfg
    assert fw.image_a.code == a.code and fw.image_b.code == b.code
    assert fw.reference_crcs == (a.code_crc, b.code_crc)
    assert link(fw.image_a, fw.image_b, fw.cfg, fw.inputs) == bundle


def test_overlapping_var_regions_rejected():
    a, b = images("blinker")
    moved = tuple(dataclasses.replace(s, address=b.slots[0].address) for s in a.slots)
    with pytest.raises(LinkError, match="region"):
        link(dataclasses.replace(a, slots=moved), b)


def test_overlapping_slots_within_region_rejected():
    a, b = images("blinker")
    same = tuple(dataclasses.replace(s, address=a.slots[0].address) for s in a.slots)
    with pytest.raises(LinkError):
        link(dataclasses.replace(a, slots=same), b)


def test_mismatched_variable_counts_rejected():
    a, _ = images("blinker")
    _, b = images("traffic_light")
    with pytest.raises(LinkError, match="count"):
        link(a, b)


def test_seq_config_deadline():
    SeqConfig(cycle_period_ms=10, inter_mcu_interval_cycles=5)
    with pytest.raises(ValueError):
        SeqConfig(cycle_period_ms=10, inter_mcu_interval_cycles=6)
    with pytest.raises(ValueError):
        SeqConfig(deferred_bytes_per_cycle=0)
    assert SeqConfig().with_overrides({"deferred_bytes_per_cycle": "8"}).deferred_bytes_per_cycle == 8


def test_loaded_firmware_requires_bootload():
    fw = bootload(bundle_for("blinker"))
    with pytest.raises(TypeError):
        LoadedFirmware(fw.image_a, fw.image_b, fw.cfg, fw.inputs, fw.bundle)


def test_truncation_detected():
    bundle = bundle_for("blinker")
    for cut in (1, 2, 5, len(bundle) - 8, len(bundle)):
        with pytest.raises(IntegrityError) as info:
            bootload(bundle[:-cut])
        assert info.value.reason == "truncated"


def test_bad_magic():
    bundle = bytearray(bundle_for("blinker"))
    bundle[0] ^= 0x20
    with pytest.raises(IntegrityError) as info:
        bootload(bytes(bundle))
    assert info.value.reason == "bad magic"


def test_every_payload_byte_flip_names_its_section():
    bundle = bundle_for("blinker")
    _, _, rows = section_table(bundle)
    for kind, _, off, length, _ in rows:
        for pos in range(off, off + length):
            bad = bytearray(bundle)
            bad[pos] ^= 0xFF
            with pytest.raises(IntegrityError) as info:
                bootload(bytes(bad))
            assert info.value.reason == "bad CRC" and info.value.section == kind
            assert f"bad CRC at section {kind}" in str(info.value)


def test_global_crc_protects_header():
    bundle = bytearray(bundle_for("blinker"))
    bundle[-1] ^= 1
    with pytest.raises(IntegrityError) as info:
        bootload(bytes(bundle))
    assert info.value.reason == "bad global CRC"


def test_tampered_but_consistent_crcs_still_checked_for_regions():
    # rewrite VARMAP_A so a slot points into VAR_B and fix every CRC
    a, b = images("blinker")
    moved = (dataclasses.replace(a.slots[0], address=0xC100),) + a.slots[1:]
    from safeplc import firmware
    payloads = [firmware._encode_image_a(a), firmware._encode_image_b(b),
                firmware._encode_varmap(moved), firmware._encode_varmap(b.slots),
                firmware._encode_seqcfg(SeqConfig(), input_decls(typed("blinker")))]
    out = bytearray(struct.pack("<4sHH", b"CSP1", 1, 5))
    off = 8 + 14 * 5
    for k, p in enumerate(payloads, 1):
        out += struct.pack("<BBIII", k, 0, off, len(p), crc32(p))
        off += len(p)
    for p in payloads:
        out += p
    out += struct.pack("<I", crc32(bytes(out)))
    with pytest.raises(IntegrityError) as info:
        bootload(bytes(out))
    assert info.value.reason == "region overlap"


def test_malformed_payload_with_valid_crc():
    bundle = bytearray(bundle_for("blinker"))
    _, _, rows = section_table(bundle)
    kind, _, off, length, _ = rows[SEQCFG - 1]
    payload = bytearray(bundle[off:off + length])
    payload[4:8] = struct.pack("<I", 99)    # 99 x 10 ms breaks the deadline
    bundle[off:off + length] = payload
    struct.pack_into("<I", bundle, 8 + 14 * (SEQCFG - 1) + 10, crc32(bytes(payload)))
    struct.pack_into("<I", bundle, len(bundle) - 4, crc32(bytes(bundle[:-4])))
    with pytest.raises(IntegrityError) as info:
        bootload(bytes(bundle))
    assert info.value.reason == "malformed section" and info.value.section == SEQCFG
