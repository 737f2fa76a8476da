import re
from functools import lru_cache

import pytest

from safeplc import corpus
from safeplc.b0 import load
from safeplc.backends import compile_a, compile_b
from safeplc.firmware import SeqConfig, bootload, input_decls, link


@lru_cache(maxsize=None)
def typed(name):
    return load(corpus.model_source(name))


@lru_cache(maxsize=None)
def images(name):
    tm = typed(name)
    return compile_a(tm), compile_b(tm)


def bundle_for(name, cfg=SeqConfig()):
    a, b = images(name)
    return link(a, b, cfg, input_decls(typed(name)))


def firmware_for(name, cfg=SeqConfig()):
    return bootload(bundle_for(name, cfg))


@pytest.fixture
def blinker():
    return typed("blinker")


@pytest.fixture
def blinker_fw():
    return firmware_for("blinker")


# -- one summary line per acceptance criterion ------------------------------

_CRITERIA = {}
_NAME = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = _NAME.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    prev = _CRITERIA.get(n, (m.group(2), True))
    failed = report.failed or (report.when == "call" and report.skipped)
    _CRITERIA[n] = (prev[0], prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        label, ok = _CRITERIA[n]
        terminalreporter.write_line(
            f"ACCEPTANCE criterion {n}: {'PASS' if ok else 'FAIL'}  ({label.replace('_', ' ')})")
