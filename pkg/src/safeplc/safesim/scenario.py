"""Scenario files and whole-run simulation traces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from ..firmware import LoadedFirmware
from .faults import fault_from_json
from .platform import (PANIC, RUNNING, CycleReport, InputSample, PlatformError, new_platform,
                       step)


class ScenarioError(ValueError):
    pass


@dataclass
class FaultScenario:
    """``inputs`` maps a cycle to the samples that change at that cycle.
    Levels are held until changed; a pulse counter not given explicitly
    advances by one every cycle."""
    horizon: int
    inputs: Dict[int, Dict[str, dict]] = field(default_factory=dict)
    faults: List[Tuple[int, object]] = field(default_factory=list)

    def __post_init__(self):
        if self.horizon < 0:
            raise ScenarioError("horizon must be non-negative")
        for c, _ in self.faults:
            if not 0 <= c < max(self.horizon, 1):
                raise ScenarioError(f"fault cycle {c} outside horizon {self.horizon}")
        for c in self.inputs:
            if not 0 <= c < max(self.horizon, 1):
                raise ScenarioError(f"input cycle {c} outside horizon {self.horizon}")

    def frames(self, decls):
        level = {d.name: (d.lo if d.kind == "INT" else 0) for d in decls}
        pulse = {d.name: 0 for d in decls}
        for c in range(self.horizon):
            given = self.inputs.get(c, {})
            for name in given:
                if name not in level:
                    raise ScenarioError(f"cycle {c}: unknown input {name!r}")
            for d in decls:
                v = given.get(d.name, {})
                if "level" in v:
                    level[d.name] = int(v["level"])
                pulse[d.name] = int(v["pulse"]) if "pulse" in v else pulse[d.name] + 1
            yield {n: InputSample(level[n], pulse[n]) for n in level}

    def faults_at(self, cycle: int):
        return [f for c, f in self.faults if c == cycle]


def parse_scenario(text: str) -> FaultScenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "horizon" not in doc:
        raise ScenarioError("scenario needs a 'horizon'")
    inputs: Dict[int, Dict[str, dict]] = {}
    for entry in doc.get("inputs", []):
        values = entry.get("values", {})
        for name, v in values.items():
            if not isinstance(v, dict):
                values[name] = {"level": v}
        inputs.setdefault(int(entry["cycle"]), {}).update(values)
    faults = []
    for entry in doc.get("faults", []):
        try:
            faults.append((int(entry["cycle"]), fault_from_json(entry)))
        except (KeyError, ValueError) as exc:
            raise ScenarioError(str(exc)) from None
    return FaultScenario(int(doc["horizon"]), inputs, faults)


def load_scenario(path) -> FaultScenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


@dataclass
class Trace:
    reports: List[CycleReport]
    status: str
    panic: dict = None

    def lines(self) -> List[str]:
        return [json.dumps(r.to_json(), sort_keys=True, separators=(",", ":"))
                for r in self.reports]

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in self.lines())


def run_scenario(fw: LoadedFirmware, sc: FaultScenario) -> Trace:
    """Step a fresh platform through ``sc`` until the horizon or panic."""
    p = new_platform(fw)
    reports: List[CycleReport] = []
    if p.status == PANIC:
        rep = CycleReport(0, 0, checks=list(p.init_checks), status=PANIC, panic=p.panic_info,
                          led=True)
        return Trace([rep], PANIC, p.panic_info)
    for cycle, frame in enumerate(sc.frames(fw.inputs)):
        try:
            reports.append(step(p, frame, sc.faults_at(cycle)))
        except PlatformError as exc:
            raise ScenarioError(f"cycle {cycle}: {exc}") from None
        if p.status != RUNNING:
            break
    return Trace(reports, p.status, p.panic_info)


def write_trace(trace: Trace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.to_jsonl())
