"""XML and plain-text rendering of proof obligations."""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..b0.pretty import expr_str
from .prover import COUNTEREXAMPLE, ProofResult

_STATUS = {"PROVED_INTERVAL": "proved", "PROVED_ENUM": "proved",
           "UNPROVEN": "unproved", COUNTEREXAMPLE: "counterexample"}


class ExportError(ValueError):
    pass


def _witness_text(witness) -> str:
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)
    return ",".join(f"{k}={fmt(v)}" for k, v in witness.items())


def _by_id(pos, results):
    ids = [po.id for po in pos]
    by_id = {r.po_id: r for r in results}
    if sorted(ids) != sorted(by_id) or len(by_id) != len(results):
        raise ExportError(f"result ids {sorted(by_id)} do not match PO ids {sorted(ids)}")
    return by_id


def export_pos(model_name: str, pos, results) -> bytes:
    """Serialise obligations and their status; identical inputs give
    identical bytes."""
    by_id = _by_id(pos, results)
    root = ET.Element("pos", {"model": model_name})
    for po in pos:
        r: ProofResult = by_id[po.id]
        el = ET.SubElement(root, "po", {"id": str(po.id), "kind": po.kind,
                                        "loc": po.source_location,
                                        "status": _STATUS[r.status]})
        for h in po.hypotheses:
            ET.SubElement(el, "hyp").text = expr_str(h)
        ET.SubElement(el, "goal").text = expr_str(po.goal)
        if r.witness is not None:
            ET.SubElement(el, "witness").text = _witness_text(r.witness)
    if len(root):
        ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def format_text(model_name: str, pos, results) -> str:
    by_id = _by_id(pos, results)
    rows = [("id", "kind", "loc", "status", "goal")]
    for po in pos:
        r = by_id[po.id]
        goal = expr_str(po.goal)
        if len(goal) > 60:
            goal = goal[:57] + "..."
        status = r.status
        if r.witness is not None:
            status += f" [{_witness_text(r.witness)}]"
        rows.append((str(po.id), po.kind, po.source_location, status, goal))
    widths = [max(len(row[k]) for row in rows) for k in range(4)]
    lines = [f"proof obligations for {model_name}"]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row[:4], widths)) + "  " + row[4])
    return "\n".join(lines) + "\n"
