"""Static worst-case cost bound for the CYCLE entry of a stack image.

Sequences add, conditionals take the costlier branch, and a counted loop
costs ``trip_count * iteration + exit_test`` using the image's loop table.
"""

from __future__ import annotations

from importlib import resources
from typing import Dict, Mapping, Optional

from .backends.chain_b import ISA_B, ImageB
from .backends.isa import load_cost_table

NEG_INF = float("-inf")


class WcetError(Exception):
    pass


def default_cost_text() -> str:
    return resources.files("safeplc").joinpath("default_costs.txt").read_text(encoding="utf-8")


def load_costs(path=None) -> Dict[str, int]:
    """Read a cost table file; ``None`` gives the shipped default table."""
    if path is None:
        return load_cost_table(default_cost_text())
    with open(path, encoding="utf-8") as fh:
        return load_cost_table(fh.read())


class _Analyzer:
    def __init__(self, img: ImageB, costs: Mapping[str, int]):
        self.instrs = {ins.offset: ins for ins in ISA_B.decode_all(img.code)}
        self.costs = costs
        self.loops = {e.head: e for e in img.loop_table}
        for e in img.loop_table:
            if e.head not in self.instrs or (e.exit not in self.instrs and e.exit != len(img.code)):
                raise WcetError(f"loop table entry {e} is not on instruction boundaries")
            if e.trip_count < 0:
                raise WcetError(f"negative trip count at {e.head:#06x}")
        missing = {i.mnemonic for i in self.instrs.values()} - set(costs)
        if missing:
            raise WcetError(f"cost table lacks {', '.join(sorted(missing))}")
        self.memo: Dict[tuple, float] = {}
        self.loop_memo: Dict[int, float] = {}

    def cost(self, ins) -> int:
        return self.costs[ins.mnemonic]

    def loop_total(self, head: int) -> float:
        if head not in self.loop_memo:
            e = self.loops[head]
            body = self.path(head, ("iter", head), True)
            exit_test = self.path(head, ("exit", head), True)
            if body == NEG_INF or exit_test == NEG_INF:
                raise WcetError(f"loop at {head:#06x} does not match its table entry")
            self.loop_memo[head] = e.trip_count * body + exit_test
        return self.loop_memo[head]

    def path(self, pc: int, ctx: Optional[tuple], at_head: bool = False) -> float:
        """Longest cost from ``pc`` to the end of the context: HALT at top
        level, the back edge (``iter``) or the loop exit (``exit``)."""
        key = (pc, ctx, at_head)
        if key in self.memo:
            return self.memo[key]
        total = 0
        start = pc
        while True:
            if ctx is not None:
                e = self.loops[ctx[1]]
                if pc == e.exit:
                    result = total if ctx[0] == "exit" else NEG_INF
                    break
            if pc in self.loops and not (at_head and pc == start):
                total += self.loop_total(pc)
                pc = self.loops[pc].exit
                continue
            ins = self.instrs.get(pc)
            if ins is None:
                raise WcetError(f"control reaches {pc:#06x}, not an instruction boundary")
            total += self.cost(ins)
            nxt = pc + ins.size
            if ins.mnemonic == "HALT":
                result = total if ctx is None else NEG_INF
                break
            if ins.mnemonic == "JMP":
                target = ins.operands[0]
                if ctx is not None and target == ctx[1]:
                    result = total if ctx[0] == "iter" else NEG_INF
                    break
                if target <= pc:
                    raise WcetError(f"backward jump at {pc:#06x} has no loop table entry")
                pc = target
                continue
            if ins.mnemonic == "JZ":
                target = ins.operands[0]
                if target <= pc:
                    raise WcetError(f"backward jump at {pc:#06x} has no loop table entry")
                result = total + max(self.path(nxt, ctx), self.path(target, ctx))
                break
            pc = nxt
        self.memo[key] = result
        return result


def analyze(img: ImageB, costs: Optional[Mapping[str, int]] = None, entry: Optional[int] = None) -> int:
    """Worst-case cost of one CYCLE execution of ``img`` (or of the code at
    ``entry``)."""
    if not isinstance(img, ImageB):
        raise WcetError("bounds are computed for stack images only")
    costs = load_costs() if costs is None else costs
    bound = _Analyzer(img, costs).path(img.cycle_entry if entry is None else entry, None)
    if bound == NEG_INF:
        raise WcetError("no path reaches HALT")
    return int(bound)
