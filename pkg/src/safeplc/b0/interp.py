"""Reference big-step interpreter and the canonical state encoding.

A machine state is a plain mapping from state-variable name to value:
``bool`` for BOOL, ``int`` for INT and a ``tuple`` for arrays.  Functions
here never mutate their arguments.
"""

from __future__ import annotations

import struct
from typing import Dict, Mapping, Tuple

from . import arith
from . import ast as A
from .typecheck import TypedModel

MachineState = Dict[str, object]


class B0RuntimeError(Exception):
    """Runtime domain violation: ``kind`` is ``range``, ``index`` or ``div``."""

    def __init__(self, kind: str, message: str, loc: str):
        self.kind = kind
        self.loc = loc
        super().__init__(f"{loc}: {kind}: {message}")


def eval_expr(e, env: Mapping[str, object], loc: str = "?"):
    if isinstance(e, (A.IntLit, A.BoolLit)):
        return e.value
    if isinstance(e, A.Var):
        return env[e.name]
    if isinstance(e, A.Index):
        arr = env[e.name]
        i = eval_expr(e.index, env, loc)
        if not 0 <= i < len(arr):
            raise B0RuntimeError("index", f"{e.name}({i}) out of bounds 0..{len(arr) - 1}", loc)
        return arr[i]
    if isinstance(e, A.BinOp):
        a = eval_expr(e.left, env, loc)
        b = eval_expr(e.right, env, loc)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise B0RuntimeError("div", f"{e.op} by zero", loc)
        return arith.tdiv(a, b) if e.op == "div" else arith.tmod(a, b)
    if isinstance(e, A.Neg):
        return -eval_expr(e.operand, env, loc)
    if isinstance(e, A.Cmp):
        a = eval_expr(e.left, env, loc)
        b = eval_expr(e.right, env, loc)
        return _CMP[e.op](a, b)
    if isinstance(e, A.BoolOp):
        # both operands are always evaluated
        a = eval_expr(e.left, env, loc)
        b = eval_expr(e.right, env, loc)
        return (a and b) if e.op == "&" else (a or b)
    if isinstance(e, A.Not):
        return not eval_expr(e.operand, env, loc)
    raise TypeError(f"cannot evaluate {e!r}")


_CMP = {
    "=": lambda a, b: a == b,
    "/=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class _Exec:
    def __init__(self, tm: TypedModel):
        self.types = {d.name: d.type for d in tm.inputs + tm.state}

    def run(self, stmts, env):
        for s in stmts:
            if isinstance(s, A.Assign):
                self.assign(s, env)
            elif isinstance(s, A.If):
                for cond, body in s.branches:
                    if eval_expr(cond, env, s.loc):
                        self.run(body, env)
                        break
                else:
                    self.run(s.orelse, env)
            else:
                lo, hi = s.bounds
                for k in range(lo, hi + 1):
                    env[s.var] = k
                    self.run(s.body, env)
                env.pop(s.var, None)

    def assign(self, s: A.Assign, env):
        t = self.types[s.target]
        idx = None if s.index is None else eval_expr(s.index, env, s.loc)
        value = eval_expr(s.value, env, s.loc)
        if idx is not None:
            if not 0 <= idx < t.length:
                raise B0RuntimeError("index", f"{s.target}({idx}) out of bounds 0..{t.length - 1}",
                                     s.loc)
            t = t.elem
        if isinstance(t, A.IntType) and not t.lo <= value <= t.hi:
            raise B0RuntimeError("range", f"{value} outside {t} for {s.target}", s.loc)
        if idx is None:
            env[s.target] = value
        else:
            arr = list(env[s.target])
            arr[idx] = value
            env[s.target] = tuple(arr)


def initial_state(tm: TypedModel) -> MachineState:
    """Run the INIT statements from an empty state."""
    env: Dict[str, object] = {}
    for d in tm.state:
        if isinstance(d.type, A.ArrayType):
            env[d.name] = (None,) * d.type.length
    _Exec(tm).run(tm.init, env)
    return {d.name: env[d.name] for d in tm.state}


def interpret_cycle(tm: TypedModel, s: Mapping[str, object],
                    inputs: Mapping[str, object]) -> Tuple[MachineState, Dict[str, object]]:
    """Execute one CYCLE.  Returns ``(post_state, outputs)``."""
    env = dict(s)
    env.update(inputs)
    _Exec(tm).run(tm.cycle, env)
    post = {d.name: env[d.name] for d in tm.state}
    outs = {d.name: env[d.name] for d in tm.outputs}
    return post, outs


def canonical_snapshot(tm_or_decls, s: Mapping[str, object]) -> bytes:
    """Encode ``s`` in canonical order: BOOL one byte, INT four bytes
    little-endian two's complement, arrays element by element."""
    decls = tm_or_decls.state if isinstance(tm_or_decls, TypedModel) else tm_or_decls
    out = bytearray()
    for d in decls:
        v = s[d.name]
        et = A.elem_type(d.type)
        for x in (v if isinstance(d.type, A.ArrayType) else (v,)):
            if isinstance(et, A.BoolType):
                out.append(1 if x else 0)
            else:
                out += struct.pack("<i", x)
    return bytes(out)


def enumerate_states(tm: TypedModel):
    """Yield every well-typed state of ``tm`` (use only on small models)."""
    import itertools

    per_var = []
    for d in tm.state:
        et = A.elem_type(d.type)
        dom = (False, True) if isinstance(et, A.BoolType) else range(et.lo, et.hi + 1)
        if isinstance(d.type, A.ArrayType):
            per_var.append(list(itertools.product(dom, repeat=d.type.length)))
        else:
            per_var.append(list(dom))
    for combo in itertools.product(*per_var):
        yield {d.name: v for d, v in zip(tm.state, combo)}


def enumerate_inputs(tm: TypedModel):
    import itertools

    doms = []
    for d in tm.inputs:
        doms.append((False, True) if isinstance(d.type, A.BoolType)
                    else range(d.type.lo, d.type.hi + 1))
    for combo in itertools.product(*doms):
        yield {d.name: v for d, v in zip(tm.inputs, combo)}
