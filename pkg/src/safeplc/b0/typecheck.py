"""Static checking of B0 models."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from . import arith
from . import ast as A
from .parser import B0Error


class B0TypeError(B0Error):
    """Static error.  ``kind`` is one of ``type-mismatch``, ``undeclared``,
    ``assign-to-input``, ``assign-to-loop-var``, ``non-literal-bound``,
    ``use-before-init``, ``not-initialized``, ``overflow``, ``shape``."""

    def __init__(self, kind: str, message: str, loc: str = "0:0"):
        self.kind = kind
        line, col = (int(x) for x in loc.split(":")) if loc != "?" else (0, 0)
        super().__init__(f"{kind}: {message}", line, col)


@dataclass(frozen=True)
class TypedModel:
    """A checked model.  All expression nodes carry ``ty``: ``BOOL`` or an
    :class:`IntType` holding the expression's static value interval."""
    model: A.Model
    state: Tuple[A.Decl, ...]

    @property
    def name(self):
        return self.model.name

    @property
    def inputs(self):
        return self.model.inputs

    @property
    def outputs(self):
        return self.model.outputs

    @property
    def vars(self):
        return self.model.vars

    @property
    def invariant(self):
        return self.model.invariant

    @property
    def init(self):
        return self.model.init

    @property
    def cycle(self):
        return self.model.cycle

    def index_of(self, name: str) -> int:
        for k, d in enumerate(self.state):
            if d.name == name:
                return k
        raise KeyError(name)

    def decl(self, name):
        return self.model.decl(name)


def _to_interval(t: A.IntType) -> arith.Interval:
    return arith.Interval(t.lo, t.hi)


class _Checker:
    def __init__(self, m: A.Model):
        self.m = m
        self.roles: Dict[str, Tuple[str, A.B0Type]] = {}
        for role, decls in (("input", m.inputs), ("output", m.outputs), ("var", m.vars)):
            for d in decls:
                self.roles[d.name] = (role, d.type)
        self.loop_vars: Dict[str, A.IntType] = {}

    def err(self, kind, msg, loc="?"):
        raise B0TypeError(kind, msg, loc)

    # -- expressions
    def expr(self, e, loc, allow_inputs=True):
        if isinstance(e, A.IntLit):
            return dataclasses.replace(e, ty=A.IntType(e.value, e.value))
        if isinstance(e, A.BoolLit):
            return dataclasses.replace(e, ty=A.BOOL)
        if isinstance(e, A.Var):
            if e.name in self.loop_vars:
                return dataclasses.replace(e, ty=self.loop_vars[e.name])
            role, t = self.lookup(e.name, loc)
            if role == "input" and not allow_inputs:
                self.err("type-mismatch", f"input {e.name!r} not readable here", loc)
            if isinstance(t, A.ArrayType):
                self.err("shape", f"array {e.name!r} used without index", loc)
            return dataclasses.replace(e, ty=t)
        if isinstance(e, A.Index):
            role, t = self.lookup(e.name, loc)
            if role == "input" and not allow_inputs:
                self.err("type-mismatch", f"input {e.name!r} not readable here", loc)
            if not isinstance(t, A.ArrayType):
                self.err("shape", f"{e.name!r} is not an array", loc)
            idx = self.int_expr(e.index, loc, allow_inputs)
            return A.Index(e.name, idx, ty=t.elem)
        if isinstance(e, A.BinOp):
            left = self.int_expr(e.left, loc, allow_inputs)
            right = self.int_expr(e.right, loc, allow_inputs)
            iv = arith.ARITH[e.op](_to_interval(left.ty), _to_interval(right.ty))
            return A.BinOp(e.op, left, right, ty=self.checked_range(iv, loc))
        if isinstance(e, A.Neg):
            operand = self.int_expr(e.operand, loc, allow_inputs)
            iv = arith.neg(_to_interval(operand.ty))
            return A.Neg(operand, ty=self.checked_range(iv, loc))
        if isinstance(e, A.Cmp):
            left = self.expr(e.left, loc, allow_inputs)
            right = self.expr(e.right, loc, allow_inputs)
            lb, rb = left.ty == A.BOOL, right.ty == A.BOOL
            if lb != rb:
                self.err("type-mismatch", f"cannot compare BOOL with INT using {e.op!r}", loc)
            if lb and e.op not in ("=", "/="):
                self.err("type-mismatch", f"ordering {e.op!r} on BOOL", loc)
            return A.Cmp(e.op, left, right, ty=A.BOOL)
        if isinstance(e, A.BoolOp):
            left = self.bool_expr(e.left, loc, allow_inputs)
            right = self.bool_expr(e.right, loc, allow_inputs)
            return A.BoolOp(e.op, left, right, ty=A.BOOL)
        if isinstance(e, A.Not):
            return A.Not(self.bool_expr(e.operand, loc, allow_inputs), ty=A.BOOL)
        self.err("type-mismatch", f"unsupported expression {e!r}", loc)

    def int_expr(self, e, loc, allow_inputs=True):
        te = self.expr(e, loc, allow_inputs)
        if te.ty == A.BOOL:
            self.err("type-mismatch", "expected INT expression, found BOOL", loc)
        return te

    def bool_expr(self, e, loc, allow_inputs=True):
        te = self.expr(e, loc, allow_inputs)
        if te.ty != A.BOOL:
            self.err("type-mismatch", "expected BOOL expression, found INT", loc)
        return te

    def checked_range(self, iv: arith.Interval, loc):
        if iv.lo < A.INT64_MIN or iv.hi > A.INT64_MAX:
            self.err("overflow", f"intermediate range [{iv.lo}, {iv.hi}] exceeds 64 bits", loc)
        return A.IntType(iv.lo, iv.hi)

    def lookup(self, name, loc):
        if name not in self.roles:
            self.err("undeclared", f"undeclared name {name!r}", loc)
        return self.roles[name]

    # -- statements
    def stmts(self, stmts, in_init):
        return tuple(self.stmt(s, in_init) for s in stmts)

    def stmt(self, s, in_init):
        loc = s.loc
        if isinstance(s, A.Assign):
            if s.target in self.loop_vars:
                self.err("assign-to-loop-var", f"loop variable {s.target!r} is read-only", loc)
            role, t = self.lookup(s.target, loc)
            if role == "input":
                self.err("assign-to-input", f"cannot assign input {s.target!r}", loc)
            index = None
            if isinstance(t, A.ArrayType):
                if s.index is None:
                    self.err("shape", f"array {s.target!r} assigned without index", loc)
                index = self.int_expr(s.index, loc, not in_init)
                t = t.elem
            elif s.index is not None:
                self.err("shape", f"{s.target!r} is not an array", loc)
            value = self.expr(s.value, loc, not in_init)
            if (t == A.BOOL) != (value.ty == A.BOOL):
                self.err("type-mismatch", f"cannot assign {_kind(value.ty)} to {s.target!r}: {t}", loc)
            return A.Assign(s.target, index, value, loc)
        if isinstance(s, A.If):
            branches = tuple((self.bool_expr(c, loc, not in_init), self.stmts(b, in_init))
                             for c, b in s.branches)
            return A.If(branches, self.stmts(s.orelse, in_init), loc)
        if isinstance(s, A.For):
            lo, hi = _literal(s.lo), _literal(s.hi)
            if lo is None or hi is None:
                self.err("non-literal-bound", f"FOR {s.var} bounds must be integer literals", loc)
            if s.var in self.roles or s.var in self.loop_vars:
                self.err("type-mismatch", f"loop variable {s.var!r} shadows another name", loc)
            if not (A.INT32_MIN <= lo and hi < A.INT32_MAX):
                self.err("overflow", "loop bounds must fit in 32 bits", loc)
            self.loop_vars[s.var] = A.IntType(lo, max(lo, hi))
            body = self.stmts(s.body, in_init)
            del self.loop_vars[s.var]
            return A.For(s.var, A.IntLit(lo, ty=A.IntType(lo, lo)),
                         A.IntLit(hi, ty=A.IntType(hi, hi)), body, loc)
        raise TypeError(s)

    def check(self) -> TypedModel:
        m = self.m
        for d in m.inputs:
            if isinstance(d.type, A.ArrayType):
                self.err("shape", f"input {d.name!r} must be scalar", d.loc)
        inv = self.bool_expr(m.invariant, "?", allow_inputs=False)
        init = self.stmts(m.init, in_init=True)
        cycle = self.stmts(m.cycle, in_init=False)
        typed = dataclasses.replace(m, invariant=inv, init=init, cycle=cycle)
        _check_init(typed)
        return TypedModel(typed, m.state_decls)


def _kind(t):
    return "BOOL" if t == A.BOOL else "INT"


def _literal(e) -> Optional[int]:
    if isinstance(e, A.IntLit):
        return e.value
    if isinstance(e, A.Neg) and isinstance(e.operand, A.IntLit):
        return -e.operand.value
    return None


# -- definite assignment in INIT -------------------------------------------

def _const(e, env) -> Optional[int]:
    if isinstance(e, A.IntLit):
        return e.value
    if isinstance(e, A.Var):
        return env.get(e.name)
    if isinstance(e, A.Neg):
        v = _const(e.operand, env)
        return None if v is None else -v
    if isinstance(e, A.BinOp):
        a, b = _const(e.left, env), _const(e.right, env)
        if a is None or b is None:
            return None
        if e.op in ("div", "mod"):
            if b == 0:
                return None
            return arith.tdiv(a, b) if e.op == "div" else arith.tmod(a, b)
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    return None


def _check_init(m: A.Model):
    sizes = {d.name: A.scalar_count(d.type) for d in m.state_decls}

    def need(name, idx, loc, assigned):
        have = assigned.get(name, frozenset())
        if idx is None:
            ok = len(have) == sizes[name]
        else:
            ok = idx in have or not (0 <= idx < sizes[name])
        if not ok:
            what = name if idx is None or sizes[name] == 1 else f"{name}({idx})"
            raise B0TypeError("use-before-init", f"{what} read before being assigned in INIT", loc)

    def reads(e, env, loc, assigned):
        for sub in A.walk(e):
            if isinstance(sub, A.Var) and sub.name in sizes:
                need(sub.name, None, loc, assigned)
            elif isinstance(sub, A.Index):
                need(sub.name, _const(sub.index, env), loc, assigned)

    def run(stmts, env, assigned):
        for s in stmts:
            if isinstance(s, A.Assign):
                if s.index is not None:
                    reads(s.index, env, s.loc, assigned)
                reads(s.value, env, s.loc, assigned)
                if s.index is None:
                    assigned = {**assigned, s.target: frozenset(range(sizes[s.target]))}
                else:
                    k = _const(s.index, env)
                    if k is not None and 0 <= k < sizes[s.target]:
                        assigned = {**assigned,
                                    s.target: assigned.get(s.target, frozenset()) | {k}}
            elif isinstance(s, A.If):
                outs = []
                for cond, body in s.branches:
                    reads(cond, env, s.loc, assigned)
                    outs.append(run(body, env, assigned))
                outs.append(run(s.orelse, env, assigned))
                assigned = {n: frozenset.intersection(*(o.get(n, frozenset()) for o in outs))
                            for n in sizes}
            elif isinstance(s, A.For):
                lo, hi = s.bounds
                for k in range(lo, hi + 1):
                    assigned = run(s.body, {**env, s.var: k}, assigned)
        return assigned

    assigned = run(m.init, {}, {})
    for d in m.state_decls:
        if len(assigned.get(d.name, ())) != sizes[d.name]:
            raise B0TypeError("not-initialized", f"INIT does not assign all of {d.name!r}", d.loc)


def typecheck(m: A.Model) -> TypedModel:
    """Check ``m`` and return it with every expression annotated."""
    return _Checker(m).check()
