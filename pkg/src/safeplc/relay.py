"""Relay-schematic DSL and its translation to B0.

Grammar, one item per line (``--`` starts a comment)::

    RELAYNET name
    INPUT  id ...
    RELAY  id ...
    OUTPUT id ...
    coil := cexpr
    LATCH relay SET cexpr RESET cexpr
    INVARIANT b0-expression

    cexpr := NO(id) | NC(id) | cexpr AND cexpr | cexpr OR cexpr | ( cexpr )

AND binds tighter than OR.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .b0 import ast as A
from .b0.parser import KEYWORDS, B0Error, parse_expr
from .b0.pretty import expr_str


class RelayError(Exception):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Contact:
    name: str
    normally_open: bool = True


@dataclass(frozen=True)
class Series:
    left: "CExpr"
    right: "CExpr"


@dataclass(frozen=True)
class Parallel:
    left: "CExpr"
    right: "CExpr"


CExpr = Union[Contact, Series, Parallel]


@dataclass(frozen=True)
class Rung:
    coil: str
    expr: CExpr
    line: int = 0


@dataclass(frozen=True)
class Latch:
    relay: str
    set: CExpr
    reset: CExpr
    line: int = 0


@dataclass
class RelayNet:
    name: str
    inputs: List[str] = field(default_factory=list)
    relays: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    rungs: List[Rung] = field(default_factory=list)
    latches: List[Latch] = field(default_factory=list)
    invariant: Optional[str] = None

    @property
    def definitions(self) -> List[Union[Rung, Latch]]:
        """Rungs and latches in source order."""
        return sorted(self.rungs + self.latches, key=lambda d: d.line)

    @property
    def signals(self) -> List[str]:
        return self.inputs + self.relays + self.outputs


def contacts(e: CExpr):
    if isinstance(e, Contact):
        yield e.name
    else:
        yield from contacts(e.left)
        yield from contacts(e.right)


_TOKEN = re.compile(r"\s*(?:(:=)|([()])|([A-Za-z_][A-Za-z0-9_]*))")


def _tokens(text: str, line: int) -> List[str]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise RelayError(f"unexpected character {text[pos:].strip()[:1]!r}", line)
        out.append(m.group(m.lastindex))
        pos = m.end()
    return out


class _CExprParser:
    def __init__(self, toks: List[str], line: int):
        self.toks = toks
        self.pos = 0
        self.line = line

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected=None) -> str:
        t = self.peek()
        if t is None or (expected is not None and t != expected):
            raise RelayError(f"expected {expected or 'a contact'}, got {t or 'end of line'}",
                             self.line)
        self.pos += 1
        return t

    def parallel(self) -> CExpr:
        e = self.series()
        while self.peek() == "OR":
            self.take()
            e = Parallel(e, self.series())
        return e

    def series(self) -> CExpr:
        e = self.atom()
        while self.peek() == "AND":
            self.take()
            e = Series(e, self.atom())
        return e

    def atom(self) -> CExpr:
        t = self.take()
        if t == "(":
            e = self.parallel()
            self.take(")")
            return e
        if t in ("NO", "NC"):
            self.take("(")
            name = self.take()
            if not _is_ident(name):
                raise RelayError(f"expected a signal name, got {name}", self.line)
            self.take(")")
            return Contact(name, t == "NO")
        raise RelayError(f"expected NO(..), NC(..) or '(', got {t}", self.line)


_RESERVED = KEYWORDS | {"RELAYNET", "INPUT", "RELAY", "OUTPUT", "LATCH", "SET", "RESET",
                        "NO", "NC", "AND", "OR"}


def _is_ident(t: str) -> bool:
    return bool(re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", t)) and t not in _RESERVED


def _cexpr(toks: List[str], line: int) -> CExpr:
    p = _CExprParser(toks, line)
    e = p.parallel()
    if p.peek() is not None:
        raise RelayError(f"unexpected {p.peek()!r}", line)
    return e


def parse_relay(text: str) -> RelayNet:
    """Parse and validate a relay net (declarations, coils, acyclicity)."""
    net: Optional[RelayNet] = None
    declared: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("--", 1)[0].strip()
        if not body:
            continue
        head = body.split(None, 1)[0]
        if head == "INVARIANT":
            if net is None:
                raise RelayError("RELAYNET header must come first", lineno)
            net.invariant = body[len(head):].strip()
            continue
        toks = _tokens(body, lineno)
        if head == "RELAYNET":
            if net is not None or len(toks) != 2 or not _is_ident(toks[1]):
                raise RelayError("expected a single 'RELAYNET name' header", lineno)
            net = RelayNet(toks[1])
            continue
        if net is None:
            raise RelayError("RELAYNET header must come first", lineno)
        if head in ("INPUT", "RELAY", "OUTPUT"):
            target = {"INPUT": net.inputs, "RELAY": net.relays, "OUTPUT": net.outputs}[head]
            for name in toks[1:]:
                if not _is_ident(name):
                    raise RelayError(f"bad signal name {name!r}", lineno)
                if name in declared:
                    raise RelayError(f"{name!r} already declared on line {declared[name][1]}",
                                     lineno)
                declared[name] = (head, lineno)
                target.append(name)
        elif head == "LATCH":
            if "SET" not in toks or "RESET" not in toks or len(toks) < 2:
                raise RelayError("expected 'LATCH relay SET cexpr RESET cexpr'", lineno)
            i, j = toks.index("SET"), toks.index("RESET")
            if i != 2 or j < i:
                raise RelayError("expected 'LATCH relay SET cexpr RESET cexpr'", lineno)
            net.latches.append(Latch(toks[1], _cexpr(toks[3:j], lineno),
                                     _cexpr(toks[j + 1:], lineno), lineno))
        elif len(toks) >= 2 and toks[1] == ":=":
            net.rungs.append(Rung(toks[0], _cexpr(toks[2:], lineno), lineno))
        else:
            raise RelayError(f"cannot parse {body!r}", lineno)
    if net is None:
        raise RelayError("missing RELAYNET header")
    _validate(net, declared)
    topological_order(net)
    return net


def _validate(net: RelayNet, declared):
    defined: Dict[str, int] = {}
    for d in net.definitions:
        coil = d.coil if isinstance(d, Rung) else d.relay
        if coil not in declared:
            raise RelayError(f"coil {coil!r} is not declared", d.line)
        if declared[coil][0] == "INPUT":
            raise RelayError(f"input {coil!r} cannot be driven by a coil", d.line)
        if coil in defined:
            raise RelayError(f"coil {coil!r} already driven on line {defined[coil]}", d.line)
        defined[coil] = d.line
        exprs = [d.expr] if isinstance(d, Rung) else [d.set, d.reset]
        for e in exprs:
            for name in contacts(e):
                if name not in declared:
                    raise RelayError(f"contact on undeclared signal {name!r}", d.line)
    if net.invariant is not None:
        try:
            parse_expr(net.invariant)
        except B0Error as exc:
            raise RelayError(f"bad invariant: {exc}") from None


def topological_order(net: RelayNet) -> List[Union[Rung, Latch]]:
    """Coil definitions ordered so that every coil is computed after the
    coils its contacts read.  Ties keep source order."""
    defs = net.definitions
    index = {(d.coil if isinstance(d, Rung) else d.relay): k for k, d in enumerate(defs)}
    deps: List[set] = []
    for k, d in enumerate(defs):
        exprs = [d.expr] if isinstance(d, Rung) else [d.set, d.reset]
        deps.append({index[n] for e in exprs for n in contacts(e) if n in index})
    users: Dict[int, List[int]] = {k: [] for k in range(len(defs))}
    for k, ds in enumerate(deps):
        for j in ds:
            users[j].append(k)
    pending = [len(ds) for ds in deps]
    ready = [k for k, n in enumerate(pending) if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        k = heapq.heappop(ready)
        order.append(defs[k])
        for u in users[k]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != len(defs):
        stuck = [defs[k] for k, n in enumerate(pending) if n]
        names = ", ".join(d.coil if isinstance(d, Rung) else d.relay for d in stuck)
        raise RelayError(f"dependency cycle through {names}", stuck[0].line)
    return order


def to_b0_expr(e: CExpr):
    if isinstance(e, Contact):
        v = A.Var(e.name)
        return v if e.normally_open else A.Not(v)
    op = "&" if isinstance(e, Series) else "or"
    return A.BoolOp(op, to_b0_expr(e.left), to_b0_expr(e.right))


def translate(net: RelayNet) -> str:
    """Emit B0 source for ``net``: one cycle evaluates every coil once."""
    def decls(names):
        return ", ".join(f"{n}: BOOL" for n in names)

    lines = [f"-- generated from relay net {net.name}", f"MACHINE {net.name}"]
    if net.inputs:
        lines.append(f"INPUTS {decls(net.inputs)}")
    if net.outputs:
        lines.append(f"OUTPUTS {decls(net.outputs)}")
    if net.relays:
        lines.append(f"VARS {decls(net.relays)}")
    lines.append(f"INVARIANT {net.invariant or 'true'}")
    state = net.outputs + net.relays
    lines.append("INIT")
    lines.extend(f"  {n} := false" + (";" if k < len(state) - 1 else "")
                 for k, n in enumerate(state))
    lines.append("CYCLE")
    body = []
    for d in topological_order(net):
        if isinstance(d, Rung):
            body.append(f"  {d.coil} := {expr_str(to_b0_expr(d.expr))}")
        else:
            held = A.BoolOp("or", A.Var(d.relay), to_b0_expr(d.set))
            rhs = A.BoolOp("&", held, A.Not(to_b0_expr(d.reset)))
            body.append(f"  {d.relay} := {expr_str(rhs)}")
    lines.extend(b + (";" if k < len(body) - 1 else "") for k, b in enumerate(body))
    lines.append("END")
    return "\n".join(lines) + "\n"
