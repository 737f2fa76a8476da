"""Proof obligation generation.

The cycle (or INIT) body is executed symbolically: every state variable is
mapped to an expression over the pre-state, a completed IF merges its
branches into conditional values, and FOR loops are unrolled over their
literal bounds.  Substituting the final mapping into a predicate yields its
weakest precondition.  Conditional values are then lifted into the boolean
structure so that every exported predicate is plain B0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from ..b0 import ast as A
from ..b0 import arith
from ..b0.typecheck import TypedModel

INIT_ESTABLISHES = "INIT_ESTABLISHES"
CYCLE_PRESERVES = "CYCLE_PRESERVES"
WD_RANGE = "WD_RANGE"
WD_INDEX = "WD_INDEX"
WD_DIV = "WD_DIV"
KINDS = (INIT_ESTABLISHES, CYCLE_PRESERVES, WD_RANGE, WD_INDEX, WD_DIV)


@dataclass(frozen=True)
class ProofObligation:
    id: int
    kind: str
    source_location: str
    hypotheses: Tuple[A.Expr, ...]
    goal: A.Expr
    # declared types of every name the PO may mention; used by the provers
    decls: Mapping[str, A.B0Type] = field(default_factory=dict, compare=False, repr=False)


# -- expression helpers ----------------------------------------------------

def conj(parts) -> A.Expr:
    parts = [p for p in parts if p != A.TRUE]
    if not parts:
        return A.TRUE
    out = parts[0]
    for p in parts[1:]:
        out = A.BoolOp("&", out, p)
    return out


def implies(guards, goal) -> A.Expr:
    if not guards:
        return goal
    return A.BoolOp("or", A.Not(conj(guards)), goal)


def fold(e: A.Expr) -> A.Expr:
    """Fold literal arithmetic and literal conditionals (one level)."""
    if isinstance(e, A.BinOp) and isinstance(e.left, A.IntLit) and isinstance(e.right, A.IntLit):
        a, b = e.left.value, e.right.value
        if e.op in ("div", "mod"):
            if b == 0:
                return e
            return A.IntLit(arith.tdiv(a, b) if e.op == "div" else arith.tmod(a, b))
        return A.IntLit({"+": a + b, "-": a - b, "*": a * b}[e.op])
    if isinstance(e, A.Neg) and isinstance(e.operand, A.IntLit):
        return A.IntLit(-e.operand.value)
    if isinstance(e, A.Ite) and isinstance(e.cond, A.BoolLit):
        return e.then if e.cond.value else e.orelse
    if isinstance(e, A.Ite) and e.then == e.orelse:
        return e.then
    return e


def range_pred(e, lo, hi) -> A.Expr:
    return A.BoolOp("&", A.Cmp("<=", A.IntLit(lo), e), A.Cmp("<=", e, A.IntLit(hi)))


def free_keys(e, decls) -> set:
    """Scalar unknowns of ``e``: ``(name, None)`` or ``(name, element)``."""
    out = set()
    for sub in A.walk(e):
        if isinstance(sub, A.Var):
            out.add((sub.name, None))
        elif isinstance(sub, A.Index):
            if isinstance(sub.index, A.IntLit):
                if 0 <= sub.index.value < decls[sub.name].length:
                    out.add((sub.name, sub.index.value))
            else:
                out.update((sub.name, j) for j in range(decls[sub.name].length))
    return out


def key_expr(key) -> A.Expr:
    name, j = key
    return A.Var(name) if j is None else A.Index(name, A.IntLit(j))


# -- conditional lifting ---------------------------------------------------

def _find_ite(e) -> Optional[A.Ite]:
    if isinstance(e, A.Ite):
        return e
    for c in A.children(e):
        found = _find_ite(c)
        if found is not None:
            return found
    return None


def _replace(e, old, new):
    if e == old:
        return new
    if isinstance(e, (A.BinOp, A.Cmp, A.BoolOp)):
        return fold(type(e)(e.op, _replace(e.left, old, new), _replace(e.right, old, new)))
    if isinstance(e, A.Neg):
        return fold(A.Neg(_replace(e.operand, old, new)))
    if isinstance(e, A.Not):
        return A.Not(_replace(e.operand, old, new))
    if isinstance(e, A.Index):
        return A.Index(e.name, fold(_replace(e.index, old, new)))
    if isinstance(e, A.Ite):
        return fold(A.Ite(_replace(e.cond, old, new), _replace(e.then, old, new),
                          _replace(e.orelse, old, new)))
    return e


def lift(p: A.Expr) -> A.Expr:
    """Rewrite a predicate so that it contains no conditional values."""
    if isinstance(p, A.BoolOp):
        return A.BoolOp(p.op, lift(p.left), lift(p.right))
    if isinstance(p, A.Not):
        return A.Not(lift(p.operand))
    ite = _find_ite(p)
    if ite is None:
        return p
    c = lift(ite.cond)
    yes = lift(_replace(p, ite, ite.then))
    no = lift(_replace(p, ite, ite.orelse))
    if yes == no:
        return yes
    return A.BoolOp("or", A.BoolOp("&", c, yes), A.BoolOp("&", A.Not(c), no))


# -- symbolic execution ----------------------------------------------------

class _Sym:
    """Symbolic store: state variable -> expression over the pre-state."""

    def __init__(self, decls: Mapping[str, A.B0Type], state_names):
        self.decls = decls
        self.scalars: Dict[str, A.Expr] = {}
        self.arrays: Dict[str, List[A.Expr]] = {}
        for n in state_names:
            t = decls[n]
            if isinstance(t, A.ArrayType):
                self.arrays[n] = [A.Index(n, A.IntLit(j)) for j in range(t.length)]
            else:
                self.scalars[n] = A.Var(n)
        self.loop: Dict[str, int] = {}

    def copy(self):
        c = _Sym.__new__(_Sym)
        c.decls = self.decls
        c.scalars = dict(self.scalars)
        c.arrays = {k: list(v) for k, v in self.arrays.items()}
        c.loop = dict(self.loop)
        return c

    def subst(self, e):
        if isinstance(e, (A.IntLit, A.BoolLit)):
            return type(e)(e.value)
        if isinstance(e, A.Var):
            if e.name in self.loop:
                return A.IntLit(self.loop[e.name])
            return self.scalars.get(e.name, A.Var(e.name))
        if isinstance(e, A.Index):
            return self.read(e.name, self.subst(e.index))
        if isinstance(e, (A.BinOp, A.Cmp, A.BoolOp)):
            return fold(type(e)(e.op, self.subst(e.left), self.subst(e.right)))
        if isinstance(e, A.Neg):
            return fold(A.Neg(self.subst(e.operand)))
        if isinstance(e, A.Not):
            return A.Not(self.subst(e.operand))
        if isinstance(e, A.Ite):
            return fold(A.Ite(self.subst(e.cond), self.subst(e.then), self.subst(e.orelse)))
        raise TypeError(e)

    def read(self, name, idx):
        elems = self.arrays.get(name)
        if elems is None:
            return A.Index(name, idx)
        if isinstance(idx, A.IntLit):
            if 0 <= idx.value < len(elems):
                return elems[idx.value]
            return A.Index(name, idx)
        if all(el == A.Index(name, A.IntLit(j)) for j, el in enumerate(elems)):
            return A.Index(name, idx)
        out = A.Index(name, idx)
        for j in reversed(range(len(elems))):
            out = A.Ite(A.Cmp("=", idx, A.IntLit(j)), elems[j], out)
        return out

    def write(self, name, idx, value):
        if idx is None:
            self.scalars[name] = value
            return
        elems = self.arrays[name]
        if isinstance(idx, A.IntLit):
            if 0 <= idx.value < len(elems):
                elems[idx.value] = value
            return
        for j in range(len(elems)):
            elems[j] = fold(A.Ite(A.Cmp("=", idx, A.IntLit(j)), value, elems[j]))

    def merge(self, cond, other: "_Sym"):
        """self := if cond then self else other"""
        for n in self.scalars:
            self.scalars[n] = fold(A.Ite(cond, self.scalars[n], other.scalars[n]))
        for n in self.arrays:
            self.arrays[n] = [fold(A.Ite(cond, a, b))
                              for a, b in zip(self.arrays[n], other.arrays[n])]


@dataclass
class _Site:
    kind: str
    loc: str
    instances: list = field(default_factory=list)   # (guards, cond)


class _Generator:
    def __init__(self, tm: TypedModel):
        self.tm = tm
        self.decls = {d.name: d.type for d in tm.inputs + tm.state}
        self.state_names = [d.name for d in tm.state]
        self.sites: Dict[tuple, _Site] = {}
        self.order: List[tuple] = []

    def site(self, key, kind, loc, guards, cond):
        if key not in self.sites:
            self.sites[key] = _Site(kind, loc)
            self.order.append(key)
        self.sites[key].instances.append((tuple(guards), cond))

    def expr_sites(self, e, sym, guards, loc):
        """Record well-definedness sites of ``e`` in evaluation order."""
        for c in A.children(e):
            self.expr_sites(c, sym, guards, loc)
        if isinstance(e, A.Index):
            self.index_site(e, e.name, e.index, sym, guards, loc)
        elif isinstance(e, A.BinOp) and e.op in ("div", "mod"):
            if not (isinstance(e.right, A.IntLit) and e.right.value != 0):
                cond = A.Cmp("/=", sym.subst(e.right), A.IntLit(0))
                self.site((id(e), WD_DIV), WD_DIV, loc, guards, cond)

    def index_site(self, node, name, index, sym, guards, loc):
        n = self.decls[name].length
        if isinstance(index, A.IntLit) and 0 <= index.value < n:
            return
        cond = range_pred(sym.subst(index), 0, n - 1)
        self.site((id(node), WD_INDEX), WD_INDEX, loc, guards, cond)

    def needs_range(self, target_t, value) -> bool:
        if isinstance(value, A.IntLit):
            return not target_t.lo <= value.value <= target_t.hi
        if isinstance(value, (A.Var, A.Index)):
            src = value.ty if isinstance(value.ty, A.IntType) else None
            if isinstance(value, A.Var) and value.name in self.decls:
                src = self.decls[value.name]
            elif isinstance(value, A.Index):
                src = self.decls[value.name].elem
            return not (isinstance(src, A.IntType) and target_t.contains(src))
        return True

    def run(self, stmts, sym: _Sym, guards):
        for s in stmts:
            if isinstance(s, A.Assign):
                t = self.decls[s.target]
                if s.index is not None:
                    self.expr_sites(s.index, sym, guards, s.loc)
                self.expr_sites(s.value, sym, guards, s.loc)
                idx = None
                if s.index is not None:
                    self.index_site(s, s.target, s.index, sym, guards, s.loc)
                    idx = sym.subst(s.index)
                    t = t.elem
                value = sym.subst(s.value)
                if isinstance(t, A.IntType) and self.needs_range(t, s.value):
                    self.site((id(s), WD_RANGE), WD_RANGE, s.loc, guards,
                              range_pred(value, t.lo, t.hi))
                sym.write(s.target, idx, value)
            elif isinstance(s, A.If):
                self.run_if(s, 0, sym, guards)
            else:
                lo, hi = s.bounds
                for k in range(lo, hi + 1):
                    sym.loop[s.var] = k
                    self.run(s.body, sym, guards)
                sym.loop.pop(s.var, None)

    def run_if(self, s: A.If, k, sym: _Sym, guards):
        if k == len(s.branches):
            self.run(s.orelse, sym, guards)
            return
        cond, body = s.branches[k]
        self.expr_sites(cond, sym, guards, s.loc)
        c = sym.subst(cond)
        then_sym = sym.copy()
        self.run(body, then_sym, guards + [c])
        self.run_if(s, k + 1, sym, guards + [fold(A.Not(c)) if not isinstance(c, A.BoolLit)
                                              else A.BoolLit(not c.value)])
        then_sym.merge(c, sym)
        sym.scalars, sym.arrays = then_sym.scalars, then_sym.arrays

    # -- assembling POs
    def typing(self, exprs) -> List[A.Expr]:
        keys = set()
        for e in exprs:
            keys |= free_keys(e, self.decls)
        order = {d.name: k for k, d in enumerate(self.tm.inputs + self.tm.state)}
        hyps = []
        for key in sorted(keys, key=lambda kk: (order[kk[0]], -1 if kk[1] is None else kk[1])):
            t = A.elem_type(self.decls[key[0]])
            if isinstance(t, A.IntType):
                hyps.append(range_pred(key_expr(key), t.lo, t.hi))
        return hyps

    def make(self, pid, kind, loc, hyps, goal) -> ProofObligation:
        hyps = [lift(h) for h in hyps]
        hyps = [h for h in hyps if h != A.TRUE]
        goal = lift(goal)
        hyps = self.typing(hyps + [goal]) + hyps
        return ProofObligation(pid, kind, loc, tuple(hyps), goal, self.decls)

    def generate(self) -> List[ProofObligation]:
        tm = self.tm
        pos = []
        init_sym = _Sym(self.decls, self.state_names)
        self.run(tm.init, init_sym, [])
        init_sites = list(self.order)
        pos.append(self.make(1, INIT_ESTABLISHES, "INIT", [], init_sym.subst(tm.invariant)))

        cyc_sym = _Sym(self.decls, self.state_names)
        self.run(tm.cycle, cyc_sym, [])
        base = [tm.invariant]
        pos.append(self.make(2, CYCLE_PRESERVES, "CYCLE", base, cyc_sym.subst(tm.invariant)))

        for key in self.order:
            site = self.sites[key]
            hyps = [] if key in init_sites else list(base)
            insts = site.instances
            common = _common_prefix([g for g, _ in insts])
            hyps += common
            goal = conj([implies(g[len(common):], c) for g, c in insts])
            pos.append(self.make(len(pos) + 1, site.kind, site.loc, hyps, goal))
        return pos


def _common_prefix(guard_lists):
    if not guard_lists:
        return []
    first = guard_lists[0]
    n = len(first)
    for g in guard_lists[1:]:
        n = min(n, len(g))
        for k in range(n):
            if g[k] != first[k]:
                n = k
                break
    return list(first[:n])


def generate_pos(tm: TypedModel) -> List[ProofObligation]:
    """Invariant establishment and preservation plus one well-definedness
    obligation per array access, non-literal division and narrowing
    assignment."""
    return _Generator(tm).generate()
