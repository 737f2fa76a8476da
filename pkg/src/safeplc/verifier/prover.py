"""Automatic discharge of proof obligations.

Two provers are tried in order.  Interval propagation evaluates the goal in
three-valued logic over the boxes given by declared domains (tightened by
simple hypotheses).  If that is inconclusive and the joint domain is small
enough, every valuation is enumerated; evaluation is vectorised with numpy.

Inside predicates, ``x div 0`` is 0, ``x mod 0`` is ``x`` and an
out-of-range array read yields the element type's least value.  Programs
never observe these values: the well-definedness obligations exclude them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from ..b0 import arith
from ..b0 import ast as A
from ..b0.arith import Interval
from .pos import ProofObligation, free_keys

PROVED_INTERVAL = "PROVED_INTERVAL"
PROVED_ENUM = "PROVED_ENUM"
UNPROVEN = "UNPROVEN"
COUNTEREXAMPLE = "COUNTEREXAMPLE"

DEFAULT_BUDGET = 2 ** 20
_CHUNK = 1 << 16
_SAFE_INT64 = 2 ** 62

TRUE_I = Interval(1, 1)
FALSE_I = Interval(0, 0)
UNKNOWN_I = Interval(0, 1)


@dataclass(frozen=True)
class ProofResult:
    po_id: int
    status: str
    witness: Optional[Mapping[str, object]] = None

    @property
    def proved(self) -> bool:
        return self.status in (PROVED_INTERVAL, PROVED_ENUM)


def key_name(key) -> str:
    name, j = key
    return name if j is None else f"{name}({j})"


def _domain(decls, key) -> Interval:
    t = A.elem_type(decls[key[0]])
    return UNKNOWN_I if isinstance(t, A.BoolType) else Interval(t.lo, t.hi)


def _default(decls, name) -> int:
    t = A.elem_type(decls[name])
    return 0 if isinstance(t, A.BoolType) else t.lo


# -- interval evaluation ---------------------------------------------------

def interval_of(e, env: Dict[tuple, Interval], decls) -> Interval:
    if isinstance(e, A.IntLit):
        return Interval(e.value, e.value)
    if isinstance(e, A.BoolLit):
        return TRUE_I if e.value else FALSE_I
    if isinstance(e, A.Var):
        return env.get((e.name, None)) or _domain(decls, (e.name, None))
    if isinstance(e, A.Index):
        n = decls[e.name].length
        d = _default(decls, e.name)
        idx = interval_of(e.index, env, decls)
        out = None
        for j in range(max(idx.lo, 0), min(idx.hi, n - 1) + 1):
            iv = env.get((e.name, j)) or _domain(decls, (e.name, j))
            out = iv if out is None else out.join(iv)
        if idx.lo < 0 or idx.hi > n - 1:
            out = Interval(d, d) if out is None else out.join(Interval(d, d))
        return out
    if isinstance(e, A.BinOp):
        return arith.ARITH[e.op](interval_of(e.left, env, decls), interval_of(e.right, env, decls))
    if isinstance(e, A.Neg):
        return arith.neg(interval_of(e.operand, env, decls))
    if isinstance(e, A.Cmp):
        return _cmp_interval(e.op, interval_of(e.left, env, decls),
                             interval_of(e.right, env, decls))
    if isinstance(e, A.BoolOp):
        a = interval_of(e.left, env, decls)
        b = interval_of(e.right, env, decls)
        if e.op == "&":
            return Interval(a.lo & b.lo, a.hi & b.hi)
        return Interval(a.lo | b.lo, a.hi | b.hi)
    if isinstance(e, A.Not):
        a = interval_of(e.operand, env, decls)
        return Interval(1 - a.hi, 1 - a.lo)
    if isinstance(e, A.Ite):
        c = interval_of(e.cond, env, decls)
        if c == TRUE_I:
            return interval_of(e.then, env, decls)
        if c == FALSE_I:
            return interval_of(e.orelse, env, decls)
        return interval_of(e.then, env, decls).join(interval_of(e.orelse, env, decls))
    raise TypeError(e)


def _cmp_interval(op, a: Interval, b: Interval) -> Interval:
    if op in ("=", "/="):
        if a.is_const and b.is_const and a.lo == b.lo:
            r = TRUE_I
        elif a.hi < b.lo or b.hi < a.lo:
            r = FALSE_I
        else:
            r = UNKNOWN_I
        return r if op == "=" else Interval(1 - r.hi, 1 - r.lo)
    if op in (">", ">="):
        a, b = b, a
        op = "<" if op == ">" else "<="
    if op == "<":
        if a.hi < b.lo:
            return TRUE_I
        if a.lo >= b.hi:
            return FALSE_I
    else:
        if a.hi <= b.lo:
            return TRUE_I
        if a.lo > b.hi:
            return FALSE_I
    return UNKNOWN_I


def _atoms(p):
    if isinstance(p, A.BoolOp) and p.op == "&":
        yield from _atoms(p.left)
        yield from _atoms(p.right)
    else:
        yield p


def _as_key(e, decls):
    if isinstance(e, A.Var) and e.name in decls:
        return (e.name, None)
    if isinstance(e, A.Index) and isinstance(e.index, A.IntLit):
        if 0 <= e.index.value < decls[e.name].length:
            return (e.name, e.index.value)
    return None


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "/=": "/="}


def refine(env, hyps, decls):
    """Tighten variable boxes using hypothesis conjuncts of the form
    ``v op literal`` or a bare boolean ``v`` / ``not v``.  Returns ``None``
    when some box becomes empty (the hypotheses are contradictory)."""
    env = dict(env)
    for h in hyps:
        for atom in _atoms(h):
            key, bound = None, None
            if isinstance(atom, A.Cmp):
                op = atom.op
                if _as_key(atom.left, decls) and isinstance(atom.right, (A.IntLit, A.BoolLit)):
                    key, lit = _as_key(atom.left, decls), atom.right
                elif _as_key(atom.right, decls) and isinstance(atom.left, (A.IntLit, A.BoolLit)):
                    key, lit, op = _as_key(atom.right, decls), atom.left, _FLIP[op]
                if key is not None:
                    v = int(lit.value)
                    bound = {"=": Interval(v, v), "<": Interval(-2 ** 64, v - 1),
                             "<=": Interval(-2 ** 64, v), ">": Interval(v + 1, 2 ** 64),
                             ">=": Interval(v, 2 ** 64)}.get(op)
            else:
                neg = isinstance(atom, A.Not)
                k = _as_key(atom.operand if neg else atom, decls)
                if k is not None and isinstance(A.elem_type(decls[k[0]]), A.BoolType):
                    key, bound = k, (FALSE_I if neg else TRUE_I)
            if key is None or bound is None:
                continue
            cur = env.get(key) or _domain(decls, key)
            new = cur.meet(bound)
            if new is None:
                return None
            env[key] = new
    return env


def prove_by_intervals(po: ProofObligation) -> bool:
    env = refine({}, po.hypotheses, po.decls)
    if env is None:
        return True
    for h in po.hypotheses:
        if interval_of(h, env, po.decls) == FALSE_I:
            return True
    return interval_of(po.goal, env, po.decls) == TRUE_I


# -- enumeration -----------------------------------------------------------

def _tdiv_vec(a, b):
    zero = b == 0
    safe = np.where(zero, 1, b)
    q = np.abs(a) // np.abs(safe)
    q = np.where((a < 0) != (safe < 0), -q, q)
    return np.where(zero, 0, q)


def eval_vec(e, cols: Dict[tuple, np.ndarray], decls, n: int, dtype):
    """Evaluate ``e`` for ``n`` valuations at once.  Booleans are 0/1."""
    if isinstance(e, (A.IntLit, A.BoolLit)):
        return np.full(n, int(e.value), dtype=dtype)
    if isinstance(e, A.Var):
        return cols[(e.name, None)]
    if isinstance(e, A.Index):
        length = decls[e.name].length
        d = _default(decls, e.name)
        if isinstance(e.index, A.IntLit):
            j = e.index.value
            return cols[(e.name, j)] if 0 <= j < length else np.full(n, d, dtype=dtype)
        idx = eval_vec(e.index, cols, decls, n, dtype)
        stacked = np.stack([cols[(e.name, j)] for j in range(length)])
        valid = (idx >= 0) & (idx < length)
        picked = stacked[np.clip(idx, 0, length - 1).astype(np.int64), np.arange(n)]
        return np.where(valid, picked, d).astype(dtype)
    if isinstance(e, A.BinOp):
        a = eval_vec(e.left, cols, decls, n, dtype)
        b = eval_vec(e.right, cols, decls, n, dtype)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        q = _tdiv_vec(a, b)
        return q if e.op == "div" else a - b * q
    if isinstance(e, A.Neg):
        return -eval_vec(e.operand, cols, decls, n, dtype)
    if isinstance(e, A.Cmp):
        a = eval_vec(e.left, cols, decls, n, dtype)
        b = eval_vec(e.right, cols, decls, n, dtype)
        r = {"=": a == b, "/=": a != b, "<": a < b, "<=": a <= b,
             ">": a > b, ">=": a >= b}[e.op]
        return r.astype(dtype)
    if isinstance(e, A.BoolOp):
        a = eval_vec(e.left, cols, decls, n, dtype)
        b = eval_vec(e.right, cols, decls, n, dtype)
        return (a & b) if e.op == "&" else (a | b)
    if isinstance(e, A.Not):
        return 1 - eval_vec(e.operand, cols, decls, n, dtype)
    if isinstance(e, A.Ite):
        c = eval_vec(e.cond, cols, decls, n, dtype)
        return np.where(c == 1, eval_vec(e.then, cols, decls, n, dtype),
                        eval_vec(e.orelse, cols, decls, n, dtype))
    raise TypeError(e)


def _max_magnitude(e, decls) -> int:
    """Largest absolute value any subterm of ``e`` can take."""
    env = {}
    m = 0
    for sub in A.walk(e):
        iv = interval_of(sub, env, decls)
        m = max(m, abs(iv.lo), abs(iv.hi))
    return m


def po_keys(po: ProofObligation):
    keys = set()
    for p in po.hypotheses + (po.goal,):
        keys |= free_keys(p, po.decls)
    order = {n: k for k, n in enumerate(po.decls)}
    return sorted(keys, key=lambda k: (order[k[0]], -1 if k[1] is None else k[1]))


def _key_values(decls, key):
    d = _domain(decls, key)
    return np.arange(d.lo, d.hi + 1, dtype=np.int64)


def enumerate_po(po: ProofObligation, budget: int):
    """Exhaustively search for a falsifying valuation.

    Returns ``(status, witness)`` where status is ``PROVED_ENUM``,
    ``COUNTEREXAMPLE`` or ``UNPROVEN`` (joint domain exceeds ``budget``)."""
    keys = po_keys(po)
    values = [_key_values(po.decls, k) for k in keys]
    total = 1
    for v in values:
        total *= len(v)
    if total > budget:
        return UNPROVEN, None
    exprs = po.hypotheses + (po.goal,)
    big = max(_max_magnitude(e, po.decls) for e in exprs)
    dtype = object if big >= _SAFE_INT64 else np.int64

    strides = []
    s = 1
    for v in reversed(values):
        strides.append(s)
        s *= len(v)
    strides.reverse()

    for start in range(0, total, _CHUNK):
        stop = min(total, start + _CHUNK)
        flat = np.arange(start, stop, dtype=np.int64)
        n = stop - start
        cols = {}
        for key, vals, stride in zip(keys, values, strides):
            col = vals[(flat // stride) % len(vals)]
            cols[key] = col.astype(object) if dtype is object else col
        ok = np.ones(n, dtype=bool)
        for h in po.hypotheses:
            ok &= eval_vec(h, cols, po.decls, n, dtype) == 1
            if not ok.any():
                break
        if not ok.any():
            continue
        bad = ok & (eval_vec(po.goal, cols, po.decls, n, dtype) == 0)
        hits = np.flatnonzero(bad)
        if len(hits):
            i = hits[0]
            witness = {}
            for key in keys:
                v = int(cols[key][i])
                t = A.elem_type(po.decls[key[0]])
                witness[key_name(key)] = bool(v) if isinstance(t, A.BoolType) else v
            return COUNTEREXAMPLE, witness
    return PROVED_ENUM, None


def prove(po: ProofObligation, budget: int = DEFAULT_BUDGET) -> ProofResult:
    """Discharge ``po``: intervals first, then enumeration within ``budget``
    joint valuations."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if prove_by_intervals(po):
        return ProofResult(po.id, PROVED_INTERVAL)
    status, witness = enumerate_po(po, budget)
    return ProofResult(po.id, status, witness)


def prove_all(pos, budget: int = DEFAULT_BUDGET):
    return [prove(po, budget) for po in pos]


# -- witness re-evaluation -------------------------------------------------

def witness_env(po: ProofObligation, witness: Mapping[str, object]):
    """Build an interpreter environment from a witness, filling every other
    declared name with its least value."""
    env = {}
    for name, t in po.decls.items():
        et = A.elem_type(t)
        d = False if isinstance(et, A.BoolType) else et.lo
        if isinstance(t, A.ArrayType):
            env[name] = [witness.get(f"{name}({j})", d) for j in range(t.length)]
        else:
            env[name] = witness.get(name, d)
    return {k: tuple(v) if isinstance(v, list) else v for k, v in env.items()}


def evaluate_po(po: ProofObligation, witness: Mapping[str, object]):
    """Return ``(all hypotheses hold, goal holds)`` under ``witness`` using
    scalar evaluation."""
    env = witness_env(po, witness)
    cols = {}
    for name, t in po.decls.items():
        if isinstance(t, A.ArrayType):
            for j, v in enumerate(env[name]):
                cols[(name, j)] = np.array([int(v)], dtype=object)
        else:
            cols[(name, None)] = np.array([int(env[name])], dtype=object)
    hyps = all(eval_vec(h, cols, po.decls, 1, object)[0] == 1 for h in po.hypotheses)
    goal = eval_vec(po.goal, cols, po.decls, 1, object)[0] == 1
    return hyps, goal
