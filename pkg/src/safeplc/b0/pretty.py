"""Render B0 trees back to concrete syntax."""

from __future__ import annotations

from . import ast as A

# binding strength; higher binds tighter
_PREC = {"or": 1, "&": 2, "not": 3, "cmp": 4, "+": 5, "-": 5,
         "*": 6, "div": 6, "mod": 6, "atom": 8}


def _prec(e) -> int:
    if isinstance(e, A.BoolOp):
        return _PREC[e.op]
    if isinstance(e, A.Not):
        return _PREC["not"]
    if isinstance(e, A.Cmp):
        return _PREC["cmp"]
    if isinstance(e, A.BinOp):
        return _PREC[e.op]
    return _PREC["atom"]


def expr_str(e) -> str:
    if isinstance(e, A.IntLit):
        return f"(-{-e.value})" if e.value < 0 else str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Index):
        return f"{e.name}({expr_str(e.index)})"
    if isinstance(e, A.Neg):
        return f"(-{_wrap(e.operand, _PREC['atom'])})"
    if isinstance(e, A.Not):
        return f"not {_wrap(e.operand, _PREC['not'])}"
    if isinstance(e, A.Cmp):
        # relations are non-associative: both sides must bind tighter
        p = _PREC["cmp"] + 1
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p)}"
    if isinstance(e, (A.BinOp, A.BoolOp)):
        p = _prec(e)
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, A.Ite):
        raise ValueError("conditional values have no B0 concrete syntax")
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e, min_prec: int) -> str:
    s = expr_str(e)
    return f"({s})" if _prec(e) < min_prec else s


def _stmts(stmts, indent: int) -> list:
    lines = []
    for k, s in enumerate(stmts):
        sep = ";" if k < len(stmts) - 1 else ""
        body = _stmt(s, indent)
        body[-1] += sep
        lines.extend(body)
    return lines


def _stmt(s, indent: int) -> list:
    pad = "  " * indent
    if isinstance(s, A.Assign):
        tgt = s.target if s.index is None else f"{s.target}({expr_str(s.index)})"
        return [f"{pad}{tgt} := {expr_str(s.value)}"]
    if isinstance(s, A.If):
        lines = []
        for k, (cond, body) in enumerate(s.branches):
            kw = "IF" if k == 0 else "ELSIF"
            lines.append(f"{pad}{kw} {expr_str(cond)} THEN")
            lines.extend(_stmts(body, indent + 1))
        if s.orelse:
            lines.append(f"{pad}ELSE")
            lines.extend(_stmts(s.orelse, indent + 1))
        lines.append(f"{pad}END")
        return lines
    if isinstance(s, A.For):
        lines = [f"{pad}FOR {s.var} := {expr_str(s.lo)} TO {expr_str(s.hi)} DO"]
        lines.extend(_stmts(s.body, indent + 1))
        lines.append(f"{pad}END")
        return lines
    raise TypeError(f"not a statement: {s!r}")


def _varlist(decls) -> str:
    return ", ".join(f"{d.name}: {d.type}" for d in decls)


def pretty_print(m: A.Model) -> str:
    lines = [f"MACHINE {m.name}"]
    for kw, decls in (("INPUTS", m.inputs), ("OUTPUTS", m.outputs), ("VARS", m.vars)):
        if decls:
            lines.append(f"{kw} {_varlist(decls)}")
    lines.append(f"INVARIANT {expr_str(m.invariant)}")
    lines.append("INIT")
    lines.extend(_stmts(m.init, 1))
    lines.append("CYCLE")
    lines.extend(_stmts(m.cycle, 1))
    lines.append("END")
    return "\n".join(lines) + "\n"
