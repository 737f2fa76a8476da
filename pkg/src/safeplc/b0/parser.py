"""Lexer and recursive-descent parser for B0 source text."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

from . import ast as A

KEYWORDS = {
    "MACHINE", "INPUTS", "OUTPUTS", "VARS", "INVARIANT", "INIT", "CYCLE",
    "END", "BOOL", "INT", "ARRAY", "OF", "IF", "THEN", "ELSIF", "ELSE",
    "FOR", "TO", "DO", "div", "mod", "or", "not", "true", "false",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|\.\.|/=|<=|>=|[:,();+\-*=<>&])
""", re.VERBOSE)


class B0Error(Exception):
    """Base class for front-end errors carrying a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}" if line else message)


class B0SyntaxError(B0Error):
    def __init__(self, message, line, col, expected: Sequence[str] = ()):
        self.expected = tuple(expected)
        if expected:
            message = f"{message} (expected {' or '.join(expected)})"
        super().__init__(message, line, col)


class DuplicateDeclaration(B0Error):
    pass


@dataclass(frozen=True)
class Token:
    kind: str      # int, ident, kw, sym, eof
    text: str
    line: int
    col: int

    @property
    def loc(self):
        return f"{self.line}:{self.col}"


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise B0SyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            tokens.append(Token("int", m.group(), line, col))
        elif kind == "ident":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind == "sym":
            tokens.append(Token("sym", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_RELOPS = ("=", "/=", "<", "<=", ">", ">=")
# tokens that may legally end a statement list
_STMT_END = {"END", "ELSIF", "ELSE", "CYCLE"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, *texts: str) -> Token:
        if any(self.at(t) for t in texts):
            return self.advance()
        self.fail(list(texts))

    def fail(self, expected):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise B0SyntaxError(f"unexpected {found}", t.line, t.col, expected)

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail(["identifier"])
        return self.advance()

    def integer(self) -> int:
        sign = -1 if self.at("-") and self.advance() else 1
        if self.tok.kind != "int":
            self.fail(["integer"])
        return sign * int(self.advance().text)

    # -- declarations
    def model(self) -> A.Model:
        self.expect("MACHINE")
        name = self.ident().text
        sections = {}
        for kw in ("INPUTS", "OUTPUTS", "VARS"):
            sections[kw] = self.varlist() if self.at(kw) and self.advance() else ()
        seen = {}
        for d in sections["INPUTS"] + sections["OUTPUTS"] + sections["VARS"]:
            if d.name in seen:
                line, col = map(int, d.loc.split(":"))
                raise DuplicateDeclaration(
                    f"duplicate declaration of {d.name!r} (first at {seen[d.name]})", line, col)
            seen[d.name] = d.loc
        self.expect("INVARIANT")
        inv = self.expr()
        self.expect("INIT")
        init = self.stmts()
        self.expect("CYCLE")
        cycle = self.stmts()
        self.expect("END")
        if self.tok.kind != "eof":
            self.fail(["end of input"])
        return A.Model(name, sections["INPUTS"], sections["OUTPUTS"], sections["VARS"],
                       inv, init, cycle)

    def varlist(self):
        decls = [self.decl()]
        while self.at(","):
            self.advance()
            decls.append(self.decl())
        return tuple(decls)

    def decl(self) -> A.Decl:
        t = self.ident()
        self.expect(":")
        return A.Decl(t.text, self.type_(), t.loc)

    def type_(self):
        t = self.tok
        if self.at("BOOL"):
            self.advance()
            return A.BOOL
        if self.at("INT"):
            self.advance()
            self.expect("(")
            lo = self.integer()
            self.expect("..")
            hi = self.integer()
            self.expect(")")
            if lo > hi:
                raise B0SyntaxError(f"empty range {lo}..{hi}", t.line, t.col)
            if lo < A.INT32_MIN or hi > A.INT32_MAX:
                raise B0SyntaxError("INT bounds must fit in 32 bits", t.line, t.col)
            return A.IntType(lo, hi)
        if self.at("ARRAY"):
            self.advance()
            n = self.integer()
            if n < 1:
                raise B0SyntaxError("array length must be at least 1", t.line, t.col)
            self.expect("OF")
            elem = self.type_()
            if isinstance(elem, A.ArrayType):
                raise B0SyntaxError("array elements must be scalar", t.line, t.col)
            return A.ArrayType(n, elem)
        self.fail(["BOOL", "INT", "ARRAY"])

    # -- statements
    def stmts(self):
        # an empty statement list is accepted where a terminator follows
        if self.tok.kind == "kw" and self.tok.text in _STMT_END:
            return ()
        out = [self.stmt()]
        while self.at(";"):
            self.advance()
            out.append(self.stmt())
        return tuple(out)

    def stmt(self):
        t = self.tok
        if self.at("IF"):
            self.advance()
            branches = []
            cond = self.expr()
            self.expect("THEN")
            branches.append((cond, self.stmts()))
            while self.at("ELSIF"):
                self.advance()
                cond = self.expr()
                self.expect("THEN")
                branches.append((cond, self.stmts()))
            orelse = ()
            if self.at("ELSE"):
                self.advance()
                orelse = self.stmts()
            self.expect("END")
            return A.If(tuple(branches), orelse, t.loc)
        if self.at("FOR"):
            self.advance()
            var = self.ident().text
            self.expect(":=")
            lo = self.expr()
            self.expect("TO")
            hi = self.expr()
            self.expect("DO")
            body = self.stmts()
            self.expect("END")
            return A.For(var, lo, hi, body, t.loc)
        if t.kind == "ident":
            self.advance()
            index = None
            if self.at("("):
                self.advance()
                index = self.expr()
                self.expect(")")
            self.expect(":=")
            return A.Assign(t.text, index, self.expr(), t.loc)
        self.fail(["identifier", "IF", "FOR"])

    # -- expressions, lowest precedence first
    def expr(self):
        left = self.conj()
        while self.at("or"):
            self.advance()
            left = A.BoolOp("or", left, self.conj())
        return left

    def conj(self):
        left = self.negation()
        while self.at("&"):
            self.advance()
            left = A.BoolOp("&", left, self.negation())
        return left

    def negation(self):
        if self.at("not"):
            self.advance()
            return A.Not(self.negation())
        return self.relation()

    def relation(self):
        left = self.additive()
        if self.tok.kind == "sym" and self.tok.text in _RELOPS:
            op = self.advance().text
            return A.Cmp(op, left, self.additive())
        return left

    def additive(self):
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            left = A.BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.at("*") or self.at("div") or self.at("mod"):
            op = self.advance().text
            left = A.BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, A.IntLit):
                return A.IntLit(-operand.value)
            return A.Neg(operand)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return A.IntLit(int(t.text))
        if self.at("true") or self.at("false"):
            self.advance()
            return A.BoolLit(t.text == "true")
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                idx = self.expr()
                self.expect(")")
                return A.Index(t.text, idx)
            return A.Var(t.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.fail(["expression"])


def parse(source_text: str) -> A.Model:
    """Parse B0 source into an untyped :class:`Model`."""
    return Parser(source_text).model()


def parse_expr(text: str) -> A.Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail(["end of input"])
    return e
