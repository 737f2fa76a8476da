"""Syntax tree and type descriptors for the B0 control language."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

INT32_MIN = -(2 ** 31)
INT32_MAX = 2 ** 31 - 1
INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


# -- types -----------------------------------------------------------------

@dataclass(frozen=True)
class BoolType:
    def __str__(self):
        return "BOOL"


@dataclass(frozen=True)
class IntType:
    """Integer range type.  Declared types stay within 32 bits; expression
    types reuse this class to carry their static value interval."""
    lo: int
    hi: int

    def __str__(self):
        return f"INT({self.lo}..{self.hi})"

    def contains(self, other: "IntType") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass(frozen=True)
class ArrayType:
    length: int
    elem: Union[BoolType, IntType]

    def __str__(self):
        return f"ARRAY {self.length} OF {self.elem}"


B0Type = Union[BoolType, IntType, ArrayType]
BOOL = BoolType()


def scalar_count(t: B0Type) -> int:
    return t.length if isinstance(t, ArrayType) else 1


def elem_type(t: B0Type):
    return t.elem if isinstance(t, ArrayType) else t


def domain_size(t) -> int:
    t = elem_type(t)
    return 2 if isinstance(t, BoolType) else t.hi - t.lo + 1


# -- expressions -----------------------------------------------------------
# ``ty`` is filled in by the type checker and ignored by equality so that
# parsed and typed trees compare structurally.

@dataclass(frozen=True)
class IntLit:
    value: int
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    """Arithmetic: ``+ - * div mod``."""
    op: str
    left: "Expr"
    right: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Cmp:
    """Relational: ``= /= < <= > >=``."""
    op: str
    left: "Expr"
    right: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BoolOp:
    """Connective: ``&`` or ``or``."""
    op: str
    left: "Expr"
    right: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Ite:
    """Conditional value.  Never produced by the parser; the proof
    obligation generator uses it internally and removes it before export."""
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    ty: object = field(default=None, compare=False, repr=False)


Expr = Union[IntLit, BoolLit, Var, Index, BinOp, Neg, Cmp, BoolOp, Not, Ite]

TRUE = BoolLit(True)
FALSE = BoolLit(False)


# -- statements ------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: str
    index: Optional[Expr]
    value: Expr
    loc: str = field(default="?", compare=False)


@dataclass(frozen=True)
class If:
    branches: Tuple[Tuple[Expr, Tuple["Stmt", ...]], ...]
    orelse: Tuple["Stmt", ...]
    loc: str = field(default="?", compare=False)


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: Tuple["Stmt", ...]
    loc: str = field(default="?", compare=False)

    @property
    def bounds(self) -> Tuple[int, int]:
        return self.lo.value, self.hi.value

    @property
    def trip_count(self) -> int:
        lo, hi = self.bounds
        return max(0, hi - lo + 1)


Stmt = Union[Assign, If, For]


@dataclass(frozen=True)
class Decl:
    name: str
    type: B0Type
    loc: str = field(default="?", compare=False)


@dataclass(frozen=True)
class Model:
    name: str
    inputs: Tuple[Decl, ...]
    outputs: Tuple[Decl, ...]
    vars: Tuple[Decl, ...]
    invariant: Expr
    init: Tuple[Stmt, ...]
    cycle: Tuple[Stmt, ...]

    @property
    def state_decls(self) -> Tuple[Decl, ...]:
        """State variables in canonical order: VARS then OUTPUTS, each in
        declaration order."""
        return self.vars + self.outputs

    def decl(self, name: str) -> Optional[Decl]:
        for d in self.inputs + self.outputs + self.vars:
            if d.name == name:
                return d
        return None


def children(e: Expr):
    if isinstance(e, (BinOp, Cmp, BoolOp)):
        return (e.left, e.right)
    if isinstance(e, (Neg, Not)):
        return (e.operand,)
    if isinstance(e, Index):
        return (e.index,)
    if isinstance(e, Ite):
        return (e.cond, e.then, e.orelse)
    return ()


def walk(e: Expr):
    yield e
    for c in children(e):
        yield from walk(c)
