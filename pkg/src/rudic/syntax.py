"""AST node types for the rule language, plus the canonical pretty-printer.

Positions are carried on every node but excluded from equality, so two
parses of equivalent text compare structurally equal.  ``pretty`` emits
canonical source that reparses to an identical tree (the round-trip
property the corpus tests pin down).
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Pos:
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _pos_field() -> Pos:
    return field(default_factory=Pos, compare=False)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


@dataclass
class Expr:
    pass


@dataclass
class IntLit(Expr):
    value: int
    pos: Pos = _pos_field()


@dataclass
class DecimalLit(Expr):
    value: float
    pos: Pos = _pos_field()


@dataclass
class BoolLit(Expr):
    value: bool
    pos: Pos = _pos_field()


@dataclass
class StrLit(Expr):
    value: str
    pos: Pos = _pos_field()


@dataclass
class InterpStr(Expr):
    """String literal with embedded expressions: "hi {user.name}!"."""

    segments: list  # str | Expr, in order
    pos: Pos = _pos_field()


@dataclass
class Var(Expr):
    name: str
    pos: Pos = _pos_field()


@dataclass
class FieldAccess(Expr):
    base: Expr
    prop: str
    pos: Pos = _pos_field()


@dataclass
class Call(Expr):
    name: str
    args: list
    pos: Pos = _pos_field()


@dataclass
class New(Expr):
    class_name: str
    pos: Pos = _pos_field()


@dataclass
class DAArg:
    key: str
    kind: str  # "bare" | "string" | "expr"
    value: object  # str for bare/string, Expr for expr
    pos: Pos = _pos_field()


@dataclass
class DALit(Expr):
    """Shallow semantic structure literal: #Token(Frame, k=v, k={expr})."""

    token: str
    frame: str | None
    args: list  # of DAArg
    pos: Pos = _pos_field()


@dataclass
class Unary(Expr):
    op: str  # "!" | "-"
    operand: Expr
    pos: Pos = _pos_field()


@dataclass
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr
    pos: Pos = _pos_field()


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------


@dataclass
class Stmt:
    pass


@dataclass
class Block(Stmt):
    stmts: list
    pos: Pos = _pos_field()


@dataclass
class Assign(Stmt):
    target: Expr  # Var or FieldAccess
    value: Expr
    pos: Pos = _pos_field()


@dataclass
class ExprStmt(Stmt):
    expr: Expr
    pos: Pos = _pos_field()


@dataclass
class If(Stmt):
    """Unlabeled conditional; branches are always Blocks."""

    cond: Expr
    then: Block
    els: Block | None
    pos: Pos = _pos_field()


@dataclass
class Rule(Stmt):
    """Labeled if-then-else: the unit of reactive behaviour."""

    label: str
    cond: Expr
    then: Block
    els: Block | None
    pos: Pos = _pos_field()


@dataclass
class Propose(Stmt):
    label: str
    body: Block
    pos: Pos = _pos_field()


@dataclass
class TimeoutStmt(Stmt):
    name: str
    delay: Expr
    body: Block
    pos: Pos = _pos_field()


@dataclass
class Return(Stmt):
    value: Expr | None
    pos: Pos = _pos_field()


@dataclass
class Param:
    type_name: str
    name: str
    pos: Pos = _pos_field()


@dataclass
class FuncDef(Stmt):
    name: str
    ret_type: str
    params: list  # of Param
    body: Block
    pos: Pos = _pos_field()


@dataclass
class Import(Stmt):
    module: str
    pos: Pos = _pos_field()


@dataclass
class Module:
    """One parsed rule file; items keep document order, imports included."""

    name: str
    items: list  # of Stmt
    pos: Pos = _pos_field()

    @property
    def imports(self) -> list[str]:
        return [it.module for it in self.items if isinstance(it, Import)]

    @property
    def rules(self) -> list[Rule]:
        return [it for it in self.items if isinstance(it, Rule)]

    @property
    def functions(self) -> list[FuncDef]:
        return [it for it in self.items if isinstance(it, FuncDef)]


# ---------------------------------------------------------------------------
# pretty printer
# ---------------------------------------------------------------------------

_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "==": 3,
    "!=": 3,
    "<=": 4,
    ">=": 4,
    "<": 4,
    ">": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
    "%": 6,
}

_UNARY_PRECEDENCE = 7


def _escape(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return out.replace("{", "\\{").replace("}", "\\}")


def print_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, DecimalLit):
        return repr(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, StrLit):
        return f'"{_escape(e.value)}"'
    if isinstance(e, InterpStr):
        parts = []
        for seg in e.segments:
            if isinstance(seg, str):
                parts.append(_escape(seg))
            else:
                parts.append("{" + print_expr(seg) + "}")
        return '"' + "".join(parts) + '"'
    if isinstance(e, Var):
        return e.name
    if isinstance(e, FieldAccess):
        return f"{print_expr(e.base, _UNARY_PRECEDENCE + 1)}.{e.prop}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, New):
        return f"new {e.class_name}"
    if isinstance(e, DALit):
        return print_da_literal(e)
    if isinstance(e, Unary):
        inner = print_expr(e.operand, _UNARY_PRECEDENCE)
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = _PRECEDENCE[e.op]
        lhs = print_expr(e.lhs, prec)
        rhs = print_expr(e.rhs, prec + 1)  # left-associative
        text = f"{lhs} {e.op} {rhs}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"unknown expression node {e!r}")


def print_da_literal(e: DALit) -> str:
    inner = []
    if e.frame is not None:
        inner.append(e.frame)
    for arg in e.args:
        if arg.kind == "bare":
            inner.append(f"{arg.key}={arg.value}")
        elif arg.kind == "string":
            inner.append(f'{arg.key}="{_escape(arg.value)}"')
        else:
            inner.append(f"{arg.key}={{{print_expr(arg.value)}}}")
    if not inner:
        return f"#{e.token}"
    return f"#{e.token}({', '.join(inner)})"


def _print_block(b: Block, indent: int) -> list[str]:
    pad = "  " * indent
    lines = [pad + "{"]
    for s in b.stmts:
        lines.extend(print_stmt(s, indent + 1))
    lines.append(pad + "}")
    return lines


def print_stmt(s: Stmt, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if isinstance(s, Block):
        return _print_block(s, indent)
    if isinstance(s, Assign):
        return [f"{pad}{print_expr(s.target)} = {print_expr(s.value)};"]
    if isinstance(s, ExprStmt):
        return [f"{pad}{print_expr(s.expr)};"]
    if isinstance(s, (If, Rule)):
        label = f"{s.label}: " if isinstance(s, Rule) else ""
        lines = [f"{pad}{label}if ({print_expr(s.cond)})"]
        lines.extend(_print_block(s.then, indent))
        if s.els is not None:
            lines.append(pad + "else")
            lines.extend(_print_block(s.els, indent))
        return lines
    if isinstance(s, Propose):
        lines = [f'{pad}propose("{_escape(s.label)}")']
        lines.extend(_print_block(s.body, indent))
        return lines
    if isinstance(s, TimeoutStmt):
        lines = [f'{pad}timeout("{_escape(s.name)}", {print_expr(s.delay)})']
        lines.extend(_print_block(s.body, indent))
        return lines
    if isinstance(s, Return):
        if s.value is None:
            return [pad + "return;"]
        return [f"{pad}return {print_expr(s.value)};"]
    if isinstance(s, FuncDef):
        params = ", ".join(f"{p.type_name} {p.name}" for p in s.params)
        lines = [f"{pad}{s.ret_type} {s.name}({params})"]
        lines.extend(_print_block(s.body, indent))
        return lines
    if isinstance(s, Import):
        return [f"{pad}import {s.module};"]
    raise TypeError(f"unknown statement node {s!r}")


def pretty(module: Module) -> str:
    lines: list[str] = []
    for item in module.items:
        lines.extend(print_stmt(item, 0))
    return "\n".join(lines) + ("\n" if lines else "")
