"""Portable executable IR: what the engine interprets and `.rudic` stores.

Rule conditions are trees of base terms combined with shortcut and/or/not;
every base term has a stable id that the debug log format references.
Action blocks are lists of instructions.  The whole program (import tree
already inlined in document order) serializes to a versioned JSON form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, is_dataclass

IR_VERSION = 1


# -- expressions -------------------------------------------------------------


@dataclass
class IRExpr:
    pass


@dataclass
class Const(IRExpr):
    value: object  # int | float | str | bool


@dataclass
class LoadVar(IRExpr):
    name: str
    scope: str  # "global" | "local"


@dataclass
class LoadClass(IRExpr):
    class_iri: str


@dataclass
class StoreRead(IRExpr):
    base: IRExpr
    prop_iri: str
    functional: bool


@dataclass
class DAArgRead(IRExpr):
    da: IRExpr
    key: str


@dataclass
class CallFn(IRExpr):
    name: str
    args: list


@dataclass
class NewInst(IRExpr):
    class_iri: str


@dataclass
class DAArgInit:
    key: str
    value: IRExpr  # evaluated and stringified; absent drops the argument


@dataclass
class MakeDA(IRExpr):
    token: str  # resolved token iri (or bare name when unresolved)
    token_name: str
    frame: str | None
    frame_name: str | None
    args: list  # of DAArgInit


@dataclass
class Interp(IRExpr):
    segments: list  # str | IRExpr


@dataclass
class Arith(IRExpr):
    op: str
    lhs: IRExpr
    rhs: IRExpr


@dataclass
class Concat(IRExpr):
    lhs: IRExpr
    rhs: IRExpr


@dataclass
class Neg(IRExpr):
    operand: IRExpr


@dataclass
class Compare(IRExpr):
    kind: str  # ResolvedOp kind
    op: str
    lhs: IRExpr
    rhs: IRExpr


@dataclass
class Exists(IRExpr):
    """True when the inner read yields a present (non-absent) value."""

    inner: IRExpr


@dataclass
class CondValue(IRExpr):
    """A condition tree used in expression position (yields a boolean)."""

    tree: "CondNode"


# -- condition trees -----------------------------------------------------------


@dataclass
class CondNode:
    pass


@dataclass
class BaseTerm(CondNode):
    term_id: int  # index within the owning rule; -1 when unlogged
    source: str
    expr: IRExpr


@dataclass
class ConstCond(CondNode):
    value: bool


@dataclass
class AndNode(CondNode):
    children: list


@dataclass
class OrNode(CondNode):
    children: list


@dataclass
class NotNode(CondNode):
    child: CondNode


# -- statements ----------------------------------------------------------------


@dataclass
class IRStmt:
    pass


@dataclass
class AssignLocal(IRStmt):
    name: str
    scope: str  # "global" | "local"
    value: IRExpr


@dataclass
class StoreWrite(IRStmt):
    base: IRExpr
    prop_iri: str
    value: IRExpr


@dataclass
class DAArgWrite(IRStmt):
    da: IRExpr
    key: str
    value: IRExpr


@dataclass
class ExprInstr(IRStmt):
    expr: IRExpr


@dataclass
class IRIf(IRStmt):
    cond: CondNode
    then: list
    els: list


@dataclass
class RuleInstr(IRStmt):
    """Evaluation of a nested rule, referenced by id into the rule table."""

    rule_id: int


@dataclass
class ProposeInstr(IRStmt):
    label: str
    block: list
    captures: list  # local names captured by value at freeze time


@dataclass
class TimeoutInstr(IRStmt):
    name: str
    delay: IRExpr
    block: list
    captures: list


@dataclass
class ReturnInstr(IRStmt):
    value: IRExpr | None


# -- program -----------------------------------------------------------------


@dataclass
class BaseTermInfo:
    term_id: int
    source: str
    line: int
    col: int


@dataclass
class IRRuleDef:
    rule_id: int
    label: str
    module: str
    line: int
    col: int
    cond: CondNode
    base_terms: list  # of BaseTermInfo
    then: list  # of IRStmt
    els: list
    parent: int | None  # enclosing rule id, None for top-level rules


@dataclass
class IRFunction:
    name: str
    params: list  # parameter names
    body: list  # of IRStmt


@dataclass
class InitItem:
    module: str
    stmt: IRStmt


@dataclass
class IRProgram:
    version: int
    top_module: str
    module_order: list  # module names in link (inline) order
    module_files: dict  # name -> source file path
    init: list  # of InitItem, whole-program document order
    rules: list  # of IRRuleDef; index == rule_id
    round_items: list  # evaluation order per iteration: ("rule", id) entries
    functions: dict  # name -> IRFunction

    def rule_by_label(self, label: str) -> IRRuleDef | None:
        for r in self.rules:
            if r.label == label:
                return r
        return None


# -- serialization -------------------------------------------------------------

_NODE_TYPES = {
    cls.__name__: cls
    for cls in (
        Const,
        LoadVar,
        LoadClass,
        StoreRead,
        DAArgRead,
        CallFn,
        NewInst,
        DAArgInit,
        MakeDA,
        Interp,
        Arith,
        Concat,
        Neg,
        Compare,
        Exists,
        CondValue,
        BaseTerm,
        ConstCond,
        AndNode,
        OrNode,
        NotNode,
        AssignLocal,
        StoreWrite,
        DAArgWrite,
        ExprInstr,
        IRIf,
        RuleInstr,
        ProposeInstr,
        TimeoutInstr,
        ReturnInstr,
        BaseTermInfo,
        IRRuleDef,
        IRFunction,
        InitItem,
        IRProgram,
    )
}


def _encode(obj):
    if is_dataclass(obj):
        out = {"k": type(obj).__name__}
        for f in fields(obj):
            out[f.name] = _encode(getattr(obj, f.name))
        return out
    if isinstance(obj, list):
        return [_encode(x) for x in obj]
    if isinstance(obj, tuple):
        return [_encode(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "k" in obj:
            cls = _NODE_TYPES[obj["k"]]
            kwargs = {k: _decode(v) for k, v in obj.items() if k != "k"}
            return cls(**kwargs)
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(x) for x in obj]
    return obj


def dump_program(program: IRProgram) -> str:
    """Deterministic textual artifact form (stable bytes for equal input)."""
    return json.dumps(_encode(program), sort_keys=True, separators=(",", ":")) + "\n"


def load_program(text: str) -> IRProgram:
    data = json.loads(text)
    program = _decode(data)
    if not isinstance(program, IRProgram):
        raise ValueError("not an IR program artifact")
    if program.version != IR_VERSION:
        raise ValueError(f"unsupported IR version {program.version}")
    return program
