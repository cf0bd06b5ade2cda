"""Lowering: typed AST -> executable IR.

The interesting part is guarded boolean expansion: a comparison over a
property chain becomes existence tests for every chain link plus the
comparison itself, evaluated left-to-right with shortcut semantics, so a
condition over partial data yields false instead of faulting.  Under the
``defaulting`` guard mode a missing link satisfies the comparison instead
(the whole expansion turns into a disjunction).

propose/timeout bodies compile to separate blocks with a declared capture
list: the rule-local variables referenced inside, captured by value when
the block is frozen.  The store is always read live at execution time.
"""

from __future__ import annotations

from . import syntax as ast
from .ir import (
    AndNode,
    Arith,
    AssignLocal,
    BaseTerm,
    BaseTermInfo,
    CallFn,
    Compare,
    Concat,
    CondNode,
    CondValue,
    Const,
    ConstCond,
    DAArgInit,
    DAArgRead,
    DAArgWrite,
    Exists,
    ExprInstr,
    InitItem,
    Interp,
    IR_VERSION,
    IRExpr,
    IRFunction,
    IRIf,
    IRProgram,
    IRRuleDef,
    IRStmt,
    LoadClass,
    LoadVar,
    MakeDA,
    Neg,
    NewInst,
    NotNode,
    OrNode,
    ProposeInstr,
    ReturnInstr,
    RuleInstr,
    StoreRead,
    StoreWrite,
    TimeoutInstr,
)
from .syntax import print_expr
from .typecheck import CheckedProgram

STRICT = "strict"
DEFAULTING = "defaulting"


class LoweringError(Exception):
    pass


def lower_program(checked: CheckedProgram, guard_mode: str = STRICT) -> IRProgram:
    """Lower a checked, error-free program to IR (total on such input)."""
    if checked.errors:
        raise LoweringError(
            "cannot lower a program with errors:\n" + checked.format_diagnostics()
        )
    if guard_mode not in (STRICT, DEFAULTING):
        raise LoweringError(f"unknown guard mode {guard_mode!r}")
    lw = _Lowerer(guard_mode)
    init: list[InitItem] = []
    round_items: list[tuple[str, int]] = []
    functions: dict[str, IRFunction] = {}
    seen_modules: list[str] = []
    for li in checked.link:
        if li.module not in seen_modules:
            seen_modules.append(li.module)
        item = li.item
        if isinstance(item, ast.FuncDef):
            functions[item.name] = IRFunction(
                item.name,
                [p.name for p in item.params],
                lw.lower_stmts(item.body.stmts, li.module, parent_rule=None),
            )
        elif isinstance(item, ast.Rule):
            rid = lw.lower_rule(item, li.module, parent=None)
            round_items.append(("rule", rid))
        else:
            init.append(InitItem(li.module, lw.lower_stmt(item, li.module, None)))
    return IRProgram(
        version=IR_VERSION,
        top_module=checked.top,
        module_order=seen_modules,
        module_files=dict(checked.files),
        init=init,
        rules=lw.rules,
        round_items=round_items,
        functions=functions,
    )


class _Lowerer:
    def __init__(self, guard_mode: str):
        self.guard_mode = guard_mode
        self.rules: list[IRRuleDef] = []

    # -- rules ----------------------------------------------------------------

    def lower_rule(self, rule: ast.Rule, module: str, parent: int | None) -> int:
        rid = len(self.rules)
        terms: list[BaseTermInfo] = []
        placeholder = IRRuleDef(
            rid, rule.label, module, rule.pos.line, rule.pos.col, ConstCond(False), terms, [], [], parent
        )
        self.rules.append(placeholder)
        placeholder.cond = self.expand_boolean(rule.cond, terms)
        placeholder.then = self.lower_stmts(rule.then.stmts, module, rid)
        placeholder.els = (
            self.lower_stmts(rule.els.stmts, module, rid) if rule.els is not None else []
        )
        return rid

    # -- statements -------------------------------------------------------------

    def lower_stmts(self, stmts: list, module: str, parent_rule: int | None) -> list[IRStmt]:
        out: list[IRStmt] = []
        for s in stmts:
            if isinstance(s, ast.Rule):
                rid = self.lower_rule(s, module, parent=parent_rule)
                out.append(RuleInstr(rid))
            else:
                out.append(self.lower_stmt(s, module, parent_rule))
        return out

    def lower_stmt(self, s: ast.Stmt, module: str, parent_rule: int | None) -> IRStmt:
        if isinstance(s, ast.Assign):
            return self.lower_assign(s)
        if isinstance(s, ast.ExprStmt):
            return ExprInstr(self.lower_expr(s.expr))
        if isinstance(s, ast.If):
            return IRIf(
                self.expand_boolean(s.cond, None),
                self.lower_stmts(s.then.stmts, module, parent_rule),
                self.lower_stmts(s.els.stmts, module, parent_rule) if s.els else [],
            )
        if isinstance(s, ast.Block):
            return IRIf(ConstCond(True), self.lower_stmts(s.stmts, module, parent_rule), [])
        if isinstance(s, ast.Propose):
            block = self.lower_stmts(s.body.stmts, module, parent_rule)
            return ProposeInstr(s.label, block, collect_captures(s.body))
        if isinstance(s, ast.TimeoutStmt):
            block = self.lower_stmts(s.body.stmts, module, parent_rule)
            return TimeoutInstr(s.name, self.lower_expr(s.delay), block, collect_captures(s.body))
        if isinstance(s, ast.Return):
            return ReturnInstr(self.lower_expr(s.value) if s.value is not None else None)
        raise LoweringError(f"cannot lower statement {type(s).__name__}")

    def lower_assign(self, s: ast.Assign) -> IRStmt:
        value = self.lower_expr(s.value)
        target = s.target
        if isinstance(target, ast.Var):
            kind, name = target.binding  # type: ignore[attr-defined]
            return AssignLocal(name, _scope_of(kind), value)
        assert isinstance(target, ast.FieldAccess)
        resolved = target.resolved  # type: ignore[attr-defined]
        base = self.lower_expr(target.base)
        if resolved[0] == "prop":
            return StoreWrite(base, resolved[1].prop.iri, value)
        return DAArgWrite(base, target.prop, value)

    # -- guarded boolean expansion ------------------------------------------------

    def expand_boolean(self, e: ast.Expr, terms: list | None) -> CondNode:
        """Expand a condition into a tree of guarded base terms.

        ``terms`` collects BaseTermInfo rows for logged (rule) conditions;
        pass None for unlogged conditions (plain ifs, expression position).
        """
        if isinstance(e, ast.BoolLit):
            return ConstCond(e.value)
        if isinstance(e, ast.Binary) and e.op in ("&&", "||"):
            node_cls = AndNode if e.op == "&&" else OrNode
            children = []
            for side in (e.lhs, e.rhs):
                sub = self.expand_boolean(side, terms)
                if isinstance(sub, node_cls):
                    children.extend(sub.children)
                else:
                    children.append(sub)
            return node_cls(children)
        if isinstance(e, ast.Unary) and e.op == "!":
            return NotNode(self.expand_boolean(e.operand, terms))
        if isinstance(e, ast.Binary) and hasattr(e, "resolved_op") and e.resolved_op.kind not in ("arith", "concat"):
            guards = self.chain_guards([e.lhs, e.rhs], terms)
            resolved = e.resolved_op
            cmp_ir = Compare(resolved.kind, resolved.op, self.lower_expr(e.lhs), self.lower_expr(e.rhs))
            term = self.make_term(e, terms, expr_ir=cmp_ir)
            return self._attach_guards(guards, term)
        if isinstance(e, ast.FieldAccess):
            guards = self.chain_guards([e], terms)
            if len(guards) == 1:
                return guards[0]
            return AndNode(guards)
        # atomic boolean expression: call, variable, ...
        guards = self.chain_guards([e], terms)
        term = self.make_term(e, terms)
        return self._attach_guards(guards, term)

    def _attach_guards(self, guards: list, term: CondNode) -> CondNode:
        if not guards:
            return term
        if self.guard_mode == DEFAULTING:
            return OrNode([NotNode(g) for g in guards] + [term])
        return AndNode(guards + [term])

    def make_term(self, e: ast.Expr, terms: list | None, expr_ir: IRExpr | None = None) -> BaseTerm:
        source = print_expr(e)
        if expr_ir is None:
            expr_ir = self.lower_expr(e)
        if terms is None:
            return BaseTerm(-1, source, expr_ir)
        info = BaseTermInfo(len(terms), source, e.pos.line, e.pos.col)
        terms.append(info)
        return BaseTerm(info.term_id, source, expr_ir)

    def make_exists_term(self, chain: ast.Expr, terms: list | None) -> BaseTerm:
        source = print_expr(chain)
        inner = self.lower_expr(chain)
        if terms is None:
            return BaseTerm(-1, source, Exists(inner))
        info = BaseTermInfo(len(terms), source, chain.pos.line, chain.pos.col)
        terms.append(info)
        return BaseTerm(info.term_id, source, Exists(inner))

    def chain_guards(self, roots: list, terms: list | None) -> list:
        """Existence tests for every property-chain prefix inside ``roots``.

        Boolean subexpressions are self-guarding (they lower to their own
        condition trees) and are not descended into.
        """
        chains: list[ast.FieldAccess] = []
        seen: set[str] = set()

        def visit(node: ast.Expr) -> None:
            if isinstance(node, ast.FieldAccess):
                visit(node.base)
                key = print_expr(node)
                if key not in seen:
                    seen.add(key)
                    chains.append(node)
                return
            if isinstance(node, ast.Binary):
                if node.op in ("&&", "||") or (
                    hasattr(node, "resolved_op") and node.resolved_op.kind != "arith"
                ):
                    return  # self-guarding boolean subtree
                visit(node.lhs)
                visit(node.rhs)
                return
            if isinstance(node, ast.Unary):
                if node.op == "!":
                    return
                visit(node.operand)
                return
            if isinstance(node, ast.Call):
                for a in node.args:
                    visit(a)
                return
            if isinstance(node, ast.InterpStr):
                for seg in node.segments:
                    if isinstance(seg, ast.Expr):
                        visit(seg)
                return
            if isinstance(node, ast.DALit):
                for arg in node.args:
                    if arg.kind == "expr":
                        visit(arg.value)
                return
            # literals, vars, new: nothing to guard

        for root in roots:
            visit(root)
        return [self.make_exists_term(c, terms) for c in chains]

    # -- expressions ----------------------------------------------------------------

    def lower_expr(self, e: ast.Expr) -> IRExpr:
        if isinstance(e, ast.IntLit):
            return Const(e.value)
        if isinstance(e, ast.DecimalLit):
            return Const(e.value)
        if isinstance(e, ast.BoolLit):
            return Const(e.value)
        if isinstance(e, ast.StrLit):
            return Const(e.value)
        if isinstance(e, ast.InterpStr):
            segments: list = []
            for seg in e.segments:
                segments.append(seg if isinstance(seg, str) else self.lower_expr(seg))
            return Interp(segments)
        if isinstance(e, ast.Var):
            kind, payload = e.binding  # type: ignore[attr-defined]
            if kind == "class":
                return LoadClass(payload)
            return LoadVar(payload, _scope_of(kind))
        if isinstance(e, ast.FieldAccess):
            resolved = e.resolved  # type: ignore[attr-defined]
            base = self.lower_expr(e.base)
            if resolved[0] == "prop":
                spec = resolved[1]
                return StoreRead(base, spec.prop.iri, spec.functional)
            return DAArgRead(base, e.prop)
        if isinstance(e, ast.Call):
            return CallFn(e.name, [self.lower_expr(a) for a in e.args])
        if isinstance(e, ast.New):
            return NewInst(e.resolved_class)  # type: ignore[attr-defined]
        if isinstance(e, ast.DALit):
            args = []
            for arg in e.args:
                if arg.kind == "expr":
                    args.append(DAArgInit(arg.key, self.lower_expr(arg.value)))
                else:
                    args.append(DAArgInit(arg.key, Const(str(arg.value))))
            token_iri = e.resolved_token or e.token  # type: ignore[attr-defined]
            frame_iri = getattr(e, "resolved_frame", None) or e.frame
            return MakeDA(token_iri, e.token, frame_iri, e.frame, args)
        if isinstance(e, ast.Unary):
            if e.op == "!":
                return CondValue(NotNode(self.expand_boolean(e.operand, None)))
            return Neg(self.lower_expr(e.operand))
        if isinstance(e, ast.Binary):
            if e.op in ("&&", "||"):
                return CondValue(self.expand_boolean(e, None))
            resolved = getattr(e, "resolved_op", None)
            if resolved is None:
                raise LoweringError(f"unresolved operator '{e.op}' at {e.pos}")
            if resolved.kind == "arith":
                return Arith(e.op, self.lower_expr(e.lhs), self.lower_expr(e.rhs))
            if resolved.kind == "concat":
                return Concat(self.lower_expr(e.lhs), self.lower_expr(e.rhs))
            return CondValue(self.expand_boolean(e, None))
        raise LoweringError(f"cannot lower expression {type(e).__name__}")


def _scope_of(binding_kind: str) -> str:
    return "global" if binding_kind == "module" else "local"


def collect_captures(body: ast.Block) -> list[str]:
    """Rule/function-scope variable names referenced anywhere in a block."""
    names: set[str] = set()

    def visit_expr(e: ast.Expr) -> None:
        if isinstance(e, ast.Var):
            binding = getattr(e, "binding", None)
            if binding and binding[0] in ("rule", "function"):
                names.add(binding[1])
            return
        for f in getattr(e, "__dataclass_fields__", {}):
            v = getattr(e, f)
            if isinstance(v, ast.Expr):
                visit_expr(v)
            elif isinstance(v, list):
                for item in v:
                    if isinstance(item, ast.Expr):
                        visit_expr(item)
                    elif isinstance(item, ast.DAArg) and isinstance(item.value, ast.Expr):
                        visit_expr(item.value)

    def visit_stmt(s: ast.Stmt) -> None:
        if isinstance(s, ast.Assign):
            visit_expr(s.target)
            visit_expr(s.value)
        elif isinstance(s, ast.ExprStmt):
            visit_expr(s.expr)
        elif isinstance(s, (ast.If, ast.Rule)):
            visit_expr(s.cond)
            for sub in s.then.stmts:
                visit_stmt(sub)
            if s.els is not None:
                for sub in s.els.stmts:
                    visit_stmt(sub)
        elif isinstance(s, ast.Block):
            for sub in s.stmts:
                visit_stmt(sub)
        elif isinstance(s, ast.Propose):
            for sub in s.body.stmts:
                visit_stmt(sub)
        elif isinstance(s, ast.TimeoutStmt):
            visit_expr(s.delay)
            for sub in s.body.stmts:
                visit_stmt(sub)
        elif isinstance(s, ast.Return):
            if s.value is not None:
                visit_expr(s.value)

    for stmt in body.stmts:
        visit_stmt(stmt)
    return sorted(names)
