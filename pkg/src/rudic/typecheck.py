"""Type checking and inference over parsed modules.

Field-access chains are resolved against the ontology's property specs,
variable types are inferred from their first assignment, and overloaded
comparison operators are resolved to one concrete runtime behaviour.
Problems are collected as diagnostics instead of aborting at the first
error; the checker annotates AST nodes in place (``sem_type``,
``resolved_op``, ``binding`` ...) for the lowering stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import syntax as ast
from .semtypes import (
    BOOLEAN,
    BUILTIN_SIGNATURES,
    DACT,
    DECIMAL,
    INT,
    SCALARS,
    STRING,
    UNKNOWN,
    VOID,
    ClassValue,
    Collection,
    FuncType,
    Instance,
    ResolvedOp,
    Scalar,
    SemType,
    UnknownType,
    VoidType,
    resolve_overload,
    widen_numeric,
)
from .store import OntologySchema, PropertySpec, Resource
from .syntax import Pos

ERROR = "error"
WARNING = "warning"


@dataclass
class Diagnostic:
    file: str
    pos: Pos
    severity: str
    message: str

    def format(self) -> str:
        return f"{self.file}:{self.pos.line}:{self.pos.col}: {self.severity}: {self.message}"


@dataclass
class Scope:
    """One lexical scope; module scope is shared across the import tree."""

    kind: str  # "module" | "rule" | "function"
    bindings: dict = field(default_factory=dict)
    parent: "Scope | None" = None

    def lookup(self, name: str):
        scope = self
        while scope is not None:
            if name in scope.bindings:
                return scope, scope.bindings[name]
            scope = scope.parent
        return None, None

    def define(self, name: str, t: SemType) -> None:
        self.bindings[name] = t


@dataclass
class LinkedItem:
    """One non-import top-level item, in whole-program document order."""

    module: str
    item: ast.Stmt


@dataclass
class CheckedProgram:
    top: str
    modules: dict  # name -> Module
    files: dict  # name -> file path string (for diagnostics)
    link: list  # of LinkedItem
    diagnostics: list
    functions: dict  # name -> FuncType
    globals: Scope

    @property
    def errors(self) -> list:
        return [d for d in self.diagnostics if d.severity == ERROR]

    def format_diagnostics(self) -> str:
        return "\n".join(d.format() for d in self.diagnostics)


def type_from_name(name: str, schema: OntologySchema):
    """Resolve a surface type name: scalar keyword, DialogueAct, or a class."""
    if name in SCALARS:
        return SCALARS[name]
    if name == "void":
        return VOID
    if name == "DialogueAct":
        return DACT
    cls = schema.class_by_local_name(name)
    if cls is not None:
        return Instance(cls.iri)
    return None


class ModuleChecker:
    def __init__(
        self,
        module: ast.Module,
        schema: OntologySchema,
        globals_scope: Scope,
        functions: dict,
        file_name: str,
        diagnostics: list,
    ):
        self.module = module
        self.schema = schema
        self.globals = globals_scope
        self.functions = functions
        self.file = file_name
        self.diagnostics = diagnostics
        self.scope = globals_scope
        self.current_return: SemType | None = None
        self.rule_labels: set[str] = set()
        self._impurity_marks: list = []

    # -- diagnostics --------------------------------------------------------

    def error(self, pos: Pos, message: str) -> None:
        self.diagnostics.append(Diagnostic(self.file, pos, ERROR, message))

    def warning(self, pos: Pos, message: str) -> None:
        self.diagnostics.append(Diagnostic(self.file, pos, WARNING, message))

    # -- items ---------------------------------------------------------------

    def check_item(self, item: ast.Stmt) -> None:
        if isinstance(item, ast.FuncDef):
            self.check_funcdef(item)
        elif isinstance(item, ast.Rule):
            self.check_rule(item)
        elif isinstance(item, (ast.Assign, ast.ExprStmt)):
            self.check_stmt(item)
        elif isinstance(item, ast.Import):
            pass  # handled by the program walker
        else:
            self.error(item.pos, "only definitions, assignments and rules may appear at module level")

    def check_funcdef(self, fn: ast.FuncDef) -> None:
        ret = type_from_name(fn.ret_type, self.schema)
        if ret is None:
            self.error(fn.pos, f"unknown return type '{fn.ret_type}'")
            ret = UNKNOWN
        params = []
        fn_scope = Scope("function", parent=self.globals)
        for p in fn.params:
            pt = type_from_name(p.type_name, self.schema)
            if pt is None or pt == VOID:
                self.error(p.pos, f"unknown parameter type '{p.type_name}'")
                pt = UNKNOWN
            params.append(pt)
            fn_scope.define(p.name, pt)
        sig = FuncType(tuple(params), ret, pure=True)
        if fn.name in self.functions:
            self.error(fn.pos, f"function '{fn.name}' is already defined")
        self.functions[fn.name] = sig
        prev_scope, prev_ret = self.scope, self.current_return
        self.scope, self.current_return = fn_scope, ret
        impure_before = len(self._impurity_marks)
        self.check_block(fn.body, allow_rules=False)
        self.scope, self.current_return = prev_scope, prev_ret
        if len(self._impurity_marks) > impure_before:
            self.functions[fn.name] = FuncType(tuple(params), ret, pure=False)
        fn.resolved_sig = self.functions[fn.name]  # type: ignore[attr-defined]

    def check_rule(self, rule: ast.Rule) -> None:
        if rule.label in self.rule_labels:
            self.error(rule.pos, f"duplicate rule label '{rule.label}'")
        self.rule_labels.add(rule.label)
        rule_scope = Scope("rule", parent=self.globals)
        prev = self.scope
        self.scope = rule_scope
        self.check_condition(rule.cond)
        self._reject_impure_calls(rule.cond)
        self.check_block(rule.then, allow_rules=True)
        if rule.els is not None:
            self.check_block(rule.els, allow_rules=True)
        self.scope = prev

    # -- statements ------------------------------------------------------------

    def check_block(self, block: ast.Block, allow_rules: bool) -> None:
        for stmt in block.stmts:
            if isinstance(stmt, ast.Rule):
                if not allow_rules:
                    self.error(stmt.pos, "rules may not be defined inside functions")
                    continue
                if stmt.label in self.rule_labels:
                    self.error(stmt.pos, f"duplicate rule label '{stmt.label}'")
                self.rule_labels.add(stmt.label)
                self.check_condition(stmt.cond)
                self._reject_impure_calls(stmt.cond)
                self.check_block(stmt.then, allow_rules=True)
                if stmt.els is not None:
                    self.check_block(stmt.els, allow_rules=True)
            else:
                self.check_stmt(stmt, allow_rules=allow_rules)

    def check_stmt(self, stmt: ast.Stmt, allow_rules: bool = False) -> None:
        if isinstance(stmt, ast.Assign):
            self.check_assign(stmt)
        elif isinstance(stmt, ast.ExprStmt):
            t = self.check_expr(stmt.expr)
            if not isinstance(stmt.expr, ast.Call) and t not in (VOID, UNKNOWN):
                self.warning(stmt.pos, "expression statement has no effect")
        elif isinstance(stmt, ast.If):
            self.check_condition(stmt.cond)
            self._reject_impure_calls(stmt.cond)
            self.check_block(stmt.then, allow_rules=allow_rules)
            if stmt.els is not None:
                self.check_block(stmt.els, allow_rules=allow_rules)
        elif isinstance(stmt, ast.Block):
            self.check_block(stmt, allow_rules=allow_rules)
        elif isinstance(stmt, ast.Propose):
            if self.scope.kind == "function":
                self.error(stmt.pos, "propose is only allowed inside rules")
            self._mark_impure()
            self.check_block(stmt.body, allow_rules=allow_rules)
        elif isinstance(stmt, ast.TimeoutStmt):
            if self.scope.kind == "function":
                self.error(stmt.pos, "timeout is only allowed inside rules")
            self._mark_impure()
            delay_t = self.check_expr(stmt.delay)
            if delay_t not in (INT, UNKNOWN):
                self.error(stmt.delay.pos, f"timeout delay must be int, got {delay_t.show()}")
            self.check_block(stmt.body, allow_rules=allow_rules)
        elif isinstance(stmt, ast.Return):
            if self.current_return is None:
                self.error(stmt.pos, "return outside of a function")
                if stmt.value is not None:
                    self.check_expr(stmt.value)
                return
            if stmt.value is None:
                if self.current_return != VOID:
                    self.error(stmt.pos, "missing return value")
            else:
                t = self.check_expr(stmt.value)
                if not self.assignable(t, self.current_return):
                    self.error(
                        stmt.pos,
                        f"cannot return {t.show()} from a function declared {self.current_return.show()}",
                    )
        elif isinstance(stmt, ast.Import):
            self.error(stmt.pos, "imports are only allowed at module level")
        else:
            self.error(stmt.pos, f"unsupported statement {type(stmt).__name__}")

    def check_assign(self, stmt: ast.Assign) -> None:
        value_t = self.check_expr(stmt.value)
        if value_t == VOID:
            self.error(stmt.value.pos, "cannot assign a void expression")
            value_t = UNKNOWN
        target = stmt.target
        if isinstance(target, ast.Var):
            scope, bound = self.scope.lookup(target.name)
            if scope is None:
                cls = self.schema.class_by_local_name(target.name)
                if cls is not None:
                    self.error(target.pos, f"cannot assign to class name '{target.name}'")
                    return
                self.scope.define(target.name, value_t)
                target.binding = (self.scope.kind, target.name)  # type: ignore[attr-defined]
                target.sem_type = value_t  # type: ignore[attr-defined]
            else:
                if not self.assignable(value_t, bound):
                    self.error(
                        stmt.pos,
                        f"cannot assign {value_t.show()} to '{target.name}' of type {bound.show()}",
                    )
                target.binding = (scope.kind, target.name)  # type: ignore[attr-defined]
                target.sem_type = bound  # type: ignore[attr-defined]
                if scope.kind == "module" and self.scope.kind == "function":
                    self._mark_impure()
        elif isinstance(target, ast.FieldAccess):
            slot_t = self.check_field_access(target, writing=True)
            resolved = getattr(target, "resolved", None)
            if resolved and resolved[0] == "prop":
                spec: PropertySpec = resolved[1]
                expected = self.range_type(spec, for_write=True)
                if not self.assignable(value_t, expected):
                    self.error(
                        stmt.pos,
                        f"cannot assign {value_t.show()} to property "
                        f"'{target.prop}' expecting {expected.show()}",
                    )
                self._mark_impure()
            elif resolved and resolved[0] == "da_arg":
                if not self.stringifiable(value_t):
                    self.error(stmt.pos, f"cannot store {value_t.show()} in a dialogue-act argument")
                self._mark_impure()
            else:
                # resolution already failed with a diagnostic
                _ = slot_t
        else:
            self.error(stmt.pos, "assignment target must be a variable or field access")

    # -- conditions --------------------------------------------------------------

    def check_condition(self, e: ast.Expr) -> None:
        t = self.check_expr(e, bool_context=True)
        if t == BOOLEAN or isinstance(t, UnknownType):
            return
        if isinstance(e, ast.FieldAccess):
            return  # bare chain: existence test
        self.error(e.pos, f"cannot use a {t.show()} value as a condition")

    def _check_bool_operand(self, e: ast.Expr) -> None:
        self.check_condition(e)

    def _reject_impure_calls(self, e: ast.Expr) -> None:
        for node in walk_exprs(e):
            if isinstance(node, ast.Call):
                sig = getattr(node, "resolved_sig", None)
                if sig is not None and not sig.pure:
                    self.error(
                        node.pos,
                        f"call to side-effecting function '{node.name}' is not allowed in a condition",
                    )

    # -- expressions ---------------------------------------------------------------

    def check_expr(self, e: ast.Expr, bool_context: bool = False) -> SemType:
        t = self._infer(e, bool_context)
        e.sem_type = t  # type: ignore[attr-defined]
        return t

    def _infer(self, e: ast.Expr, bool_context: bool) -> SemType:
        if isinstance(e, ast.IntLit):
            return INT
        if isinstance(e, ast.DecimalLit):
            return DECIMAL
        if isinstance(e, ast.BoolLit):
            return BOOLEAN
        if isinstance(e, ast.StrLit):
            return STRING
        if isinstance(e, ast.InterpStr):
            for seg in e.segments:
                if isinstance(seg, ast.Expr):
                    seg_t = self.check_expr(seg)
                    if not self.stringifiable(seg_t):
                        self.error(seg.pos, f"cannot interpolate a {seg_t.show()} value")
            return STRING
        if isinstance(e, ast.Var):
            scope, bound = self.scope.lookup(e.name)
            if scope is not None:
                e.binding = (scope.kind, e.name)  # type: ignore[attr-defined]
                return bound
            cls = self.schema.class_by_local_name(e.name)
            if cls is not None:
                e.binding = ("class", cls.iri)  # type: ignore[attr-defined]
                return ClassValue(cls.iri)
            self.error(e.pos, f"unknown name '{e.name}'")
            return UNKNOWN
        if isinstance(e, ast.New):
            cls = self.schema.class_by_local_name(e.class_name)
            if cls is None:
                self.error(e.pos, f"unknown class '{e.class_name}'")
                return UNKNOWN
            e.resolved_class = cls.iri  # type: ignore[attr-defined]
            return Instance(cls.iri)
        if isinstance(e, ast.FieldAccess):
            return self.check_field_access(e, writing=False)
        if isinstance(e, ast.Call):
            return self.check_call(e)
        if isinstance(e, ast.DALit):
            return self.check_da_literal(e)
        if isinstance(e, ast.Unary):
            if e.op == "!":
                self._check_bool_operand(e.operand)
                return BOOLEAN
            t = self.check_expr(e.operand)
            if t in (INT, DECIMAL):
                return t
            if t != UNKNOWN:
                self.error(e.pos, f"cannot negate a {t.show()} value")
            return UNKNOWN
        if isinstance(e, ast.Binary):
            return self.check_binary(e, bool_context)
        raise TypeError(f"unknown expression node {e!r}")

    def check_field_access(self, e: ast.FieldAccess, writing: bool) -> SemType:
        base_t = self.check_expr(e.base)
        if isinstance(base_t, Instance):
            spec = self.resolve_property(e.prop, base_t, e.pos)
            if spec is None:
                return UNKNOWN
            e.resolved = ("prop", spec)  # type: ignore[attr-defined]
            return self.range_type(spec, for_write=writing)
        if base_t == DACT:
            e.resolved = ("da_arg", e.prop)  # type: ignore[attr-defined]
            return STRING
        if base_t != UNKNOWN:
            self.error(e.pos, f"a {base_t.show()} value has no properties")
        return UNKNOWN

    def resolve_property(self, name: str, base: Instance, pos: Pos) -> PropertySpec | None:
        by_name = [
            spec
            for iri, spec in sorted(self.schema.properties.items())
            if spec.prop.local_name() == name
        ]
        if not by_name:
            self.error(pos, f"unknown property '{name}'")
            return None
        base_cls = Resource(base.class_iri)
        applicable = [
            spec
            for spec in by_name
            if self.schema.is_subclass_of(base_cls, spec.domain)
        ]
        if not applicable:
            domains = ", ".join(spec.domain.local_name() for spec in by_name)
            self.error(
                pos,
                f"property '{name}' is not declared for {base.show()} (domain: {domains})",
            )
            return None
        if len(applicable) > 1:
            self.error(pos, f"property name '{name}' is ambiguous for {base.show()}")
            return None
        return applicable[0]

    def range_type(self, spec: PropertySpec, for_write: bool) -> SemType:
        if isinstance(spec.range, Resource):
            base: SemType = Instance(spec.range.iri)
        else:
            base = SCALARS["timestamp" if spec.range == "dateTime" else spec.range]
        if spec.functional or for_write:
            # writes to a non-functional property add one element
            return base
        return Collection(base)

    def check_call(self, e: ast.Call) -> SemType:
        sig = self.functions.get(e.name)
        if sig is None:
            self.error(e.pos, f"unknown function '{e.name}'")
            for a in e.args:
                self.check_expr(a)
            return UNKNOWN
        e.resolved_sig = sig  # type: ignore[attr-defined]
        if not sig.pure:
            self._mark_impure()
        if len(e.args) != len(sig.params):
            self.error(
                e.pos,
                f"'{e.name}' expects {len(sig.params)} argument(s), got {len(e.args)}",
            )
        for arg, expected in zip(e.args, sig.params):
            got = self.check_expr(arg)
            if not self.assignable(got, expected):
                self.error(
                    arg.pos,
                    f"argument of type {got.show()} does not match {expected.show()}",
                )
        for extra in e.args[len(sig.params) :]:
            self.check_expr(extra)
        return sig.returns

    def check_da_literal(self, e: ast.DALit) -> SemType:
        token_cls = self.schema.class_by_local_name(e.token, within=self.schema.da_tokens())
        if token_cls is None:
            self.error(e.pos, f"unknown dialogue-act token '{e.token}'")
        e.resolved_token = token_cls.iri if token_cls else None  # type: ignore[attr-defined]
        if e.frame is not None:
            frame_cls = self.schema.class_by_local_name(e.frame, within=self.schema.frames())
            if frame_cls is None:
                self.error(e.pos, f"unknown frame '{e.frame}'")
            e.resolved_frame = frame_cls.iri if frame_cls else None  # type: ignore[attr-defined]
        else:
            e.resolved_frame = None  # type: ignore[attr-defined]
        seen = set()
        for arg in e.args:
            if arg.key in seen:
                self.error(arg.pos, f"duplicate dialogue-act argument '{arg.key}'")
            seen.add(arg.key)
            if arg.kind == "expr":
                t = self.check_expr(arg.value)
                if not self.stringifiable(t):
                    self.error(arg.pos, f"cannot use a {t.show()} value as an argument")
        return DACT

    def check_binary(self, e: ast.Binary, bool_context: bool) -> SemType:
        if e.op in ("&&", "||"):
            self._check_bool_operand(e.lhs)
            self._check_bool_operand(e.rhs)
            return BOOLEAN
        lhs = self.check_expr(e.lhs)
        rhs = self.check_expr(e.rhs)
        if e.op in ("+", "-", "*", "/", "%"):
            if e.op == "+" and lhs == STRING and rhs == STRING:
                e.resolved_op = ResolvedOp("concat", "+")  # type: ignore[attr-defined]
                return STRING
            if lhs in (INT, DECIMAL) and rhs in (INT, DECIMAL):
                result = widen_numeric(lhs, rhs)
                e.resolved_op = ResolvedOp("arith", e.op)  # type: ignore[attr-defined]
                return result
            if UNKNOWN in (lhs, rhs):
                return UNKNOWN
            self.error(e.pos, f"operator '{e.op}' is not defined for {lhs.show()} and {rhs.show()}")
            return UNKNOWN
        if UNKNOWN in (lhs, rhs):
            return BOOLEAN
        resolved = resolve_overload(e.op, lhs, rhs)
        if resolved is None:
            self.error(
                e.pos,
                f"operator '{e.op}' is not defined for {lhs.show()} and {rhs.show()}",
            )
            return BOOLEAN
        e.resolved_op = resolved  # type: ignore[attr-defined]
        return BOOLEAN

    # -- helpers -------------------------------------------------------------------

    def assignable(self, src: SemType, dst: SemType) -> bool:
        if UNKNOWN in (src, dst) or src == dst:
            return True
        if src == INT and dst == DECIMAL:
            return True
        if src == INT and dst == Scalar("timestamp"):
            return True
        if isinstance(src, Instance) and isinstance(dst, Instance):
            return self.schema.is_subclass_of(Resource(src.class_iri), Resource(dst.class_iri))
        return False

    def stringifiable(self, t: SemType) -> bool:
        return not isinstance(t, (VoidType, FuncType, Collection))

    def _mark_impure(self) -> None:
        self._impurity_marks.append(True)


def walk_exprs(e: ast.Expr):
    yield e
    for f in getattr(e, "__dataclass_fields__", {}):
        v = getattr(e, f)
        if isinstance(v, ast.Expr):
            yield from walk_exprs(v)
        elif isinstance(v, list):
            for item in v:
                if isinstance(item, ast.Expr):
                    yield from walk_exprs(item)
                elif isinstance(item, ast.DAArg) and isinstance(item.value, ast.Expr):
                    yield from walk_exprs(item.value)


# ---------------------------------------------------------------------------
# whole-program checking (import tree)
# ---------------------------------------------------------------------------


def check_program(
    top_name: str,
    loader,
    schema: OntologySchema,
    extension_signatures: dict | None = None,
) -> CheckedProgram:
    """Check the import tree rooted at ``top_name`` in document order.

    ``loader(name)`` returns ``(Module, file_name)``.  Definitions become
    visible in the shared module scope as the walk encounters them, so an
    imported module sees everything defined before its import statement.
    """
    globals_scope = Scope("module")
    functions = dict(BUILTIN_SIGNATURES)
    functions.update(extension_signatures or {})
    diagnostics: list[Diagnostic] = []
    link: list[LinkedItem] = []
    modules: dict[str, ast.Module] = {}
    files: dict[str, str] = {}
    visiting: list[str] = []

    def walk(name: str, at: Pos, via_file: str) -> None:
        if name in visiting:
            cycle = " -> ".join(visiting + [name])
            diagnostics.append(
                Diagnostic(via_file, at, ERROR, f"import cycle: {cycle}")
            )
            return
        if name in modules:
            diagnostics.append(
                Diagnostic(via_file, at, ERROR, f"module '{name}' is imported twice")
            )
            return
        try:
            module, file_name = loader(name)
        except (KeyError, OSError) as exc:
            diagnostics.append(Diagnostic(via_file, at, ERROR, f"cannot load module '{name}': {exc}"))
            return
        modules[name] = module
        files[name] = file_name
        visiting.append(name)
        checker = ModuleChecker(module, schema, globals_scope, functions, file_name, diagnostics)
        for item in module.items:
            if isinstance(item, ast.Import):
                walk(item.module, item.pos, file_name)
            else:
                checker.check_item(item)
                link.append(LinkedItem(name, item))
        visiting.pop()

    walk(top_name, Pos(1, 1), top_name)
    return CheckedProgram(
        top=top_name,
        modules=modules,
        files=files,
        link=link,
        diagnostics=diagnostics,
        functions=functions,
        globals=globals_scope,
    )


def check_single_module(
    module: ast.Module,
    schema: OntologySchema,
    extension_signatures: dict | None = None,
) -> CheckedProgram:
    """Convenience wrapper for checking one module without imports."""

    def loader(name: str):
        if name != module.name:
            raise KeyError(name)
        return module, f"{name}.rudi"

    return check_program(module.name, loader, schema, extension_signatures)
