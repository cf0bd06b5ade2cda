"""Recursive-descent parser producing a Module AST per source file."""

from __future__ import annotations

from .lexer import Token, tokenize
from .syntax import (
    Assign,
    Binary,
    Block,
    BoolLit,
    Call,
    DAArg,
    DALit,
    DecimalLit,
    Expr,
    ExprStmt,
    FieldAccess,
    FuncDef,
    If,
    Import,
    IntLit,
    InterpStr,
    Module,
    New,
    Param,
    Pos,
    Propose,
    Return,
    Rule,
    Stmt,
    StrLit,
    TimeoutStmt,
    Unary,
    Var,
)

# names usable as scalar types in function signatures
SCALAR_TYPE_NAMES = {"int", "decimal", "string", "boolean", "timestamp", "void"}


class RudiSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: set[str] | None = None):
        detail = message
        if expected:
            detail += " (expected " + ", ".join(sorted(expected)) + ")"
        super().__init__(f"{line}:{col}: {detail}")
        self.line = line
        self.col = col
        self.expected = expected or set()


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        i = min(self.i + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, kind: str, offset: int = 0) -> bool:
        return self.peek(offset).kind == kind

    def take(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.error(f"unexpected {describe(tok)}", {kind})
        return self.take()

    def error(self, message: str, expected: set[str] | None = None) -> RudiSyntaxError:
        tok = self.peek()
        return RudiSyntaxError(message, tok.line, tok.col, expected)

    def pos(self) -> Pos:
        tok = self.peek()
        return Pos(tok.line, tok.col)

    # -- module level --------------------------------------------------------

    def parse_module(self, name: str) -> Module:
        items: list[Stmt] = []
        labels: set[str] = set()
        while not self.at("eof"):
            item = self.parse_top_item()
            if isinstance(item, Rule):
                if item.label in labels:
                    raise RudiSyntaxError(
                        f"duplicate rule label '{item.label}'",
                        item.pos.line,
                        item.pos.col,
                    )
                labels.add(item.label)
            items.append(item)
        return Module(name, items, Pos(1, 1))

    def parse_top_item(self) -> Stmt:
        if self.at("import"):
            pos = self.pos()
            self.take()
            mod = self.expect("ident").text
            self.expect(";")
            return Import(mod, pos)
        if self.at("if"):
            raise self.error("top-level if must carry a rule label ('label: if ...')")
        if self._at_function_def():
            return self.parse_function()
        return self.parse_statement(top_level=True)

    def _at_function_def(self) -> bool:
        # two identifiers in a row only occur as "RetType name(" at module level
        return self.at("ident") and self.at("ident", 1) and self.at("(", 2)

    def parse_function(self) -> FuncDef:
        pos = self.pos()
        ret_type = self.expect("ident").text
        name = self.expect("ident").text
        self.expect("(")
        params: list[Param] = []
        if not self.at(")"):
            while True:
                p_pos = self.pos()
                type_name = self.expect("ident").text
                p_name = self.expect("ident").text
                params.append(Param(type_name, p_name, p_pos))
                if self.at(","):
                    self.take()
                    continue
                break
        self.expect(")")
        body = self.parse_block()
        return FuncDef(name, ret_type, params, body, pos)

    # -- statements -----------------------------------------------------------

    def parse_statement(self, top_level: bool = False) -> Stmt:
        tok = self.peek()
        if tok.kind == "{":
            return self.parse_block()
        if tok.kind == "ident" and self.at(":", 1):
            return self.parse_rule()
        if tok.kind == "if":
            if top_level:
                raise self.error("top-level if must carry a rule label ('label: if ...')")
            return self.parse_if()
        if tok.kind == "propose":
            return self.parse_propose()
        if tok.kind == "timeout":
            return self.parse_timeout()
        if tok.kind == "return":
            pos = self.pos()
            self.take()
            value = None if self.at(";") else self.parse_expression()
            self.expect(";")
            return Return(value, pos)
        if tok.kind == "import":
            raise self.error("imports are only allowed at module level")
        pos = self.pos()
        expr = self.parse_expression()
        if self.at("="):
            self.take()
            if not isinstance(expr, (Var, FieldAccess)):
                raise RudiSyntaxError(
                    "assignment target must be a variable or field access",
                    pos.line,
                    pos.col,
                )
            value = self.parse_expression()
            self.expect(";")
            return Assign(expr, value, pos)
        self.expect(";")
        return ExprStmt(expr, pos)

    def parse_rule(self) -> Rule:
        pos = self.pos()
        label = self.expect("ident").text
        self.expect(":")
        if not self.at("if"):
            raise self.error("a rule label must be followed by 'if'", {"if"})
        cond, then, els = self._parse_if_parts()
        return Rule(label, cond, then, els, pos)

    def parse_if(self) -> If:
        pos = self.pos()
        cond, then, els = self._parse_if_parts()
        return If(cond, then, els, pos)

    def _parse_if_parts(self):
        self.expect("if")
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        then = self.parse_branch()
        els = None
        if self.at("else"):
            self.take()
            els = self.parse_branch()
        return cond, then, els

    def parse_branch(self) -> Block:
        """A branch is normalized to a Block even when written as one statement."""
        if self.at("{"):
            return self.parse_block()
        pos = self.pos()
        stmt = self.parse_statement()
        return Block([stmt], pos)

    def parse_block(self) -> Block:
        pos = self.pos()
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.at("}"):
            if self.at("eof"):
                raise self.error("unterminated block", {"}"})
            stmts.append(self.parse_statement())
        self.expect("}")
        return Block(stmts, pos)

    def parse_propose(self) -> Propose:
        pos = self.pos()
        self.expect("propose")
        self.expect("(")
        label_tok = self.expect("string")
        self.expect(")")
        body = self.parse_block()
        return Propose(label_tok.value, body, pos)

    def parse_timeout(self) -> TimeoutStmt:
        pos = self.pos()
        self.expect("timeout")
        self.expect("(")
        name_tok = self.expect("string")
        self.expect(",")
        delay = self.parse_expression()
        self.expect(")")
        body = self.parse_block()
        return TimeoutStmt(name_tok.value, delay, body, pos)

    # -- expressions ------------------------------------------------------------

    def parse_expression(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        expr = self.parse_and()
        while self.at("||"):
            pos = self.pos()
            self.take()
            expr = Binary("||", expr, self.parse_and(), pos)
        return expr

    def parse_and(self) -> Expr:
        expr = self.parse_equality()
        while self.at("&&"):
            pos = self.pos()
            self.take()
            expr = Binary("&&", expr, self.parse_equality(), pos)
        return expr

    def parse_equality(self) -> Expr:
        expr = self.parse_relational()
        while self.peek().kind in ("==", "!="):
            pos = self.pos()
            op = self.take().kind
            expr = Binary(op, expr, self.parse_relational(), pos)
        return expr

    def parse_relational(self) -> Expr:
        expr = self.parse_additive()
        while self.peek().kind in ("<=", ">=", "<", ">"):
            pos = self.pos()
            op = self.take().kind
            expr = Binary(op, expr, self.parse_additive(), pos)
        return expr

    def parse_additive(self) -> Expr:
        expr = self.parse_multiplicative()
        while self.peek().kind in ("+", "-"):
            pos = self.pos()
            op = self.take().kind
            expr = Binary(op, expr, self.parse_multiplicative(), pos)
        return expr

    def parse_multiplicative(self) -> Expr:
        expr = self.parse_unary()
        while self.peek().kind in ("*", "/", "%"):
            pos = self.pos()
            op = self.take().kind
            expr = Binary(op, expr, self.parse_unary(), pos)
        return expr

    def parse_unary(self) -> Expr:
        if self.peek().kind in ("!", "-"):
            pos = self.pos()
            op = self.take().kind
            return Unary(op, self.parse_unary(), pos)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while self.at("."):
            pos = self.pos()
            self.take()
            prop = self.expect("ident").text
            expr = FieldAccess(expr, prop, pos)
        return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        pos = self.pos()
        if tok.kind == "int":
            self.take()
            return IntLit(tok.value, pos)
        if tok.kind == "decimal":
            self.take()
            return DecimalLit(tok.value, pos)
        if tok.kind in ("true", "false"):
            self.take()
            return BoolLit(tok.value, pos)
        if tok.kind == "string":
            self.take()
            return StrLit(tok.value, pos)
        if tok.kind == "istring":
            self.take()
            return InterpStr(self._interp_segments(tok), pos)
        if tok.kind == "new":
            self.take()
            cls = self.expect("ident").text
            return New(cls, pos)
        if tok.kind == "#":
            return self.parse_da_literal()
        if tok.kind == "(":
            self.take()
            expr = self.parse_expression()
            self.expect(")")
            return expr
        if tok.kind == "ident":
            self.take()
            if self.at("("):
                self.take()
                args: list[Expr] = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expression())
                        if self.at(","):
                            self.take()
                            continue
                        break
                self.expect(")")
                return Call(tok.text, args, pos)
            return Var(tok.text, pos)
        raise self.error(
            f"unexpected {describe(tok)} in expression",
            {"int", "decimal", "string", "ident", "(", "#", "new", "!", "-"},
        )

    def _interp_segments(self, tok: Token) -> list:
        segments: list = []
        for kind, payload in tok.value:  # type: ignore[union-attr]
            if kind == "text":
                segments.append(payload)
            else:
                sub = Parser(payload)
                expr = sub.parse_expression()
                if not sub.at("eof"):
                    raise sub.error("unexpected trailing text in interpolation")
                segments.append(expr)
        return segments

    # -- dialogue-act literals -----------------------------------------------

    def parse_da_literal(self) -> DALit:
        pos = self.pos()
        self.expect("#")
        token = self.expect("ident").text
        frame: str | None = None
        args: list[DAArg] = []
        if self.at("("):
            self.take()
            first = True
            while not self.at(")"):
                if not first:
                    self.expect(",")
                if first and self.at("ident") and not self.at("=", 1):
                    frame = self.take().text
                else:
                    args.append(self.parse_da_arg())
                first = False
            self.expect(")")
        return DALit(token, frame, args, pos)

    def parse_da_arg(self) -> DAArg:
        pos = self.pos()
        key = self.expect("ident").text
        self.expect("=")
        tok = self.peek()
        if tok.kind == "{":
            self.take()
            expr = self.parse_expression()
            self.expect("}")
            return DAArg(key, "expr", expr, pos)
        if tok.kind == "string":
            self.take()
            return DAArg(key, "string", tok.value, pos)
        if tok.kind == "istring":
            self.take()
            return DAArg(key, "expr", InterpStr(self._interp_segments(tok), pos), pos)
        if tok.kind in ("ident", "int", "decimal", "true", "false"):
            self.take()
            return DAArg(key, "bare", tok.text, pos)
        if tok.kind == "-" and self.peek(1).kind in ("int", "decimal"):
            self.take()
            num = self.take()
            return DAArg(key, "bare", "-" + num.text, pos)
        raise self.error(
            "dialogue-act argument values are words, literals or {expressions}",
            {"ident", "string", "{"},
        )


def describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    return f"'{tok.text}'"


def parse_module(text: str, name: str = "main") -> Module:
    """Parse one source file into a Module AST."""
    return Parser(tokenize(text)).parse_module(name)


def parse_expression(text: str) -> Expr:
    parser = Parser(tokenize(text))
    expr = parser.parse_expression()
    if not parser.at("eof"):
        raise parser.error("unexpected trailing text after expression")
    return expr
