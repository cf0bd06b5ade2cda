from pathlib import Path

import pytest

from rudic.lexer import LexError, tokenize
from rudic.parser import RudiSyntaxError, parse_expression, parse_module
from rudic.syntax import (
    Assign,
    Binary,
    Block,
    Call,
    DALit,
    FieldAccess,
    If,
    New,
    Propose,
    Rule,
    TimeoutStmt,
    Var,
    pretty,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

CORPUS_FILES = sorted(CORPUS.glob("*/*.rudi"))


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------


def kinds(text):
    return [t.kind for t in tokenize(text)][:-1]  # drop eof


def test_tokenize_comparison_chain():
    assert kinds("user.age <= 0") == ["ident", ".", "ident", "<=", "int"]


def test_tokenize_empty():
    toks = tokenize("")
    assert len(toks) == 1 and toks[0].kind == "eof"


def test_tokenize_comments_skipped():
    assert kinds("a // line\n/* block\n */ b") == ["ident", "ident"]


def test_tokenize_interpolated_string():
    toks = tokenize('"a{user.name}b"')
    assert toks[0].kind == "istring"
    segs = toks[0].value
    assert [k for k, _ in segs] == ["text", "expr", "text"]
    assert segs[0][1] == "a" and segs[2][1] == "b"
    assert [t.kind for t in segs[1][1]][:-1] == ["ident", ".", "ident"]


def test_tokenize_positions():
    toks = tokenize("a\n  bb")
    assert (toks[0].line, toks[0].col) == (1, 1)
    assert (toks[1].line, toks[1].col) == (2, 3)


def test_unterminated_string_reports_position():
    with pytest.raises(LexError) as exc:
        tokenize('x = "oops')
    assert exc.value.line == 1 and exc.value.col == 5


def test_unterminated_comment():
    with pytest.raises(LexError):
        tokenize("/* never closed")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def test_parse_greeting_agent_shape():
    text = (CORPUS / "greeting" / "agent.rudi").read_text()
    mod = parse_module(text, "agent")
    assert mod.imports == ["user_setup"]
    assert [r.label for r in mod.rules] == ["greeting"]
    rule = mod.rules[0]
    timeouts = [s for s in rule.then.stmts if isinstance(s, TimeoutStmt)]
    assert len(timeouts) == 1
    assert timeouts[0].name == "wait_for_greeting"
    assert timeouts[0].delay.value == 7000

    def collect_proposes(stmt, acc):
        for child in getattr(stmt, "stmts", []):
            collect_proposes(child, acc)
        for attr in ("then", "els", "body"):
            sub = getattr(stmt, attr, None)
            if sub is not None:
                collect_proposes(sub, acc)
        if isinstance(stmt, Propose):
            acc.append(stmt.label)
        return acc

    labels = []
    for s in rule.then.stmts:
        collect_proposes(s, labels)
    assert sorted(labels) == ["greet", "greet_back"]


def test_parse_age_default_module():
    text = (CORPUS / "age_default" / "age_default.rudi").read_text()
    mod = parse_module(text, "age_default")
    assigns = [s for s in mod.items if isinstance(s, Assign)]
    assert len(assigns) == 2
    assert isinstance(assigns[0].value, New)
    assert [r.label for r in mod.rules] == ["set_age"]


def test_missing_body_is_syntax_error():
    with pytest.raises(RudiSyntaxError):
        parse_module("r: if (x)", "m")


def test_unlabeled_top_level_if_rejected():
    with pytest.raises(RudiSyntaxError, match="label"):
        parse_module("if (x) { y = 1; }", "m")


def test_duplicate_rule_labels_rejected():
    text = "a: if (x) { y = 1; }\na: if (x) { y = 2; }\n"
    with pytest.raises(RudiSyntaxError, match="duplicate"):
        parse_module(text, "m")


def test_da_literal_forms():
    da = parse_expression("#Offer(Transporting, what=tool, to=workbench)")
    assert isinstance(da, DALit)
    assert da.token == "Offer" and da.frame == "Transporting"
    assert [(a.key, a.kind, a.value) for a in da.args] == [
        ("what", "bare", "tool"),
        ("to", "bare", "workbench"),
    ]
    bare = parse_expression("#Greeting")
    assert bare.frame is None and bare.args == []
    quoted = parse_expression('#Inform(name="Jo e")')
    assert quoted.args[0].kind == "string" and quoted.args[0].value == "Jo e"
    exprd = parse_expression("#Inform(name={user.name})")
    assert exprd.args[0].kind == "expr"
    assert isinstance(exprd.args[0].value, FieldAccess)


def test_operator_precedence():
    e = parse_expression("a || b && !c == 1 <= 2 + 3 * 4")
    assert isinstance(e, Binary) and e.op == "||"
    rhs = e.rhs
    assert rhs.op == "&&"
    eq = rhs.rhs
    assert eq.op == "=="
    assert isinstance(eq.lhs, type(parse_expression("!c")))
    rel = eq.rhs
    assert rel.op == "<="
    assert rel.rhs.op == "+"
    assert rel.rhs.rhs.op == "*"


def test_function_definition():
    mod = parse_module("string greet(Animate a) { return a.name; }", "m")
    fn = mod.functions[0]
    assert fn.name == "greet" and fn.ret_type == "string"
    assert [(p.type_name, p.name) for p in fn.params] == [("Animate", "a")]


def test_branches_normalized_to_blocks():
    mod = parse_module("r: if (x) y = 1; else y = 2;", "m")
    rule = mod.rules[0]
    assert isinstance(rule.then, Block) and isinstance(rule.els, Block)


def test_call_statement():
    mod = parse_module("r: if (x) { emitDA(#Greeting(Meeting)); }", "m")
    call = mod.rules[0].then.stmts[0].expr
    assert isinstance(call, Call) and call.name == "emitDA"


def test_every_node_has_position_inside_input():
    text = (CORPUS / "greeting" / "agent.rudi").read_text()
    mod = parse_module(text, "agent")
    n_lines = text.count("\n") + 1
    seen = []

    def walk(node):
        if hasattr(node, "pos"):
            seen.append(node.pos)
            assert 1 <= node.pos.line <= n_lines
            assert node.pos.col >= 1
        for f in getattr(node, "__dataclass_fields__", {}):
            v = getattr(node, f)
            if isinstance(v, list):
                for item in v:
                    if hasattr(item, "__dataclass_fields__"):
                        walk(item)
            elif hasattr(v, "__dataclass_fields__"):
                walk(v)

    walk(mod)
    assert len(seen) > 10


# ---------------------------------------------------------------------------
# round trip: pretty-print then reparse
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: f"{p.parent.name}/{p.name}")
def test_round_trip_corpus(path):
    mod = parse_module(path.read_text(), path.stem)
    printed = pretty(mod)
    reparsed = parse_module(printed, path.stem)
    assert reparsed == mod


@pytest.mark.parametrize(
    "snippet",
    [
        'r: if (a.b.c == 1 && !d) { x = "s{a.b}t"; } else { emitDA(#Inform(Statement, k=v)); }',
        "r: if ((a + 2) * 3 <= b % 4 - -c) { t = 1.5; }",
        'r: if (f(x, g классы) || true) { propose("p") { y = new Thing; } }'.replace(
            " классы", ""
        ),
        'r: if (x) { timeout("t", 30) { z = "{q}"; } }',
    ],
)
def test_round_trip_snippets(snippet):
    mod = parse_module(snippet, "m")
    assert parse_module(pretty(mod), "m") == mod


def test_parse_is_pure():
    text = (CORPUS / "greeting" / "agent.rudi").read_text()
    assert parse_module(text, "agent") == parse_module(text, "agent")
