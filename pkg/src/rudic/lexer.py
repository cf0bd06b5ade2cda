"""Tokenizer for the rule language (C-like surface, `.rudi` files)."""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = {
    "if",
    "else",
    "new",
    "true",
    "false",
    "import",
    "propose",
    "timeout",
    "return",
}

# longest first so that e.g. "<=" wins over "<"
OPERATORS = [
    "||",
    "&&",
    "==",
    "!=",
    "<=",
    ">=",
    "<",
    ">",
    "=",
    "!",
    "+",
    "-",
    "*",
    "/",
    "%",
    "(",
    ")",
    "{",
    "}",
    ",",
    ";",
    ":",
    ".",
    "#",
]

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\", "{": "{", "}": "}"}


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # "ident" | "int" | "decimal" | "string" | "istring" | "eof" | literal text
    text: str
    value: object
    line: int
    col: int

    def __repr__(self) -> str:
        return f"Token({self.kind!r}, {self.text!r}, {self.line}:{self.col})"


class _Scanner:
    def __init__(self, text: str, line: int, col: int):
        self.text = text
        self.pos = 0
        self.line = line
        self.col = col

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def take(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def error(self, msg: str) -> LexError:
        return LexError(msg, self.line, self.col)


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    """Lex source text into tokens; interpolated strings carry sub-tokens."""
    sc = _Scanner(text, line, col)
    out: list[Token] = []
    while True:
        _skip_trivia(sc)
        if sc.at_end():
            out.append(Token("eof", "", None, sc.line, sc.col))
            return out
        start_line, start_col = sc.line, sc.col
        ch = sc.peek()
        if ch == '"':
            out.append(_lex_string(sc, start_line, start_col))
            continue
        if ch.isdigit():
            out.append(_lex_number(sc, start_line, start_col))
            continue
        if ch.isalpha() or ch == "_":
            word = _lex_word(sc)
            kind = word if word in KEYWORDS else "ident"
            value = (word == "true") if word in ("true", "false") else word
            out.append(Token(kind, word, value, start_line, start_col))
            continue
        for op in OPERATORS:
            if sc.text.startswith(op, sc.pos):
                for _ in op:
                    sc.take()
                out.append(Token(op, op, op, start_line, start_col))
                break
        else:
            raise sc.error(f"unexpected character {ch!r}")


def _skip_trivia(sc: _Scanner) -> None:
    while not sc.at_end():
        ch = sc.peek()
        if ch in " \t\r\n":
            sc.take()
        elif ch == "/" and sc.peek(1) == "/":
            while not sc.at_end() and sc.peek() != "\n":
                sc.take()
        elif ch == "/" and sc.peek(1) == "*":
            open_line, open_col = sc.line, sc.col
            sc.take()
            sc.take()
            while True:
                if sc.at_end():
                    raise LexError("unterminated block comment", open_line, open_col)
                if sc.peek() == "*" and sc.peek(1) == "/":
                    sc.take()
                    sc.take()
                    break
                sc.take()
        else:
            return


def _lex_word(sc: _Scanner) -> str:
    chars = []
    while not sc.at_end() and (sc.peek().isalnum() or sc.peek() == "_"):
        chars.append(sc.take())
    return "".join(chars)


def _lex_number(sc: _Scanner, line: int, col: int) -> Token:
    digits = []
    while not sc.at_end() and sc.peek().isdigit():
        digits.append(sc.take())
    if sc.peek() == "." and sc.peek(1).isdigit():
        digits.append(sc.take())
        while not sc.at_end() and sc.peek().isdigit():
            digits.append(sc.take())
        text = "".join(digits)
        return Token("decimal", text, float(text), line, col)
    text = "".join(digits)
    return Token("int", text, int(text), line, col)


def _lex_string(sc: _Scanner, line: int, col: int) -> Token:
    """Lex a string literal; `{expr}` sections become token sublists.

    Returns a plain "string" token when no interpolation occurs, otherwise
    an "istring" token whose value is a list of ("text", str) and
    ("expr", [Token...]) segments.
    """
    sc.take()  # opening quote
    segments: list[tuple[str, object]] = []
    cur: list[str] = []
    raw: list[str] = ['"']
    while True:
        if sc.at_end() or sc.peek() == "\n":
            raise LexError("unterminated string literal", line, col)
        ch = sc.peek()
        if ch == '"':
            sc.take()
            raw.append('"')
            break
        if ch == "\\":
            sc.take()
            if sc.at_end():
                raise LexError("unterminated string literal", line, col)
            esc = sc.take()
            if esc not in _ESCAPES:
                raise LexError(f"unsupported escape '\\{esc}'", sc.line, sc.col)
            cur.append(_ESCAPES[esc])
            raw.append("\\" + esc)
            continue
        if ch == "{":
            if cur:
                segments.append(("text", "".join(cur)))
                cur = []
            sc.take()
            raw.append("{")
            expr_line, expr_col = sc.line, sc.col
            expr_text = _scan_balanced(sc, line, col)
            raw.append(expr_text + "}")
            sub = tokenize(expr_text, expr_line, expr_col)
            segments.append(("expr", sub))
            continue
        cur.append(sc.take())
        raw.append(ch)
    if cur:
        segments.append(("text", "".join(cur)))
    text = "".join(raw)
    if not any(kind == "expr" for kind, _ in segments):
        literal = "".join(payload for _, payload in segments)  # type: ignore[misc]
        return Token("string", text, literal, line, col)
    return Token("istring", text, segments, line, col)


def _scan_balanced(sc: _Scanner, line: int, col: int) -> str:
    """Consume up to the matching '}', skipping over nested string literals."""
    depth = 1
    chars: list[str] = []
    in_string = False
    while True:
        if sc.at_end():
            raise LexError("unterminated interpolation in string literal", line, col)
        ch = sc.take()
        if in_string:
            chars.append(ch)
            if ch == "\\":
                if sc.at_end():
                    raise LexError("unterminated string literal", line, col)
                chars.append(sc.take())
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return "".join(chars)
        chars.append(ch)
