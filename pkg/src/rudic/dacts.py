"""Dialogue acts: construction, subsumption, wire format and history search.

A dialogue act is a token (from the dialogue-act class hierarchy), an
optional frame, and flat key->string arguments.  Argument values are
always strings: the `{expr}` form in source inserts the evaluated value
into the literal, so the textual form `#Token(Frame, k=v, ...)` is both
the in-memory canonical form and the wire/transcript format.

History entries are reified as facts on the current session resource
(`rudi:emitted` / `rudi:received` hold the textual form), so history
search is plain store querying.
"""

from __future__ import annotations

import re
from copy import deepcopy
from dataclasses import dataclass, field

from .lexer import tokenize
from .parser import Parser, RudiSyntaxError
from .store import (
    EMITTED_PROP,
    RECEIVED_PROP,
    SESSION_CLASS,
    OntologySchema,
    Resource,
    Timestamp,
    TupleStore,
    Value,
)

EMITTED = "emitted"
RECEIVED = "received"


@dataclass
class DialogueAct:
    token_iri: str  # resolved class iri; a bare name when unresolvable
    token_name: str
    frame_iri: str | None = None
    frame_name: str | None = None
    args: dict = field(default_factory=dict)  # key -> str, insertion-ordered

    def format(self) -> str:
        return format_da(self)

    def copy(self) -> "DialogueAct":
        return deepcopy(self)


@dataclass(frozen=True)
class HistoryEntry:
    da: DialogueAct
    direction: str  # EMITTED | RECEIVED
    t: int
    session: str  # session resource iri


def value_to_string(v: Value) -> str:
    """Canonical stringification used for DA arguments and interpolation."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Resource):
        return v.local_name()
    if isinstance(v, Timestamp):
        return str(v.ms)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return v
    return str(v)


_BARE_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|-?[0-9]+(\.[0-9]+)?")


def _format_arg_value(v: str) -> str:
    if _BARE_RE.fullmatch(v):
        return v
    escaped = v.replace("\\", "\\\\").replace('"', '\\"')
    escaped = escaped.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    escaped = escaped.replace("{", "\\{").replace("}", "\\}")
    return f'"{escaped}"'


def format_da(da: DialogueAct) -> str:
    parts = []
    if da.frame_name is not None:
        parts.append(da.frame_name)
    for key, value in da.args.items():
        parts.append(f"{key}={_format_arg_value(value)}")
    if not parts:
        return f"#{da.token_name}"
    return f"#{da.token_name}({', '.join(parts)})"


class DAParseError(Exception):
    pass


def parse_da(text: str, schema: OntologySchema | None = None) -> DialogueAct:
    """Parse the textual wire form. Expression arguments are not allowed."""
    try:
        parser = Parser(tokenize(text.strip()))
        lit = parser.parse_da_literal()
        if not parser.at("eof"):
            raise DAParseError(f"trailing text after dialogue act: {text!r}")
    except RudiSyntaxError as exc:
        raise DAParseError(str(exc)) from None
    args: dict[str, str] = {}
    for arg in lit.args:
        if arg.kind == "expr":
            raise DAParseError("the dialogue-act wire format cannot contain expressions")
        args[arg.key] = str(arg.value)
    return make_da(lit.token, lit.frame, args, schema)


def make_da(
    token_name: str,
    frame_name: str | None,
    args: dict,
    schema: OntologySchema | None = None,
) -> DialogueAct:
    token_iri = token_name
    frame_iri = frame_name
    if schema is not None:
        cls = schema.class_by_local_name(token_name, within=schema.da_tokens())
        if cls is not None:
            token_iri = cls.iri
        if frame_name is not None:
            fcls = schema.class_by_local_name(frame_name, within=schema.frames())
            if fcls is not None:
                frame_iri = fcls.iri
    return DialogueAct(token_iri, token_name, frame_iri, frame_name, dict(args))


def _class_le(sub_iri: str, sup_iri: str, schema: OntologySchema | None) -> bool:
    if (
        schema is not None
        and sub_iri in schema.classes
        and sup_iri in schema.classes
    ):
        return schema.is_subclass_of(Resource(sub_iri), Resource(sup_iri))
    return sub_iri == sup_iri


def subsumes(general: DialogueAct, specific: DialogueAct, schema: OntologySchema | None = None) -> bool:
    """True iff ``general`` matches ``specific`` (more general side first).

    token(specific) must be a subclass of token(general); a frame on the
    general side must be matched by a subclass frame; every argument of the
    general side must appear with an equal value on the specific side.
    """
    if not _class_le(specific.token_iri, general.token_iri, schema):
        return False
    if general.frame_iri is not None:
        if specific.frame_iri is None:
            return False
        if not _class_le(specific.frame_iri, general.frame_iri, schema):
            return False
    return all(key in specific.args and specific.args[key] == v for key, v in general.args.items())


def mutually_subsumes(a: DialogueAct, b: DialogueAct, schema: OntologySchema | None = None) -> bool:
    return subsumes(a, b, schema) and subsumes(b, a, schema)


class InteractionHistory:
    """Session-scoped record of emitted/received dialogue acts.

    Entries live in the store as facts on the session resource, so the
    full history (including past sessions) survives snapshot round trips.
    """

    def __init__(self, store: TupleStore):
        self.store = store
        self.session: Resource | None = None

    def begin_session(self) -> Resource:
        self.session = self.store.create_instance(SESSION_CLASS)
        return self.session

    def _require_session(self) -> Resource:
        if self.session is None:
            self.begin_session()
        return self.session  # type: ignore[return-value]

    def record(self, da: DialogueAct, direction: str) -> None:
        prop = EMITTED_PROP if direction == EMITTED else RECEIVED_PROP
        self.store.insert(self._require_session(), prop, format_da(da))

    def _search(self, pattern: DialogueAct, prop: Resource) -> bool:
        session = self._require_session()
        schema = self.store.schema
        for text, _t in self.store.history(session, prop):
            if isinstance(text, str) and subsumes(pattern, parse_da(text, schema), schema):
                return True
        return False

    def said_in_session(self, pattern: DialogueAct) -> bool:
        return self._search(pattern, EMITTED_PROP)

    def received_in_session(self, pattern: DialogueAct) -> bool:
        return self._search(pattern, RECEIVED_PROP)

    def entries(self, session: Resource | None = None) -> list[HistoryEntry]:
        """All history entries in insertion order, across sessions by default."""
        schema = self.store.schema
        out = []
        for fact in self.store.facts:
            if fact.p.iri == EMITTED_PROP.iri:
                direction = EMITTED
            elif fact.p.iri == RECEIVED_PROP.iri:
                direction = RECEIVED
            else:
                continue
            if session is not None and fact.s.iri != session.iri:
                continue
            if isinstance(fact.o, str):
                out.append(HistoryEntry(parse_da(fact.o, schema), direction, fact.t, fact.s.iri))
        return out
