"""In-memory temporal n-tuple store with RDFS-lite schema reasoning.

The store is the complete information state of an agent: every fact is a
``(subject, predicate, object, t)`` tuple where ``t`` is the transaction
time in logical milliseconds.  Facts are append-only; "overwriting" a
functional property just inserts a newer fact, and the latest view masks
the older ones.  A distinguished tombstone object marks a property as
cleared, after which the latest view reports it absent.

The schema side (classes, subclass edges, property specs) is loaded from a
line-oriented triple format documented in ``docs/ontology-format.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
RUDI_NS = "http://rudi-lang.org/core#"
DACT_NS = "http://rudi-lang.org/dacts#"
INST_NS = "http://rudi-lang.org/instances#"

BUILTIN_PREFIXES = {
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "xsd": XSD_NS,
    "rudi": RUDI_NS,
    "dact": DACT_NS,
    "inst": INST_NS,
}

XSD_KINDS = ("string", "int", "decimal", "boolean", "dateTime")


@dataclass(frozen=True, slots=True)
class Resource:
    """A named individual or class, identified by IRI."""

    iri: str

    def local_name(self) -> str:
        cut = max(self.iri.rfind("#"), self.iri.rfind("/"), self.iri.rfind(":"))
        return self.iri[cut + 1 :]

    def __repr__(self) -> str:
        return f"Resource({self.iri!r})"


@dataclass(frozen=True, slots=True)
class Timestamp:
    """A point in time, in milliseconds (xsd:dateTime range values)."""

    ms: int


# Object position of a fact: a resource or a typed literal.
Value = Resource | Timestamp | str | int | float | bool

# Distinguished object marking a property cleared at some time.
TOMBSTONE = Resource(RUDI_NS + "cleared")

RDF_TYPE = Resource(RDF_NS + "type")
RDFS_SUBCLASS = Resource(RDFS_NS + "subClassOf")
RDFS_DOMAIN = Resource(RDFS_NS + "domain")
RDFS_RANGE = Resource(RDFS_NS + "range")
RDFS_CLASS = Resource(RDFS_NS + "Class")
RDF_PROPERTY = Resource(RDF_NS + "Property")
RUDI_FUNCTIONAL = Resource(RUDI_NS + "functional")

# Core vocabulary: roots of the dialogue-act and frame hierarchies plus the
# session/history reification properties.
DIALOGUE_ACT_CLASS = Resource(RUDI_NS + "DialogueAct")
FRAME_CLASS = Resource(RUDI_NS + "Frame")
SESSION_CLASS = Resource(RUDI_NS + "Session")
EMITTED_PROP = Resource(RUDI_NS + "emitted")
RECEIVED_PROP = Resource(RUDI_NS + "received")


class StoreError(Exception):
    """Base class for schema and store violations."""


class OntologyParseError(StoreError):
    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class SchemaError(StoreError):
    pass


class UndeclaredError(StoreError):
    pass


class RangeViolation(StoreError):
    pass


@dataclass(frozen=True, slots=True)
class Fact:
    """One (subject, predicate, object, transaction-time) tuple."""

    s: Resource
    p: Resource
    o: Value
    t: int


@dataclass(frozen=True, slots=True)
class PropertySpec:
    prop: Resource
    domain: Resource
    range: Resource | str  # an ontology class, or an XSD kind name
    functional: bool = True


class OntologySchema:
    """Class hierarchy plus property specifications.

    ``instances`` collects the ABox assertions found in the source text; the
    store inserts them at t=0 when the schema is attached.
    """

    def __init__(self):
        self.prefixes: dict[str, str] = {}
        self.classes: dict[str, Resource] = {}
        self.subclass_edges: list[tuple[Resource, Resource]] = []
        self.properties: dict[str, PropertySpec] = {}
        self.instances: list[tuple[Resource, Resource, Value, int]] = []
        self.builtin_iris: set[str] = set()
        self._closure: dict[str, frozenset[str]] | None = None
        self._edge_set: set[tuple[str, str]] = set()

    def user_classes(self) -> set[str]:
        return {iri for iri in self.classes if iri not in self.builtin_iris}

    def user_properties(self) -> set[str]:
        return {iri for iri in self.properties if iri not in self.builtin_iris}

    # -- declaration ------------------------------------------------------

    def declare_class(self, c: Resource, builtin: bool = False) -> None:
        if c.iri not in self.classes:
            self.classes[c.iri] = c
            self._closure = None
        if builtin:
            self.builtin_iris.add(c.iri)

    def declare_subclass(self, sub: Resource, sup: Resource, builtin: bool = False) -> None:
        self.declare_class(sub, builtin)
        self.declare_class(sup, builtin)
        if (sub.iri, sup.iri) not in self._edge_set:
            self._edge_set.add((sub.iri, sup.iri))
            self.subclass_edges.append((sub, sup))
            self._closure = None
        if builtin:
            self.builtin_iris.add(sub.iri)

    def declare_property(self, spec: PropertySpec, builtin: bool = False) -> None:
        self.properties[spec.prop.iri] = spec
        if builtin:
            self.builtin_iris.add(spec.prop.iri)

    def has_class(self, c: Resource) -> bool:
        return c.iri in self.classes

    def property_spec(self, p: Resource) -> PropertySpec | None:
        return self.properties.get(p.iri)

    # -- reasoning --------------------------------------------------------

    def _superclasses(self, iri: str) -> frozenset[str]:
        """Reflexive-transitive superclass closure, memoized per class."""
        if self._closure is None:
            self._closure = {}
            self._adj = {}
            for sub, sup in self.subclass_edges:
                self._adj.setdefault(sub.iri, []).append(sup.iri)
        cached = self._closure.get(iri)
        if cached is not None:
            return cached
        seen = {iri}
        stack = [iri]
        while stack:
            cur = stack.pop()
            for sup_iri in self._adj.get(cur, ()):
                if sup_iri not in seen:
                    seen.add(sup_iri)
                    stack.append(sup_iri)
        result = frozenset(seen)
        self._closure[iri] = result
        return result

    def is_subclass_of(self, c1: Resource, c2: Resource) -> bool:
        """True iff c2 is reachable from c1 via subclass edges, or c1 = c2."""
        if c1.iri not in self.classes:
            raise UndeclaredError(f"undeclared class: {c1.iri}")
        if c2.iri not in self.classes:
            raise UndeclaredError(f"undeclared class: {c2.iri}")
        return c2.iri in self._superclasses(c1.iri)

    def da_tokens(self) -> set[str]:
        """Classes under the dialogue-act root (the root itself excluded)."""
        return {
            iri
            for iri in self.classes
            if iri != DIALOGUE_ACT_CLASS.iri
            and DIALOGUE_ACT_CLASS.iri in self._superclasses(iri)
        }

    def frames(self) -> set[str]:
        return {
            iri
            for iri in self.classes
            if iri != FRAME_CLASS.iri and FRAME_CLASS.iri in self._superclasses(iri)
        }

    def class_by_local_name(self, name: str, within: set[str] | None = None) -> Resource | None:
        """Resolve a bare class name; ``within`` restricts to an iri subset.

        Returns None when the name is unknown or ambiguous.
        """
        pool = within if within is not None else set(self.classes)
        hits = sorted(iri for iri in pool if Resource(iri).local_name() == name)
        if len(hits) == 1:
            return self.classes[hits[0]]
        # A builtin and a user class with the same local name: prefer the user one.
        user_hits = [h for h in hits if h not in self.builtin_iris]
        if len(user_hits) == 1:
            return self.classes[user_hits[0]]
        return None

    def check_acyclic(self) -> None:
        """Raise SchemaError when the subclass relation has a cycle."""
        for iri in self.classes:
            closure = self._superclasses(iri)
            for other in closure:
                if other != iri and iri in self._superclasses(other):
                    raise SchemaError(
                        f"cyclic subclass declaration between {iri} and {other}"
                    )

    def validate(self) -> None:
        self.check_acyclic()
        for spec in self.properties.values():
            if spec.domain.iri not in self.classes:
                raise SchemaError(
                    f"property {spec.prop.iri} has undeclared domain {spec.domain.iri}"
                )
            if isinstance(spec.range, Resource) and spec.range.iri not in self.classes:
                raise SchemaError(
                    f"property {spec.prop.iri} has undeclared range {spec.range.iri}"
                )

    # -- qname handling ----------------------------------------------------

    def all_prefixes(self) -> dict[str, str]:
        merged = dict(BUILTIN_PREFIXES)
        merged.update(self.prefixes)
        return merged

    def compact(self, iri: str) -> str:
        """Compact an IRI to a qname under the longest matching namespace."""
        best = None
        for prefix, ns in self.all_prefixes().items():
            if iri.startswith(ns) and (best is None or len(ns) > len(best[1])):
                local = iri[len(ns) :]
                if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", local or ""):
                    best = (prefix, ns, local)
        if best is None:
            return f"<{iri}>"
        return f"{best[0]}:{best[2]}"


def install_core_vocabulary(schema: OntologySchema) -> None:
    """Declare the runtime's own vocabulary (history reification, DA roots)."""
    for c in (DIALOGUE_ACT_CLASS, FRAME_CLASS, SESSION_CLASS):
        schema.declare_class(c, builtin=True)
    for prop in (EMITTED_PROP, RECEIVED_PROP):
        schema.declare_property(
            PropertySpec(prop, SESSION_CLASS, "string", functional=False),
            builtin=True,
        )


# A small dialogue-act taxonomy, enough for the shipped example agents.
DEFAULT_DACT_FRAGMENT = [
    ("InformationTransfer", "DialogueAct"),
    ("Inform", "InformationTransfer"),
    ("Answer", "Inform"),
    ("Question", "InformationTransfer"),
    ("SetQuestion", "Question"),
    ("PropositionalQuestion", "Question"),
    ("ActionDiscussion", "DialogueAct"),
    ("Offer", "ActionDiscussion"),
    ("Request", "ActionDiscussion"),
    ("Suggest", "ActionDiscussion"),
    ("Accept", "ActionDiscussion"),
    ("Decline", "ActionDiscussion"),
    ("SocialObligation", "DialogueAct"),
    ("Greeting", "SocialObligation"),
    ("InitialGreeting", "Greeting"),
    ("ReturnGreeting", "Greeting"),
    ("Goodbye", "SocialObligation"),
    ("Thanking", "SocialObligation"),
    ("Apology", "SocialObligation"),
]

DEFAULT_FRAMES = ["Meeting", "Transporting", "Statement", "Task"]


def install_default_dacts(schema: OntologySchema) -> None:
    for name, parent in DEFAULT_DACT_FRAGMENT:
        parent_res = (
            DIALOGUE_ACT_CLASS if parent == "DialogueAct" else Resource(DACT_NS + parent)
        )
        schema.declare_subclass(Resource(DACT_NS + name), parent_res, builtin=True)
    for name in DEFAULT_FRAMES:
        schema.declare_subclass(Resource(DACT_NS + name), FRAME_CLASS, builtin=True)


# ---------------------------------------------------------------------------
# Triple format parsing (strict line-oriented N-Triples subset with prefixes)
# ---------------------------------------------------------------------------

_QNAME_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_.-]*)?:([A-Za-z_][A-Za-z0-9_.-]*)")
_INT_RE = re.compile(r"[+-]?[0-9]+")
_DECIMAL_RE = re.compile(r"[+-]?[0-9]+\.[0-9]+")


class _TripleLineParser:
    def __init__(self, text: str, line_no: int, prefixes: dict[str, str]):
        self.text = text
        self.pos = 0
        self.line_no = line_no
        self.prefixes = prefixes

    def error(self, msg: str) -> OntologyParseError:
        return OntologyParseError(msg, self.line_no, self.pos + 1)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def expect_dot(self) -> None:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ".":
            raise self.error("expected '.' terminating the statement")
        self.pos += 1
        if not self.at_end():
            raise self.error("unexpected text after '.'")

    def parse_resource(self) -> Resource:
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == "<":
            end = self.text.find(">", self.pos)
            if end < 0:
                raise self.error("unterminated IRI")
            iri = self.text[self.pos + 1 : end]
            self.pos = end + 1
            return Resource(iri)
        m = _QNAME_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected an IRI or prefixed name")
        prefix = m.group(1) or ""
        ns = self.prefixes.get(prefix)
        if ns is None:
            raise self.error(f"undeclared prefix '{prefix}:'")
        self.pos = m.end()
        return Resource(ns + m.group(2))

    def parse_string(self) -> str:
        # opening quote already seen
        out = []
        i = self.pos + 1
        while i < len(self.text):
            ch = self.text[i]
            if ch == "\\":
                if i + 1 >= len(self.text):
                    raise self.error("dangling escape in string literal")
                esc = self.text[i + 1]
                mapped = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}.get(esc)
                if mapped is None:
                    raise self.error(f"unsupported escape '\\{esc}'")
                out.append(mapped)
                i += 2
            elif ch == '"':
                self.pos = i + 1
                return "".join(out)
            else:
                out.append(ch)
                i += 1
        raise self.error("unterminated string literal")

    def parse_object(self) -> Value:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("missing object")
        ch = self.text[self.pos]
        if ch == '"':
            s = self.parse_string()
            if self.text.startswith("^^", self.pos):
                self.pos += 2
                kind = self.parse_resource()
                return _typed_literal(s, kind, self)
            return s
        if ch == "<":
            return self.parse_resource()
        m = _DECIMAL_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return float(m.group())
        m = _INT_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return int(m.group())
        if self.text.startswith("true", self.pos):
            self.pos += 4
            return True
        if self.text.startswith("false", self.pos):
            self.pos += 5
            return False
        return self.parse_resource()

    def parse_int(self) -> int:
        self.skip_ws()
        m = _INT_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected an integer")
        self.pos = m.end()
        return int(m.group())


def _typed_literal(lexical: str, kind: Resource, parser: _TripleLineParser) -> Value:
    if not kind.iri.startswith(XSD_NS):
        raise parser.error(f"unsupported literal datatype {kind.iri}")
    name = kind.iri[len(XSD_NS) :]
    try:
        if name == "int":
            return int(lexical)
        if name == "decimal":
            return float(lexical)
        if name == "boolean":
            return lexical == "true"
        if name == "string":
            return lexical
        if name == "dateTime":
            return Timestamp(int(lexical))
    except ValueError:
        raise parser.error(f"malformed xsd:{name} literal: {lexical!r}") from None
    raise parser.error(f"unsupported XSD datatype xsd:{name}")


def _xsd_kind_of(range_res: Resource) -> str | None:
    if range_res.iri.startswith(XSD_NS):
        name = range_res.iri[len(XSD_NS) :]
        if name in XSD_KINDS:
            return name
    return None


def load_ontology(source: str) -> OntologySchema:
    """Parse ontology text into a schema; ABox rows land in schema.instances.

    Two passes: statements are collected first so declaration order does not
    matter, then the schema is assembled and validated (acyclicity, property
    domains/ranges).  The core runtime vocabulary is implicitly present, the
    same way the builtin prefixes are.
    """
    schema = OntologySchema()
    install_core_vocabulary(schema)
    prefixes = dict(BUILTIN_PREFIXES)
    statements: list[tuple[int, Resource, Resource, Value, int | None]] = []

    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parser = _TripleLineParser(raw.rstrip(), line_no, prefixes)
        parser.skip_ws()
        if parser.text.startswith("@prefix", parser.pos):
            parser.pos += len("@prefix")
            parser.skip_ws()
            m = re.match(r"([A-Za-z_][A-Za-z0-9_.-]*)?:", parser.text[parser.pos :])
            if not m:
                raise parser.error("malformed @prefix declaration")
            name = m.group(1) or ""
            parser.pos += m.end()
            parser.skip_ws()
            if parser.pos >= len(parser.text) or parser.text[parser.pos] != "<":
                raise parser.error("expected <namespace> in @prefix")
            ns_res = parser.parse_resource()
            parser.expect_dot()
            prefixes[name] = ns_res.iri
            if name not in BUILTIN_PREFIXES:
                schema.prefixes[name] = ns_res.iri
            continue
        s = parser.parse_resource()
        p = parser.parse_resource()
        o = parser.parse_object()
        parser.skip_ws()
        t: int | None = None
        if parser.pos < len(parser.text) and parser.text[parser.pos] not in ".":
            t = parser.parse_int()
        parser.expect_dot()
        statements.append((line_no, s, p, o, t))

    # Pass 1: class and property declarations.
    functional_overrides: dict[str, tuple[int, bool]] = {}
    domains: dict[str, tuple[int, Resource]] = {}
    ranges: dict[str, tuple[int, Value]] = {}
    declared_props: set[str] = set()
    for line_no, s, p, o, _t in statements:
        if p.iri == RDF_TYPE.iri and isinstance(o, Resource) and o.iri == RDFS_CLASS.iri:
            schema.declare_class(s)
        elif p.iri == RDFS_SUBCLASS.iri:
            if not isinstance(o, Resource):
                raise OntologyParseError("subClassOf object must be a class", line_no)
            schema.declare_subclass(s, o)
        elif p.iri == RDF_TYPE.iri and isinstance(o, Resource) and o.iri == RDF_PROPERTY.iri:
            declared_props.add(s.iri)
        elif p.iri == RDFS_DOMAIN.iri:
            if not isinstance(o, Resource):
                raise OntologyParseError("domain must be a class", line_no)
            domains[s.iri] = (line_no, o)
            declared_props.add(s.iri)
        elif p.iri == RDFS_RANGE.iri:
            if not isinstance(o, Resource):
                raise OntologyParseError("range must be a class or XSD type", line_no)
            ranges[s.iri] = (line_no, o)
            declared_props.add(s.iri)
        elif p.iri == RUDI_FUNCTIONAL.iri:
            if not isinstance(o, bool):
                raise OntologyParseError("functional annotation must be true or false", line_no)
            functional_overrides[s.iri] = (line_no, o)
            declared_props.add(s.iri)

    for prop_iri in sorted(declared_props):
        if prop_iri not in domains:
            raise SchemaError(f"property {prop_iri} declared without a domain")
        if prop_iri not in ranges:
            raise SchemaError(f"property {prop_iri} declared without a range")
        _line, domain = domains[prop_iri]
        _line, range_res = ranges[prop_iri]
        assert isinstance(range_res, Resource)
        xsd_kind = _xsd_kind_of(range_res)
        functional = functional_overrides.get(prop_iri, (0, True))[1]
        schema.declare_property(
            PropertySpec(
                Resource(prop_iri),
                domain,
                xsd_kind if xsd_kind is not None else range_res,
                functional,
            )
        )

    schema.validate()

    # Pass 2: ABox assertions (instance typing and property values).
    schema_preds = {
        RDFS_SUBCLASS.iri,
        RDFS_DOMAIN.iri,
        RDFS_RANGE.iri,
        RUDI_FUNCTIONAL.iri,
    }
    for line_no, s, p, o, t in statements:
        if p.iri in schema_preds:
            continue
        if p.iri == RDF_TYPE.iri:
            if not isinstance(o, Resource):
                raise OntologyParseError("rdf:type object must be a class", line_no)
            if o.iri in (RDFS_CLASS.iri, RDF_PROPERTY.iri):
                continue
            if o.iri not in schema.classes:
                raise OntologyParseError(f"rdf:type object {o.iri} is not a declared class", line_no)
            schema.instances.append((s, RDF_TYPE, o, t if t is not None else 0))
            continue
        if p.iri not in schema.properties:
            raise OntologyParseError(f"undeclared predicate {p.iri}", line_no)
        schema.instances.append((s, p, o, t if t is not None else 0))

    return schema


def parse_term(text: str, prefixes: dict[str, str]) -> Value:
    """Parse one term in triple-object syntax (qname, literal, <iri>)."""
    parser = _TripleLineParser(text.strip(), 1, prefixes)
    v = parser.parse_object()
    if not parser.at_end():
        raise parser.error("unexpected trailing text after term")
    return v


def _format_value(v: Value, schema: OntologySchema) -> str:
    if isinstance(v, Resource):
        return schema.compact(v.iri)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Timestamp):
        return f'"{v.ms}"^^xsd:dateTime'
    escaped = v.replace("\\", "\\\\").replace('"', '\\"')
    escaped = escaped.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{escaped}"'


def dump_schema(schema: OntologySchema) -> list[str]:
    """Canonical TBox lines, builtin vocabulary excluded."""
    lines = []
    for prefix in sorted(schema.prefixes):
        lines.append(f"@prefix {prefix}: <{schema.prefixes[prefix]}> .")
    own_classes = sorted(c for c in schema.classes if c not in schema.builtin_iris)
    subclassed = {sub.iri for sub, _ in schema.subclass_edges}
    for iri in own_classes:
        if iri not in subclassed:
            lines.append(f"{schema.compact(iri)} rdf:type rdfs:Class .")
    for sub, sup in sorted(schema.subclass_edges, key=lambda e: (e[0].iri, e[1].iri)):
        if sub.iri in schema.builtin_iris:
            continue
        lines.append(f"{schema.compact(sub.iri)} rdfs:subClassOf {schema.compact(sup.iri)} .")
    for prop_iri in sorted(schema.properties):
        if prop_iri in schema.builtin_iris:
            continue
        spec = schema.properties[prop_iri]
        name = schema.compact(prop_iri)
        lines.append(f"{name} rdfs:domain {schema.compact(spec.domain.iri)} .")
        if isinstance(spec.range, Resource):
            range_txt = schema.compact(spec.range.iri)
        else:
            range_txt = f"xsd:{spec.range}"
        lines.append(f"{name} rdfs:range {range_txt} .")
        lines.append(f"{name} rudi:functional {'true' if spec.functional else 'false'} .")
    return lines


def dump_ontology(schema: OntologySchema) -> str:
    """Canonical text form; load(dump(load(x))) equals load(x) exactly."""
    lines = dump_schema(schema)
    for s, p, o, _t in schema.instances:
        lines.append(
            f"{schema.compact(s.iri)} {schema.compact(p.iri)} {_format_value(o, schema)} ."
        )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# The store itself
# ---------------------------------------------------------------------------


class TupleStore:
    """Append-only fact log with a latest-value view and history queries.

    All mutation happens on the engine's event thread; ``snapshot_view``
    hands read-only copies to other threads.
    """

    def __init__(self, clock=None, builtin_dacts: bool = True):
        self.schema = OntologySchema()
        install_core_vocabulary(self.schema)
        if builtin_dacts:
            install_default_dacts(self.schema)
        self._builtin_dacts = builtin_dacts
        self.facts: list[Fact] = []
        self._by_sp: dict[tuple[str, str], list[int]] = {}
        self._subjects: set[str] = set()
        self._instance_counters: dict[str, int] = {}
        self._last_t = -1
        self.clock = clock if clock is not None else (lambda: 0)

    # -- schema -----------------------------------------------------------

    def load_ontology(self, source: str) -> OntologySchema:
        """Merge ontology text into the schema; ABox facts land at t=0."""
        loaded = load_ontology(source)
        self.schema.prefixes.update(loaded.prefixes)
        for c in loaded.classes.values():
            if c.iri not in loaded.builtin_iris:
                self.schema.declare_class(c)
        for sub, sup in loaded.subclass_edges:
            self.schema.declare_subclass(sub, sup)
        for spec in loaded.properties.values():
            if spec.prop.iri not in loaded.builtin_iris:
                self.schema.declare_property(spec)
        self.schema.validate()
        for s, p, o, t in loaded.instances:
            self._append(Fact(s, p, self._coerce(p, o), t))
        return self.schema

    # -- low-level insertion ------------------------------------------------

    def _append(self, fact: Fact) -> None:
        idx = len(self.facts)
        self.facts.append(fact)
        self._by_sp.setdefault((fact.s.iri, fact.p.iri), []).append(idx)
        self._subjects.add(fact.s.iri)
        self._last_t = max(self._last_t, fact.t)

    def _coerce(self, p: Resource, o: Value) -> Value:
        if isinstance(o, Resource) and o.iri == TOMBSTONE.iri:
            return o
        if p.iri == RDF_TYPE.iri:
            if not isinstance(o, Resource) or o.iri not in self.schema.classes:
                raise RangeViolation(f"rdf:type object must be a declared class, got {o!r}")
            return o
        spec = self.schema.property_spec(p)
        if spec is None:
            raise UndeclaredError(f"undeclared predicate: {p.iri}")
        r = spec.range
        if isinstance(r, Resource):
            if not isinstance(o, Resource):
                raise RangeViolation(
                    f"{p.iri} expects an individual of {r.iri}, got {o!r}"
                )
            asserted = self.asserted_types(o)
            if asserted and not any(
                self.schema.is_subclass_of(tau, r) for tau in asserted
            ):
                raise RangeViolation(f"{o.iri} is not an instance of {r.iri}")
            return o
        if r == "int":
            if isinstance(o, bool) or not isinstance(o, int):
                raise RangeViolation(f"{p.iri} expects xsd:int, got {o!r}")
            return o
        if r == "decimal":
            if isinstance(o, bool) or not isinstance(o, (int, float)):
                raise RangeViolation(f"{p.iri} expects xsd:decimal, got {o!r}")
            return float(o)
        if r == "boolean":
            if not isinstance(o, bool):
                raise RangeViolation(f"{p.iri} expects xsd:boolean, got {o!r}")
            return o
        if r == "string":
            if not isinstance(o, str):
                raise RangeViolation(f"{p.iri} expects xsd:string, got {o!r}")
            return o
        if r == "dateTime":
            if isinstance(o, Timestamp):
                return o
            if isinstance(o, int) and not isinstance(o, bool):
                return Timestamp(o)
            raise RangeViolation(f"{p.iri} expects xsd:dateTime, got {o!r}")
        raise SchemaError(f"property {p.iri} has unsupported range {r!r}")

    def _fresh_t(self) -> int:
        now = int(self.clock())
        return max(now, self._last_t + 1)

    # -- operations ---------------------------------------------------------

    def insert(self, s: Resource, p: Resource, o: Value) -> Fact:
        """Append a fact with a fresh transaction time; never overwrites."""
        fact = Fact(s, p, self._coerce(p, o), self._fresh_t())
        self._append(fact)
        return fact

    def retract(self, s: Resource, p: Resource) -> Fact:
        """Clear a property: latest_value reports absent afterwards."""
        if p.iri != RDF_TYPE.iri and self.schema.property_spec(p) is None:
            raise UndeclaredError(f"undeclared predicate: {p.iri}")
        fact = Fact(s, p, TOMBSTONE, self._fresh_t())
        self._append(fact)
        return fact

    def latest_value(self, s: Resource, p: Resource):
        """Latest view of (s, p).

        Functional property: the object of the newest fact, or None when
        there is none or the property was cleared.  Non-functional: the list
        of objects asserted after the most recent clearing, ordered by their
        latest assertion.
        """
        rows = self._by_sp.get((s.iri, p.iri), [])
        spec = self.schema.property_spec(p)
        functional = spec.functional if spec is not None else p.iri != RDF_TYPE.iri
        if functional:
            if not rows:
                return None
            o = self.facts[rows[-1]].o
            return None if _is_tombstone(o) else o
        last_by_obj: dict[Value, int] = {}
        last_clear = -1
        for idx in rows:
            o = self.facts[idx].o
            if _is_tombstone(o):
                last_clear = idx
                last_by_obj.clear()
            else:
                last_by_obj.pop(o, None)
                last_by_obj[o] = idx
        return [o for o, idx in last_by_obj.items() if idx > last_clear]

    def history(self, s: Resource, p: Resource) -> list[tuple[Value, int]]:
        """All facts for (s, p) in insertion order, tombstones included."""
        return [
            (self.facts[i].o, self.facts[i].t) for i in self._by_sp.get((s.iri, p.iri), [])
        ]

    def query(
        self,
        pattern: tuple,
        time_window: tuple[int, int] | None = None,
    ) -> list[dict[str, Value]]:
        """Match a (s, p, o) pattern against the full fact history.

        Pattern slots are concrete values or variables ("?name"; "?" or None
        is an anonymous wildcard).  Each matching fact yields one binding
        row; duplicate rows collapse.  ``time_window`` is inclusive.
        """
        s_pat, p_pat, o_pat = pattern
        if (
            not _is_var(s_pat)
            and not _is_var(p_pat)
            and isinstance(s_pat, Resource)
            and isinstance(p_pat, Resource)
        ):
            candidates = (self.facts[i] for i in self._by_sp.get((s_pat.iri, p_pat.iri), []))
        else:
            candidates = iter(self.facts)
        out: list[dict[str, Value]] = []
        seen: set[tuple] = set()
        for fact in candidates:
            if time_window is not None and not (time_window[0] <= fact.t <= time_window[1]):
                continue
            binding: dict[str, Value] = {}
            if not _match_slot(s_pat, fact.s, binding):
                continue
            if not _match_slot(p_pat, fact.p, binding):
                continue
            if not _match_slot(o_pat, fact.o, binding):
                continue
            key = tuple(sorted(binding.items(), key=lambda kv: kv[0]))
            key = tuple((k, _hashable(v)) for k, v in key)
            if key not in seen:
                seen.add(key)
                out.append(binding)
        return out

    def is_subclass_of(self, c1: Resource, c2: Resource) -> bool:
        return self.schema.is_subclass_of(c1, c2)

    def asserted_types(self, r: Resource) -> list[Resource]:
        types = self.latest_value(r, RDF_TYPE)
        return [t for t in types if isinstance(t, Resource)]

    def instance_of(self, r: Resource, c: Resource) -> bool:
        """True iff some asserted type of r is a subclass of (or equals) c."""
        if c.iri not in self.schema.classes:
            raise UndeclaredError(f"undeclared class: {c.iri}")
        return any(self.schema.is_subclass_of(tau, c) for tau in self.asserted_types(r))

    def create_instance(self, c: Resource) -> Resource:
        """Mint a fresh individual of class c and assert its type."""
        if c.iri not in self.schema.classes:
            raise UndeclaredError(f"undeclared class: {c.iri}")
        stem = c.local_name().lower()
        n = self._instance_counters.get(stem, 0)
        while True:
            n += 1
            iri = f"{INST_NS}{stem}_{n}"
            if iri not in self._subjects:
                break
        self._instance_counters[stem] = n
        r = Resource(iri)
        self.insert(r, RDF_TYPE, c)
        return r

    # -- snapshots ----------------------------------------------------------

    def snapshot_view(self) -> tuple[Fact, ...]:
        return tuple(self.facts)

    def dump_snapshot(self, meta: dict[str, int] | None = None) -> str:
        """Serialize schema + full fact log; byte-stable across round trips."""
        lines = ["#! rudic-snapshot 1"]
        for key in sorted(meta or {}):
            lines.append(f"#! {key} {(meta or {})[key]}")
        lines.extend(dump_schema(self.schema))
        for fact in self.facts:
            lines.append(
                f"{self.schema.compact(fact.s.iri)} {self.schema.compact(fact.p.iri)} "
                f"{_format_value(fact.o, self.schema)} {fact.t} ."
            )
        return "\n".join(lines) + "\n"

    def load_snapshot(self, text: str) -> dict[str, int]:
        """Restore a dump into this (fresh) store; returns the metadata."""
        if self.facts:
            raise StoreError("snapshot must be loaded into an empty store")
        meta: dict[str, int] = {}
        body_lines = []
        for raw in text.splitlines():
            if raw.startswith("#!"):
                parts = raw[2:].split()
                if len(parts) == 2 and parts[0] != "rudic-snapshot":
                    meta[parts[0]] = int(parts[1])
                continue
            body_lines.append(raw)
        loaded = load_ontology("\n".join(body_lines))
        self.schema = OntologySchema()
        install_core_vocabulary(self.schema)
        if self._builtin_dacts:
            install_default_dacts(self.schema)
        self.facts = []
        self._by_sp = {}
        self._subjects = set()
        self._last_t = -1
        self.schema.prefixes.update(loaded.prefixes)
        for c in loaded.classes.values():
            if c.iri not in loaded.builtin_iris:
                self.schema.declare_class(c)
        for sub, sup in loaded.subclass_edges:
            self.schema.declare_subclass(sub, sup)
        for spec in loaded.properties.values():
            if spec.prop.iri not in loaded.builtin_iris:
                self.schema.declare_property(spec)
        self.schema.validate()
        for s, p, o, t in loaded.instances:
            self._append(Fact(s, p, o, t))
        self._recover_instance_counters()
        return meta

    def _recover_instance_counters(self) -> None:
        pat = re.compile(re.escape(INST_NS) + r"([a-z0-9_]+?)_([0-9]+)$")
        for iri in self._subjects:
            m = pat.match(iri)
            if m:
                stem, n = m.group(1), int(m.group(2))
                self._instance_counters[stem] = max(self._instance_counters.get(stem, 0), n)


def _is_tombstone(o: Value) -> bool:
    return isinstance(o, Resource) and o.iri == TOMBSTONE.iri


def _is_var(slot) -> bool:
    return slot is None or (isinstance(slot, str) and slot.startswith("?"))


def _match_slot(slot, actual: Value, binding: dict[str, Value]) -> bool:
    if _is_var(slot):
        if slot in (None, "?"):
            return True
        name = slot[1:]
        if name in binding:
            return _values_equal(binding[name], actual)
        binding[name] = actual
        return True
    return _values_equal(slot, actual)


def _values_equal(a: Value, b: Value) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _hashable(v: Value):
    # bool hashes equal to int; keep them apart in binding-row dedup keys
    return (type(v).__name__, v)
