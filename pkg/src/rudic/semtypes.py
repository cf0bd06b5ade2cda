"""Semantic types for the rule language and the builtin signature table."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SemType:
    def show(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Scalar(SemType):
    kind: str  # "int" | "decimal" | "string" | "boolean" | "timestamp"

    def show(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Instance(SemType):
    """An individual of an ontology class."""

    class_iri: str

    def show(self) -> str:
        cut = max(self.class_iri.rfind("#"), self.class_iri.rfind("/"))
        return self.class_iri[cut + 1 :]


@dataclass(frozen=True)
class ClassValue(SemType):
    """A class used as a value (right side of instance/subclass tests)."""

    class_iri: str

    def show(self) -> str:
        return f"class {Instance(self.class_iri).show()}"


@dataclass(frozen=True)
class DActType(SemType):
    def show(self) -> str:
        return "DialogueAct"


@dataclass(frozen=True)
class Collection(SemType):
    element: SemType

    def show(self) -> str:
        return f"collection of {self.element.show()}"


@dataclass(frozen=True)
class FuncType(SemType):
    params: tuple
    returns: SemType
    pure: bool = True

    def show(self) -> str:
        args = ", ".join(p.show() for p in self.params)
        return f"({args}) -> {self.returns.show()}"


@dataclass(frozen=True)
class VoidType(SemType):
    def show(self) -> str:
        return "void"


@dataclass(frozen=True)
class UnknownType(SemType):
    def show(self) -> str:
        return "unknown"


INT = Scalar("int")
DECIMAL = Scalar("decimal")
STRING = Scalar("string")
BOOLEAN = Scalar("boolean")
TIMESTAMP = Scalar("timestamp")
DACT = DActType()
VOID = VoidType()
UNKNOWN = UnknownType()

NUMERIC = (INT, DECIMAL, TIMESTAMP)

SCALARS = {
    "int": INT,
    "decimal": DECIMAL,
    "string": STRING,
    "boolean": BOOLEAN,
    "timestamp": TIMESTAMP,
}


def is_numeric(t: SemType) -> bool:
    return t in NUMERIC


def widen_numeric(a: SemType, b: SemType) -> SemType:
    """int widens to decimal in mixed arithmetic/comparisons."""
    if DECIMAL in (a, b):
        return DECIMAL
    if TIMESTAMP in (a, b):
        return TIMESTAMP
    return INT


@dataclass(frozen=True)
class ResolvedOp:
    """How an overloaded comparison executes at runtime."""

    kind: str  # see docs/language.md for the full table
    op: str


NUMERIC_CMP = "numeric_cmp"
STRING_EQ = "string_eq"
BOOLEAN_EQ = "boolean_eq"
RESOURCE_EQ = "resource_eq"
CLASS_EQ = "class_eq"
INSTANCE_OF_TEST = "instance_of_test"
SUBCLASS_TEST = "subclass_test"
DA_SUBSUMPTION = "da_subsumption"
DA_EQ = "da_eq"

_EQ_OPS = ("==", "!=")
_ORDER_OPS = ("<", "<=", ">", ">=")


def resolve_overload(op: str, lhs: SemType, rhs: SemType) -> ResolvedOp | None:
    """Resolve a comparison operator against its operand types.

    Returns None for pairs off the documented table; the checker turns that
    into a diagnostic, never a silent default.
    """
    if is_numeric(lhs) and is_numeric(rhs):
        if lhs == TIMESTAMP or rhs == TIMESTAMP:
            if lhs != rhs:
                return None
        return ResolvedOp(NUMERIC_CMP, op)
    if op in _EQ_OPS:
        if lhs == STRING and rhs == STRING:
            return ResolvedOp(STRING_EQ, op)
        if lhs == BOOLEAN and rhs == BOOLEAN:
            return ResolvedOp(BOOLEAN_EQ, op)
        if isinstance(lhs, Instance) and isinstance(rhs, Instance):
            return ResolvedOp(RESOURCE_EQ, op)
        if isinstance(lhs, ClassValue) and isinstance(rhs, ClassValue):
            return ResolvedOp(CLASS_EQ, op)
        if lhs == DACT and rhs == DACT:
            return ResolvedOp(DA_EQ, op)
        return None
    if op == "<=":
        if isinstance(lhs, Instance) and isinstance(rhs, ClassValue):
            return ResolvedOp(INSTANCE_OF_TEST, op)
        if isinstance(lhs, ClassValue) and isinstance(rhs, ClassValue):
            return ResolvedOp(SUBCLASS_TEST, op)
        if lhs == DACT and rhs == DACT:
            # lhs is the more specific side: subsumes(rhs, lhs)
            return ResolvedOp(DA_SUBSUMPTION, op)
    return None


# Runtime services available to every rule file.  User extension functions
# come on top of these, declared in the project file.
BUILTIN_SIGNATURES: dict[str, FuncType] = {
    "emitDA": FuncType((DACT,), VOID, pure=False),
    "saidInSession": FuncType((DACT,), BOOLEAN, pure=True),
    "receivedInSession": FuncType((DACT,), BOOLEAN, pure=True),
    "newSession": FuncType((), VOID, pure=False),
}
