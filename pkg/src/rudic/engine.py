"""The information-state/update loop.

Every event is applied to the store/history, then all rules are evaluated
in document order, repeatedly, until an iteration produces no store change
and no new proposal (the fixed point).  The frozen proposal set then goes
to the selection component; the chosen block executes, and if that changed
anything a new round starts.  Named timeouts fire through the simulated or
wall clock and run their frozen block in a fresh round.

Every rule evaluation produces one RuleLogRecord with per-base-term
tri-state values (true / false / skipped), the raw material of the remote
debugger.
"""

from __future__ import annotations

import time
from copy import deepcopy
from dataclasses import dataclass, field

from . import ir
from .dacts import (
    EMITTED,
    RECEIVED,
    DialogueAct,
    InteractionHistory,
    format_da,
    subsumes,
    value_to_string,
)
from .selection import FirstSelector, ProposalInfo, SelectionRequest
from .store import Resource, StoreError, Timestamp, TupleStore

ABSENT = None


class EngineError(Exception):
    pass


class IterationLimitExceeded(EngineError):
    """A rule set failed to converge within the configured cap."""

    def __init__(self, limit: int, kind: str = "iterations"):
        super().__init__(f"no fixed point after {limit} {kind}")
        self.limit = limit
        self.kind = kind


class EngineRuntimeError(EngineError):
    def __init__(self, message: str, rule_id: int | None = None):
        prefix = f"rule {rule_id}: " if rule_id is not None else ""
        super().__init__(prefix + message)
        self.rule_id = rule_id


# -- clocks -------------------------------------------------------------------


class SimulatedClock:
    """Logical millisecond clock driven by the event script."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def set(self, t: int) -> None:
        if t < self._now:
            raise EngineError(f"clock cannot move backwards ({t} < {self._now})")
        self._now = t


class WallClock:
    """Milliseconds since engine start, from the monotonic clock."""

    def __init__(self):
        self._anchor = time.monotonic()

    def now(self) -> int:
        return int((time.monotonic() - self._anchor) * 1000)

    def set(self, t: int) -> None:
        pass  # wall time advances on its own


# -- runtime records -------------------------------------------------------------


@dataclass
class Proposal:
    label: str
    rule_id: int
    iteration: int
    frozen: dict  # captured locals, by value
    block: list  # IR statements
    created_t: int


@dataclass
class TimeoutEntry:
    name: str
    fire_at: int
    frozen: dict
    block: list
    rule_id: int
    seq: int


@dataclass(frozen=True)
class BaseTermLog:
    term_id: int
    source: str
    value: str  # "true" | "false" | "skipped"


@dataclass(frozen=True)
class RuleLogRecord:
    t: int
    rule_id: int
    label: str
    final: bool
    terms: tuple  # of BaseTermLog


# -- events ---------------------------------------------------------------------


@dataclass
class RecvEvent:
    da: DialogueAct


@dataclass
class SetEvent:
    subject: Resource
    predicate: Resource
    value: object


@dataclass
class TimerEvent:
    entry: TimeoutEntry


@dataclass
class SessionEvent:
    """Session control: begin a fresh session id."""


Event = RecvEvent | SetEvent | TimerEvent | SessionEvent


@dataclass
class EventResult:
    emitted: list = field(default_factory=list)  # DialogueAct, emission order
    records: list = field(default_factory=list)  # RuleLogRecord, order produced


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Frame:
    __slots__ = ("locals",)

    def __init__(self, locals_: dict | None = None):
        self.locals = locals_ if locals_ is not None else {}


class Engine:
    def __init__(
        self,
        program: ir.IRProgram,
        store: TupleStore,
        selector=None,
        clock=None,
        max_iterations: int = 100,
        max_rounds: int = 10,
        extensions: dict | None = None,
        log_sink=None,
        output=None,
    ):
        self.program = program
        self.store = store
        self.selector = selector if selector is not None else FirstSelector()
        self.clock = clock if clock is not None else SimulatedClock()
        self.store.clock = self.clock.now
        self.max_iterations = max_iterations
        self.max_rounds = max_rounds
        self.extensions = extensions or {}
        self.log_sink = log_sink
        self.output = output
        self.feature_specs: list = []  # (feature key, subject Resource, predicate Resource)

        self.globals: dict = {}
        self.history = InteractionHistory(store)
        self.timeouts: dict[str, TimeoutEntry] = {}
        self._timeout_seq = 0
        self.transcript: list[str] = []
        self.timer_fired_count: dict[str, int] = {}

        self._round_proposals: dict[str, Proposal] = {}
        self._result: EventResult | None = None
        self._rule_stack: list[int] = []
        self._iteration = 0
        self.started = False

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> EventResult:
        """Begin a session, run module init statements, then an initial round."""
        if self.started:
            raise EngineError("engine already started")
        self.started = True
        self.history.begin_session()
        result = EventResult()
        self._result = result
        frame = _Frame()
        try:
            for item in self.program.init:
                self._rule_stack = []
                self._exec_stmt(item.stmt, frame)
            self._run_rounds(pending=None)
        finally:
            self._result = None
        return result

    def process_event(self, event: Event) -> EventResult:
        if not self.started:
            raise EngineError("engine not started")
        result = EventResult()
        self._result = result
        try:
            pending = None
            if isinstance(event, RecvEvent):
                self.history.record(event.da, RECEIVED)
            elif isinstance(event, SetEvent):
                try:
                    self.store.insert(event.subject, event.predicate, event.value)
                except StoreError as exc:
                    raise EngineRuntimeError(str(exc)) from exc
            elif isinstance(event, TimerEvent):
                entry = event.entry
                self.timer_fired_count[entry.name] = self.timer_fired_count.get(entry.name, 0) + 1

                def pending(entry=entry):
                    frame = _Frame(deepcopy(entry.frozen))
                    self._rule_stack = [entry.rule_id]
                    self._exec_block(entry.block, frame)
                    self._rule_stack = []

            elif isinstance(event, SessionEvent):
                self.new_session()
            else:
                raise EngineError(f"unknown event {event!r}")
            self._run_rounds(pending)
        finally:
            self._result = None
        return result

    def advance_clock(self, to: int) -> EventResult:
        """Advance the simulated clock, firing due timeouts in order."""
        if to < self.clock.now():
            raise EngineError("cannot advance the clock backwards")
        combined = EventResult()
        while True:
            due = [e for e in self.timeouts.values() if e.fire_at <= to]
            if not due:
                break
            entry = min(due, key=lambda e: (e.fire_at, e.seq))
            del self.timeouts[entry.name]
            self.clock.set(entry.fire_at)
            result = self.process_event(TimerEvent(entry))
            combined.emitted.extend(result.emitted)
            combined.records.extend(result.records)
        self.clock.set(to)
        return combined

    def poll_timers(self) -> EventResult:
        """Fire timeouts due at the current (wall) clock time.

        Unlike advance_clock this re-reads the clock per firing, so it is
        safe while wall time moves underneath.
        """
        combined = EventResult()
        while True:
            now = self.clock.now()
            due = [e for e in self.timeouts.values() if e.fire_at <= now]
            if not due:
                return combined
            entry = min(due, key=lambda e: (e.fire_at, e.seq))
            del self.timeouts[entry.name]
            result = self.process_event(TimerEvent(entry))
            combined.emitted.extend(result.emitted)
            combined.records.extend(result.records)

    def register_timeout(self, name: str, delay_ms: int, block: list, frozen: dict, rule_id: int) -> bool:
        """Accepted only when no active entry carries the name."""
        if delay_ms < 0:
            raise EngineRuntimeError(f"negative timeout delay {delay_ms}", rule_id)
        if name in self.timeouts:
            return False
        self._timeout_seq += 1
        self.timeouts[name] = TimeoutEntry(
            name, self.clock.now() + delay_ms, frozen, block, rule_id, self._timeout_seq
        )
        return True

    def new_session(self) -> None:
        self.history.begin_session()

    # -- the fixed-point loop ------------------------------------------------------

    def _run_rounds(self, pending) -> None:
        rounds = 0
        carried: dict[str, Proposal] = {}
        while True:
            rounds += 1
            if rounds > self.max_rounds:
                raise IterationLimitExceeded(self.max_rounds, kind="rounds")
            self._round_proposals = carried
            carried = {}
            if pending is not None:
                pending()
                pending = None
            self._fixed_point()
            if not self._round_proposals:
                break
            chosen = self._select_proposal()
            self._round_proposals = {}
            facts_before = len(self.store.facts)
            frame = _Frame(deepcopy(chosen.frozen))
            self._rule_stack = [chosen.rule_id]
            self._exec_block(chosen.block, frame)
            self._rule_stack = []
            carried = self._round_proposals
            self._round_proposals = {}
            if len(self.store.facts) == facts_before and not carried:
                break

    def _fixed_point(self) -> None:
        self._iteration = 0
        while True:
            self._iteration += 1
            if self._iteration > self.max_iterations:
                raise IterationLimitExceeded(self.max_iterations)
            facts_before = len(self.store.facts)
            proposals_before = len(self._round_proposals)
            for kind, rule_id in self.program.round_items:
                if kind == "rule":
                    self.evaluate_rule(rule_id, _Frame())
            if (
                len(self.store.facts) == facts_before
                and len(self._round_proposals) == proposals_before
            ):
                return

    def eval_condition(self, tree: ir.CondNode, locals_: dict | None = None) -> bool:
        """Evaluate a lowered condition tree against the live store (test aid)."""
        return self._eval_cond(tree, _Frame(dict(locals_ or {})), None)

    def check_idempotent(self) -> bool:
        """Re-run one full iteration; True when it changes nothing (test aid)."""
        facts_before = len(self.store.facts)
        self._round_proposals = {}
        result = EventResult()
        self._result = result
        try:
            for kind, rule_id in self.program.round_items:
                if kind == "rule":
                    self.evaluate_rule(rule_id, _Frame())
        finally:
            self._result = None
        unchanged = len(self.store.facts) == facts_before and not self._round_proposals
        self._round_proposals = {}
        return unchanged

    def _select_proposal(self) -> Proposal:
        infos = [
            ProposalInfo(p.label, p.rule_id, p.iteration)
            for p in self._round_proposals.values()
        ]
        request = SelectionRequest(infos, self._extract_features())
        label = self.selector.select(request)
        if label not in self._round_proposals:
            label = min(self._round_proposals.values(), key=lambda p: (p.rule_id, p.label)).label
        return self._round_proposals[label]

    def _extract_features(self) -> dict:
        features: dict[str, object] = {}
        for key, subject, predicate in self.feature_specs:
            v = self.store.latest_value(subject, predicate)
            if isinstance(v, list):
                features[key] = [value_to_string(x) for x in v]
            else:
                features[key] = None if v is ABSENT else value_to_string(v)
        return features

    # -- rule evaluation ---------------------------------------------------------

    def evaluate_rule(self, rule_id: int, frame: _Frame) -> RuleLogRecord:
        rule = self.program.rules[rule_id]
        self._rule_stack.append(rule_id)
        try:
            values: dict[int, bool] = {}
            final = self._eval_cond(rule.cond, frame, values)
            terms = tuple(
                BaseTermLog(
                    info.term_id,
                    info.source,
                    ("true" if values[info.term_id] else "false")
                    if info.term_id in values
                    else "skipped",
                )
                for info in rule.base_terms
            )
            record = RuleLogRecord(self.clock.now(), rule_id, rule.label, final, terms)
            if self._result is not None:
                self._result.records.append(record)
            if self.log_sink is not None:
                self.log_sink(record)
            self._exec_block(rule.then if final else rule.els, frame)
            return record
        finally:
            self._rule_stack.pop()

    def _eval_cond(self, node: ir.CondNode, frame: _Frame, values: dict | None) -> bool:
        if isinstance(node, ir.ConstCond):
            return node.value
        if isinstance(node, ir.BaseTerm):
            v = self._eval_term(node, frame)
            if values is not None and node.term_id >= 0:
                values[node.term_id] = v
            return v
        if isinstance(node, ir.AndNode):
            for child in node.children:
                if not self._eval_cond(child, frame, values):
                    return False
            return True
        if isinstance(node, ir.OrNode):
            for child in node.children:
                if self._eval_cond(child, frame, values):
                    return True
            return False
        if isinstance(node, ir.NotNode):
            return not self._eval_cond(node.child, frame, values)
        raise EngineRuntimeError(f"bad condition node {node!r}", self._current_rule())

    def _eval_term(self, term: ir.BaseTerm, frame: _Frame) -> bool:
        v = self._eval(term.expr, frame)
        if isinstance(v, bool):
            return v
        raise EngineRuntimeError(
            f"condition term '{term.source}' did not yield a boolean", self._current_rule()
        )

    def _current_rule(self) -> int | None:
        return self._rule_stack[-1] if self._rule_stack else None

    # -- statement execution -------------------------------------------------------

    def _exec_block(self, stmts: list, frame: _Frame) -> None:
        for stmt in stmts:
            self._exec_stmt(stmt, frame)

    def _exec_stmt(self, stmt: ir.IRStmt, frame: _Frame) -> None:
        if isinstance(stmt, ir.AssignLocal):
            v = self._eval(stmt.value, frame)
            if v is ABSENT:
                raise EngineRuntimeError(
                    f"cannot assign an absent value to '{stmt.name}'", self._current_rule()
                )
            if stmt.scope == "global":
                self.globals[stmt.name] = v
            else:
                frame.locals[stmt.name] = v
            return
        if isinstance(stmt, ir.StoreWrite):
            base = self._strict(self._eval(stmt.base, frame), "store write target")
            if not isinstance(base, Resource):
                raise EngineRuntimeError("store write target is not a resource", self._current_rule())
            value = self._strict(self._eval(stmt.value, frame), "store write value")
            try:
                self.store.insert(base, Resource(stmt.prop_iri), value)
            except StoreError as exc:
                raise EngineRuntimeError(str(exc), self._current_rule()) from exc
            return
        if isinstance(stmt, ir.DAArgWrite):
            da = self._strict(self._eval(stmt.da, frame), "dialogue act")
            if not isinstance(da, DialogueAct):
                raise EngineRuntimeError("argument write on a non dialogue-act", self._current_rule())
            value = self._strict(self._eval(stmt.value, frame), "argument value")
            da.args[stmt.key] = value_to_string(value)
            return
        if isinstance(stmt, ir.ExprInstr):
            self._eval(stmt.expr, frame)
            return
        if isinstance(stmt, ir.IRIf):
            if self._eval_cond(stmt.cond, frame, None):
                self._exec_block(stmt.then, frame)
            else:
                self._exec_block(stmt.els, frame)
            return
        if isinstance(stmt, ir.RuleInstr):
            self.evaluate_rule(stmt.rule_id, frame)
            return
        if isinstance(stmt, ir.ProposeInstr):
            self._propose(stmt, frame)
            return
        if isinstance(stmt, ir.TimeoutInstr):
            delay = self._strict(self._eval(stmt.delay, frame), "timeout delay")
            frozen = self._freeze(stmt.captures, frame)
            rule_id = self._current_rule()
            self.register_timeout(stmt.name, int(delay), stmt.block, frozen, rule_id or 0)
            return
        if isinstance(stmt, ir.ReturnInstr):
            raise _Return(self._eval(stmt.value, frame) if stmt.value is not None else None)
        raise EngineRuntimeError(f"bad instruction {stmt!r}", self._current_rule())

    def _propose(self, stmt: ir.ProposeInstr, frame: _Frame) -> None:
        # unique per label per round: the first frozen instance wins
        if stmt.label in self._round_proposals:
            return
        self._round_proposals[stmt.label] = Proposal(
            stmt.label,
            self._current_rule() or 0,
            self._iteration,
            self._freeze(stmt.captures, frame),
            stmt.block,
            self.clock.now(),
        )

    def _freeze(self, captures: list, frame: _Frame) -> dict:
        return {name: deepcopy(frame.locals[name]) for name in captures if name in frame.locals}

    # -- expression evaluation --------------------------------------------------------

    def _strict(self, v, what: str):
        if v is ABSENT:
            raise EngineRuntimeError(f"absent value used as {what}", self._current_rule())
        return v

    def _eval(self, e: ir.IRExpr, frame: _Frame):
        if isinstance(e, ir.Const):
            return e.value
        if isinstance(e, ir.LoadVar):
            space = self.globals if e.scope == "global" else frame.locals
            if e.name not in space:
                raise EngineRuntimeError(f"unbound variable '{e.name}'", self._current_rule())
            return space[e.name]
        if isinstance(e, ir.LoadClass):
            return Resource(e.class_iri)
        if isinstance(e, ir.StoreRead):
            base = self._eval(e.base, frame)
            if base is ABSENT:
                return ABSENT
            if not isinstance(base, Resource):
                raise EngineRuntimeError("property read on a non-resource", self._current_rule())
            return self.store.latest_value(base, Resource(e.prop_iri))
        if isinstance(e, ir.DAArgRead):
            da = self._eval(e.da, frame)
            if da is ABSENT:
                return ABSENT
            if not isinstance(da, DialogueAct):
                raise EngineRuntimeError("argument read on a non dialogue-act", self._current_rule())
            return da.args.get(e.key, ABSENT)
        if isinstance(e, ir.CallFn):
            return self._call(e, frame)
        if isinstance(e, ir.NewInst):
            try:
                return self.store.create_instance(Resource(e.class_iri))
            except StoreError as exc:
                raise EngineRuntimeError(str(exc), self._current_rule()) from exc
        if isinstance(e, ir.MakeDA):
            da = DialogueAct(e.token, e.token_name, e.frame, e.frame_name, {})
            for arg in e.args:
                v = self._eval(arg.value, frame)
                if v is ABSENT:
                    continue  # absent expression argument: drop the key
                da.args[arg.key] = value_to_string(v)
            return da
        if isinstance(e, ir.Interp):
            parts = []
            for seg in e.segments:
                if isinstance(seg, str):
                    parts.append(seg)
                else:
                    v = self._eval(seg, frame)
                    parts.append("" if v is ABSENT else value_to_string(v))
            return "".join(parts)
        if isinstance(e, ir.Arith):
            return self._arith(e, frame)
        if isinstance(e, ir.Concat):
            lhs = self._strict(self._eval(e.lhs, frame), "string operand")
            rhs = self._strict(self._eval(e.rhs, frame), "string operand")
            return str(lhs) + str(rhs)
        if isinstance(e, ir.Neg):
            v = self._strict(self._eval(e.operand, frame), "numeric operand")
            return -v
        if isinstance(e, ir.Compare):
            return self._compare(e, frame)
        if isinstance(e, ir.Exists):
            v = self._eval(e.inner, frame)
            if v is ABSENT:
                return False
            if isinstance(v, list):
                return len(v) > 0
            return True
        if isinstance(e, ir.CondValue):
            return self._eval_cond(e.tree, frame, None)
        raise EngineRuntimeError(f"bad expression {e!r}", self._current_rule())

    def _arith(self, e: ir.Arith, frame: _Frame):
        a = self._strict(self._eval(e.lhs, frame), "numeric operand")
        b = self._strict(self._eval(e.rhs, frame), "numeric operand")
        try:
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                if isinstance(a, int) and isinstance(b, int):
                    return _int_div(a, b)
                return a / b
            if e.op == "%":
                if isinstance(a, int) and isinstance(b, int):
                    return _int_rem(a, b)
                return a % b
        except ZeroDivisionError:
            raise EngineRuntimeError("division by zero", self._current_rule()) from None
        raise EngineRuntimeError(f"bad arithmetic operator {e.op}", self._current_rule())

    def _compare(self, e: ir.Compare, frame: _Frame) -> bool:
        a = self._strict(self._eval(e.lhs, frame), f"operand of '{e.op}'")
        b = self._strict(self._eval(e.rhs, frame), f"operand of '{e.op}'")
        kind = e.kind
        if kind == "numeric_cmp":
            a = a.ms if isinstance(a, Timestamp) else a
            b = b.ms if isinstance(b, Timestamp) else b
            return _ordered(e.op, a, b)
        if kind in ("string_eq", "boolean_eq"):
            return (a == b) if e.op == "==" else (a != b)
        if kind in ("resource_eq", "class_eq"):
            same = isinstance(a, Resource) and isinstance(b, Resource) and a.iri == b.iri
            return same if e.op == "==" else not same
        if kind == "instance_of_test":
            if not isinstance(a, Resource) or not isinstance(b, Resource):
                raise EngineRuntimeError("instance test on non-resources", self._current_rule())
            return self.store.instance_of(a, b)
        if kind == "subclass_test":
            return self.store.is_subclass_of(a, b)
        if kind == "da_subsumption":
            # lhs is the specific side: rhs (general) must subsume it
            return subsumes(b, a, self.store.schema)
        if kind == "da_eq":
            both = subsumes(a, b, self.store.schema) and subsumes(b, a, self.store.schema)
            return both if e.op == "==" else not both
        raise EngineRuntimeError(f"bad comparison kind {kind}", self._current_rule())

    # -- calls -------------------------------------------------------------------------

    def _call(self, e: ir.CallFn, frame: _Frame):
        args = [self._eval(a, frame) for a in e.args]
        if e.name == "emitDA":
            return self._emit_da(self._strict(args[0], "dialogue act"))
        if e.name == "saidInSession":
            return self.history.said_in_session(self._strict(args[0], "dialogue act"))
        if e.name == "receivedInSession":
            return self.history.received_in_session(self._strict(args[0], "dialogue act"))
        if e.name == "newSession":
            self.new_session()
            return None
        fn = self.program.functions.get(e.name)
        if fn is not None:
            for name, v in zip(fn.params, args):
                if v is ABSENT:
                    raise EngineRuntimeError(
                        f"absent value passed to '{e.name}' parameter '{name}'",
                        self._current_rule(),
                    )
            call_frame = _Frame(dict(zip(fn.params, args)))
            try:
                self._exec_block(fn.body, call_frame)
            except _Return as ret:
                return ret.value
            return None
        ext = self.extensions.get(e.name)
        if ext is not None:
            for v in args:
                if v is ABSENT:
                    raise EngineRuntimeError(
                        f"absent value passed to extension '{e.name}'", self._current_rule()
                    )
            return ext(*args)
        raise EngineRuntimeError(f"no implementation for function '{e.name}'", self._current_rule())

    def _emit_da(self, da: DialogueAct):
        if not isinstance(da, DialogueAct):
            raise EngineRuntimeError("emitDA expects a dialogue act", self._current_rule())
        self.history.record(da, EMITTED)
        line = f"{self.clock.now()} emit {format_da(da)}"
        self.transcript.append(line)
        if self._result is not None:
            self._result.emitted.append(da.copy())
        if self.output is not None:
            self.output(line)
        return None


def _int_div(a: int, b: int) -> int:
    # C-style truncation toward zero
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _int_rem(a: int, b: int) -> int:
    return a - _int_div(a, b) * b


def _ordered(op: str, a, b) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    raise ValueError(op)
