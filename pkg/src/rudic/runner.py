"""Project orchestration: compile, build engines, replay event scripts.

Event scripts are line oriented: ``@<ms>`` advances the simulated clock,
``recv #DA(...)`` delivers a dialogue act, ``set <subj> <pred> <value>``
injects an external store update.  The transcript is the engine's
``<ms> emit #DA(...)`` lines; byte-identical transcripts are the
regression currency.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from pathlib import Path

from .dacts import parse_da
from .engine import Engine, RecvEvent, SetEvent, SimulatedClock
from .ir import IRProgram, dump_program, load_program
from .lower import lower_program
from .parser import parse_module
from .project import ProjectConfig
from .selection import (
    ExternalSelector,
    FirstSelector,
    RandomSelector,
    SubprocessTransport,
    TcpTransport,
)
from .semtypes import FuncType
from .store import Resource, TupleStore, parse_term
from .typecheck import check_program, type_from_name


class ScriptError(Exception):
    pass


@dataclass
class CompileResult:
    program: IRProgram | None
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.program is not None


def make_store(config: ProjectConfig, snapshot: Path | None = None) -> TupleStore:
    store = TupleStore(builtin_dacts=config.builtin_dacts)
    if snapshot is not None:
        store.load_snapshot(snapshot.read_text())
    else:
        store.load_ontology(config.ontology.read_text())
    return store


def extension_signatures(config: ProjectConfig, schema) -> dict:
    sigs = {}
    for decl in config.functions:
        params = []
        for p in decl.params:
            t = type_from_name(p, schema)
            if t is None:
                raise ScriptError(f"unknown type '{p}' in declaration of '{decl.name}'")
            params.append(t)
        ret = type_from_name(decl.returns, schema)
        if ret is None:
            raise ScriptError(f"unknown type '{decl.returns}' in declaration of '{decl.name}'")
        sigs[decl.name] = FuncType(tuple(params), ret, pure=decl.pure)
    return sigs


def compile_project(config: ProjectConfig) -> CompileResult:
    """Parse, check and lower the whole import tree of a project."""
    schema = make_store(config).schema
    rules_dir = config.rules.parent

    def loader(name: str):
        path = rules_dir / f"{name}.rudi"
        return parse_module(path.read_text(), name), str(path)

    checked = check_program(
        config.top_module, loader, schema, extension_signatures(config, schema)
    )
    if checked.errors:
        return CompileResult(None, checked.diagnostics)
    program = lower_program(checked, config.bare_chain_guards)
    return CompileResult(program, checked.diagnostics)


def write_artifact(program: IRProgram, path: Path) -> None:
    path.write_text(dump_program(program))


def load_or_compile(config: ProjectConfig, recompile: bool = False) -> CompileResult:
    artifact = config.artifact_path()
    if artifact.is_file() and not recompile:
        return CompileResult(load_program(artifact.read_text()), [])
    return compile_project(config)


def make_selector(config: ProjectConfig):
    sel = config.selection
    if sel.kind == "first":
        return FirstSelector()
    if sel.kind == "random":
        return RandomSelector(sel.seed)
    if sel.command:
        transport = SubprocessTransport(sel.command)
    else:
        transport = TcpTransport(sel.host or "127.0.0.1", int(sel.port or 0))
    return ExternalSelector(transport, sel.timeout_ms)


def resolve_extensions(config: ProjectConfig) -> dict:
    impls = {}
    for decl in config.functions:
        if decl.python:
            mod_name, _, attr = decl.python.partition(":")
            impls[decl.name] = getattr(importlib.import_module(mod_name), attr)
    return impls


def build_engine(
    config: ProjectConfig,
    program: IRProgram,
    snapshot: Path | None = None,
    clock=None,
    log_sink=None,
    output=None,
) -> Engine:
    store = make_store(config, snapshot)
    engine = Engine(
        program,
        store,
        selector=make_selector(config),
        clock=clock if clock is not None else SimulatedClock(),
        max_iterations=config.max_iterations,
        max_rounds=config.max_rounds,
        extensions=resolve_extensions(config),
        log_sink=log_sink,
        output=output,
    )
    prefixes = store.schema.all_prefixes()
    for entry in config.selection.features:
        parts = str(entry).split()
        if len(parts) != 2:
            raise ScriptError(f"malformed feature spec {entry!r} (want 'subject predicate')")
        s = parse_term(parts[0], prefixes)
        p = parse_term(parts[1], prefixes)
        if not isinstance(s, Resource) or not isinstance(p, Resource):
            raise ScriptError(f"feature spec {entry!r} must name resources")
        engine.feature_specs.append((f"{parts[0]} {parts[1]}", s, p))
    return engine


# -- event scripts ----------------------------------------------------------------


@dataclass
class ScriptCommand:
    line_no: int
    kind: str  # "advance" | "recv" | "set"
    payload: tuple


def parse_script(text: str, store: TupleStore) -> list[ScriptCommand]:
    prefixes = store.schema.all_prefixes()
    commands: list[ScriptCommand] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("@"):
                commands.append(ScriptCommand(line_no, "advance", (int(line[1:]),)))
            elif line.startswith("recv "):
                da = parse_da(line[len("recv ") :], store.schema)
                commands.append(ScriptCommand(line_no, "recv", (da,)))
            elif line.startswith("set "):
                parts = line[len("set ") :].split(maxsplit=2)
                if len(parts) != 3:
                    raise ScriptError("set needs <subject> <predicate> <value>")
                s = parse_term(parts[0], prefixes)
                p = parse_term(parts[1], prefixes)
                if not isinstance(s, Resource) or not isinstance(p, Resource):
                    raise ScriptError("set subject and predicate must be resources")
                o = parse_term(parts[2], prefixes)
                commands.append(ScriptCommand(line_no, "set", (s, p, o)))
            else:
                raise ScriptError(f"unrecognized script line: {line!r}")
        except ScriptError as exc:
            raise ScriptError(f"script line {line_no}: {exc}") from None
        except Exception as exc:
            raise ScriptError(f"script line {line_no}: {exc}") from exc
    return commands


def run_script(engine: Engine, commands: list) -> str:
    """Replay a script on a started (or fresh) engine; returns the transcript."""
    if not engine.started:
        try:
            engine.start()
        except Exception as exc:
            raise ScriptError(f"engine startup: {exc}") from exc
    for idx, cmd in enumerate(commands):
        try:
            if cmd.kind == "advance":
                engine.advance_clock(cmd.payload[0])
            elif cmd.kind == "recv":
                engine.process_event(RecvEvent(cmd.payload[0].copy()))
            else:
                s, p, o = cmd.payload
                engine.process_event(SetEvent(s, p, o))
        except Exception as exc:
            raise ScriptError(f"event {idx + 1} (line {cmd.line_no}): {exc}") from exc
    return transcript_text(engine)


def transcript_text(engine: Engine) -> str:
    return "".join(line + "\n" for line in engine.transcript)


def run_project(
    config: ProjectConfig,
    script_path: Path,
    snapshot_in: Path | None = None,
    snapshot_out: Path | None = None,
    recompile: bool = False,
    log_sink=None,
) -> str:
    result = load_or_compile(config, recompile)
    if not result.ok:
        raise ScriptError(
            "project has errors:\n" + "\n".join(d.format() for d in result.diagnostics)
        )
    engine = build_engine(config, result.program, snapshot=snapshot_in, log_sink=log_sink)
    commands = parse_script(script_path.read_text(), engine.store)
    transcript = run_script(engine, commands)
    if snapshot_out is not None:
        snapshot_out.write_text(engine.store.dump_snapshot())
    return transcript
