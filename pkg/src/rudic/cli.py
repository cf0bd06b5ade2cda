"""Command line entry points: compile, run, repl.

Exit codes: 0 ok, 1 compile diagnostics, 2 runtime error.
"""

from __future__ import annotations

import argparse
import queue
import sys
import threading
from pathlib import Path

from .dacts import parse_da
from .engine import RecvEvent, SetEvent, WallClock
from .project import ProjectError, load_project
from .runner import (
    ScriptError,
    build_engine,
    compile_project,
    load_or_compile,
    parse_script,
    run_script,
    write_artifact,
)
from .store import Resource, parse_term

OK = 0
DIAGNOSTICS = 1
RUNTIME_ERROR = 2


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rudic",
        description="compile and run ontology-based dialogue rule projects",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compile = sub.add_parser("compile", help="compile a project to a .rudic artifact")
    p_compile.add_argument("project", help="path to the project file")

    p_run = sub.add_parser("run", help="replay an event script on the simulated clock")
    p_run.add_argument("project")
    p_run.add_argument("--script", required=True, help="event script file")
    p_run.add_argument("--load", help="store snapshot to start from")
    p_run.add_argument("--save", help="write a store snapshot after the run")
    p_run.add_argument("--recompile", action="store_true", help="ignore a cached artifact")
    p_run.add_argument("--debug-port", type=int, help="serve the debug protocol on this port")
    p_run.add_argument(
        "--debug-wait",
        action="store_true",
        help="wait for a debug client to connect and send a ping before replaying",
    )
    p_run.add_argument(
        "--debug-linger-ms",
        type=int,
        default=0,
        help="keep the debug server up this long after the script ends",
    )

    p_repl = sub.add_parser("repl", help="interactive session on the wall clock")
    p_repl.add_argument("project")
    p_repl.add_argument("--debug-port", type=int)
    return parser


def cmd_compile(args) -> int:
    try:
        config = load_project(args.project)
    except ProjectError as exc:
        print(exc, file=sys.stderr)
        return DIAGNOSTICS
    result = compile_project(config)
    for d in result.diagnostics:
        print(d.format(), file=sys.stderr)
    if not result.ok:
        return DIAGNOSTICS
    write_artifact(result.program, config.artifact_path())
    print(f"wrote {config.artifact_path()}")
    return OK


def _find_ui_dir() -> Path | None:
    import os

    env = os.environ.get("RUDIC_UI_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path.cwd() / "frontend" / "dist")
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for candidate in candidates:
        if (candidate / "index.html").is_file():
            return candidate
    return None


def _attach_debug_server(engine, config, port):
    from .debugsrv import DebugServer

    server = DebugServer(engine, port=port, ui_dir=_find_ui_dir())
    server.start()
    print(f"debug server listening on port {server.port}", file=sys.stderr, flush=True)
    return server


def cmd_run(args) -> int:
    try:
        config = load_project(args.project)
    except ProjectError as exc:
        print(exc, file=sys.stderr)
        return DIAGNOSTICS
    result = load_or_compile(config, recompile=args.recompile)
    for d in result.diagnostics:
        print(d.format(), file=sys.stderr)
    if not result.ok:
        return DIAGNOSTICS

    server = None
    try:
        engine = build_engine(config, result.program, snapshot=Path(args.load) if args.load else None)
        port = args.debug_port if args.debug_port is not None else config.debug_port
        if port is not None:
            server = _attach_debug_server(engine, config, port)
            if args.debug_wait:
                server.wait_for_client()
                server.wait_for_ping()
        commands = parse_script(Path(args.script).read_text(), engine.store)
        transcript = run_script(engine, commands)
        sys.stdout.write(transcript)
        if args.save:
            Path(args.save).write_text(engine.store.dump_snapshot())
        if server is not None and args.debug_linger_ms:
            import time

            time.sleep(args.debug_linger_ms / 1000.0)
        return OK
    except (ScriptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    finally:
        if server is not None:
            server.stop()


def cmd_repl(args) -> int:
    try:
        config = load_project(args.project)
    except ProjectError as exc:
        print(exc, file=sys.stderr)
        return DIAGNOSTICS
    result = load_or_compile(config)
    for d in result.diagnostics:
        print(d.format(), file=sys.stderr)
    if not result.ok:
        return DIAGNOSTICS

    engine = build_engine(
        config,
        result.program,
        clock=WallClock(),
        output=lambda line: print(line, flush=True),
    )
    server = None
    port = args.debug_port if args.debug_port is not None else config.debug_port
    if port is not None:
        server = _attach_debug_server(engine, config, port)

    events: queue.Queue = queue.Queue()

    def read_input():
        for line in sys.stdin:
            events.put(("line", line.rstrip("\n")))
        events.put(("eof", ""))

    def tick():
        import time

        while True:
            time.sleep(0.05)
            events.put(("tick", ""))

    threading.Thread(target=read_input, daemon=True).start()
    threading.Thread(target=tick, daemon=True).start()

    engine.start()
    print("ready (dialogue acts like #Greeting(Meeting); :quit to exit)", flush=True)
    try:
        while True:
            kind, payload = events.get()
            if kind == "tick":
                engine.poll_timers()
                continue
            if kind == "eof" or payload.strip() == ":quit":
                break
            handle_repl_line(engine, payload)
    except KeyboardInterrupt:
        pass
    finally:
        if config.save_snapshot is not None:
            config.save_snapshot.write_text(engine.store.dump_snapshot())
            print(f"snapshot saved to {config.save_snapshot}", flush=True)
        if server is not None:
            server.stop()
    return OK


def handle_repl_line(engine, line: str) -> None:
    """One REPL input line; errors are reported and the loop continues."""
    line = line.strip()
    if not line:
        return
    try:
        if line.startswith("#"):
            engine.process_event(RecvEvent(parse_da(line, engine.store.schema)))
        elif line.startswith("set "):
            parts = line[len("set ") :].split(maxsplit=2)
            if len(parts) != 3:
                raise ScriptError("set needs <subject> <predicate> <value>")
            prefixes = engine.store.schema.all_prefixes()
            s = parse_term(parts[0], prefixes)
            p = parse_term(parts[1], prefixes)
            o = parse_term(parts[2], prefixes)
            if not isinstance(s, Resource) or not isinstance(p, Resource):
                raise ScriptError("set subject and predicate must be resources")
            engine.process_event(SetEvent(s, p, o))
        else:
            raise ScriptError(f"unrecognized input: {line!r}")
    except Exception as exc:
        print(f"error: {exc}", flush=True)


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.command == "compile":
        return cmd_compile(args)
    if args.command == "run":
        return cmd_run(args)
    return cmd_repl(args)


if __name__ == "__main__":
    sys.exit(main())
