import subprocess
import sys
from pathlib import Path

import pytest

from conftest import write_project
from rudic.cli import main
from rudic.dacts import parse_da
from rudic.engine import RecvEvent
from rudic.project import ProjectError, load_project
from rudic.runner import build_engine, compile_project, run_project
from rudic.store import EMITTED_PROP, RECEIVED_PROP


def copy_corpus_project(corpus_dir, name, tmp_path):
    src = corpus_dir / name
    dst = tmp_path / name
    dst.mkdir()
    for item in src.rglob("*"):
        rel = item.relative_to(src)
        if item.is_dir():
            (dst / rel).mkdir()
        else:
            (dst / rel).write_text(item.read_text())
    return dst / "project.yml"


# ---------------------------------------------------------------------------
# project loading
# ---------------------------------------------------------------------------


def test_missing_file_rejected(tmp_path):
    (tmp_path / "project.yml").write_text("name: x\nontology: none.nt\nrules: none.rudi\n")
    with pytest.raises(ProjectError, match="does not exist"):
        load_project(tmp_path / "project.yml")


def test_multiple_rule_files_rejected(tmp_path):
    (tmp_path / "ontology.nt").write_text("")
    (tmp_path / "a.rudi").write_text("")
    (tmp_path / "project.yml").write_text(
        "name: x\nontology: ontology.nt\nrules: [a.rudi, b.rudi]\n"
    )
    with pytest.raises(ProjectError, match="exactly one"):
        load_project(tmp_path / "project.yml")


def test_bad_guard_mode_rejected(tmp_path):
    write_project(tmp_path, "", {"main": ""}, extra="bare_chain_guards: sloppy\n")
    with pytest.raises(ProjectError, match="bare_chain_guards"):
        load_project(tmp_path / "project.yml")


# ---------------------------------------------------------------------------
# CLI exit codes and transcripts
# ---------------------------------------------------------------------------


def test_compile_writes_artifact(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    assert main(["compile", str(project)]) == 0
    artifact = project.parent / "greeting.rudic"
    assert artifact.is_file()
    # recompiling an unchanged project yields identical bytes
    first = artifact.read_bytes()
    assert main(["compile", str(project)]) == 0
    assert artifact.read_bytes() == first


def test_compile_reports_diagnostics_with_exit_1(tmp_path, capsys):
    write_project(tmp_path, "", {"main": "r: if (ghost.prop) { x = 1; }\n"})
    code = main(["compile", str(tmp_path / "project.yml")])
    captured = capsys.readouterr()
    assert code == 1
    assert "error" in captured.err


def test_broken_import_exits_1(tmp_path, capsys):
    write_project(tmp_path, "", {"main": "import missing;\n"})
    assert main(["compile", str(tmp_path / "project.yml")]) == 1


def test_run_greet_back(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    script = project.parent / "scripts" / "greet_back.script"
    assert main(["run", str(project), "--script", str(script)]) == 0
    out = capsys.readouterr().out
    assert out == "1000 emit #ReturnGreeting(Meeting, name=Joe)\n"


def test_run_initiative(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    script = project.parent / "scripts" / "initiative.script"
    assert main(["run", str(project), "--script", str(script)]) == 0
    out = capsys.readouterr().out
    assert out == "7000 emit #InitialGreeting(Meeting, name=Joe)\n"


def test_run_uses_artifact_from_compile(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    main(["compile", str(project)])
    capsys.readouterr()
    script = project.parent / "scripts" / "greet_back.script"
    assert main(["run", str(project), "--script", str(script)]) == 0
    assert "ReturnGreeting" in capsys.readouterr().out


def test_runtime_error_exits_2(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "divergent", tmp_path)
    script = project.parent / "boom.script"
    script.write_text("@100\n")
    code = main(["run", str(project), "--script", str(script)])
    captured = capsys.readouterr()
    assert code == 2
    assert "fixed point" in captured.err


def test_script_parse_error_exits_2(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    script = project.parent / "bad.script"
    script.write_text("frobnicate everything\n")
    assert main(["run", str(project), "--script", str(script)]) == 2


# ---------------------------------------------------------------------------
# snapshots and multi-session behaviour
# ---------------------------------------------------------------------------


def test_snapshot_round_trip_via_cli(corpus_dir, tmp_path, capsys):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    script = project.parent / "scripts" / "greet_back.script"
    snap1 = tmp_path / "s1.snap"
    assert main(["run", str(project), "--script", str(script), "--save", str(snap1)]) == 0
    capsys.readouterr()

    # loading and immediately saving must preserve the bytes exactly
    empty = project.parent / "empty.script"
    empty.write_text("")
    snap2 = tmp_path / "s2.snap"
    assert (
        main(
            [
                "run",
                str(project),
                "--script",
                str(empty),
                "--load",
                str(snap1),
                "--save",
                str(snap2),
            ]
        )
        == 0
    )
    capsys.readouterr()
    text1 = snap1.read_text()
    text2 = snap2.read_text()
    # session 2 appends its own facts after the preserved session-1 lines
    lines1 = [l for l in text1.splitlines() if not l.startswith("#!")]
    lines2 = [l for l in text2.splitlines() if not l.startswith("#!")]
    assert lines2[: len(lines1)] == lines1


def test_second_session_sees_history_but_not_in_session_predicates(corpus_dir, tmp_path):
    config = load_project(copy_corpus_project(corpus_dir, "greeting", tmp_path))
    compiled = compile_project(config)

    engine1 = build_engine(config, compiled.program)
    engine1.start()
    engine1.advance_clock(1000)
    engine1.process_event(RecvEvent(parse_da("#Greeting(Meeting)", engine1.store.schema)))
    assert engine1.transcript
    snap = tmp_path / "session1.snap"
    snap.write_text(engine1.store.dump_snapshot())

    engine2 = build_engine(config, compiled.program, snapshot=snap)
    engine2.start()
    # session 1 history is still queryable in the store
    emitted = engine2.store.query((None, EMITTED_PROP, None))
    received = engine2.store.query((None, RECEIVED_PROP, None))
    assert emitted and received
    # but the in-session predicates are scoped to the fresh session
    schema = engine2.store.schema
    assert not engine2.history.said_in_session(parse_da("#Greeting(Meeting)", schema))
    assert not engine2.history.received_in_session(parse_da("#Greeting(Meeting)", schema))
    # so the agent reacts to a greeting again
    engine2.advance_clock(500)
    engine2.process_event(RecvEvent(parse_da("#Greeting(Meeting)", schema)))
    assert any("ReturnGreeting" in line for line in engine2.transcript)


def test_snapshot_preserves_tuple_times(corpus_dir, tmp_path):
    config = load_project(copy_corpus_project(corpus_dir, "greeting", tmp_path))
    compiled = compile_project(config)
    engine = build_engine(config, compiled.program)
    engine.start()
    engine.advance_clock(1234)
    engine.process_event(RecvEvent(parse_da("#Greeting(Meeting)", engine.store.schema)))
    snap = tmp_path / "s.snap"
    snap.write_text(engine.store.dump_snapshot())

    engine2 = build_engine(config, compiled.program, snapshot=snap)
    assert engine2.store.facts == engine.store.facts


# ---------------------------------------------------------------------------
# run with guard-mode flag differences
# ---------------------------------------------------------------------------


def test_defaulting_mode_sets_missing_age(corpus_dir, tmp_path):
    ontology = (corpus_dir / "age_default" / "ontology.nt").read_text()
    src = (corpus_dir / "age_default" / "age_default.rudi").read_text()
    ns = "http://example.org/greeting#"

    from rudic.store import Resource

    # strict: the comparison is unreachable while age is absent
    strict_proj = write_project(tmp_path / "strict", ontology, {"main": src})
    config = load_project(strict_proj)
    engine = build_engine(config, compile_project(config).program)
    engine.start()
    user = engine.globals["user"]
    assert engine.store.latest_value(user, Resource(ns + "age")) is None

    # defaulting: a missing link satisfies the comparison, so the default lands
    dflt_proj = write_project(
        tmp_path / "dflt", ontology, {"main": src}, extra="bare_chain_guards: defaulting\n"
    )
    config2 = load_project(dflt_proj)
    engine2 = build_engine(config2, compile_project(config2).program)
    engine2.start()
    user2 = engine2.globals["user"]
    assert engine2.store.latest_value(user2, Resource(ns + "age")) == 15


# ---------------------------------------------------------------------------
# repl (subprocess smoke test)
# ---------------------------------------------------------------------------


def test_repl_handles_lines_and_quit(corpus_dir, tmp_path):
    project = copy_corpus_project(corpus_dir, "greeting", tmp_path)
    with open(project, "a") as f:
        f.write("save_snapshot: memory.snap\n")
    proc = subprocess.run(
        [sys.executable, "-m", "rudic.cli", "repl", str(project)],
        input="#Greeting(Meeting)\nbogus input\n:quit\n",
        capture_output=True,
        text=True,
        timeout=30,
    )
    assert proc.returncode == 0
    assert "emit #ReturnGreeting(Meeting, name=Joe)" in proc.stdout
    assert "error:" in proc.stdout  # malformed line reported, loop continued
    assert (project.parent / "memory.snap").is_file()  # saved on :quit


def test_repl_wall_clock_fires_timeouts(tmp_path):
    ontology = """\
@prefix : <http://example.org/nudge#> .
:Probe rdf:type rdfs:Class .
"""
    src = (
        "nudge: if (!saidInSession(#Inform(Statement))) {\n"
        '  timeout("nudge_user", 300) {\n'
        '    emitDA(#Inform(Statement, text="still there?"));\n'
        "  }\n"
        "}\n"
    )
    project = write_project(tmp_path, ontology, {"main": src})
    proc = subprocess.Popen(
        [sys.executable, "-m", "rudic.cli", "repl", str(project)],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )
    try:
        import time

        time.sleep(2.0)  # idle long enough for the 300 ms timeout to fire
        out, _ = proc.communicate(input=":quit\n", timeout=20)
    finally:
        if proc.poll() is None:
            proc.kill()
    assert 'emit #Inform(Statement, text="still there?")' in out


def test_session_event_starts_fresh_session(corpus_dir):
    from rudic.engine import SessionEvent

    config = load_project(corpus_dir / "greeting" / "project.yml")
    compiled = compile_project(config)
    engine = build_engine(config, compiled.program)
    engine.start()
    engine.advance_clock(1000)
    engine.process_event(RecvEvent(parse_da("#Greeting(Meeting)", engine.store.schema)))
    assert engine.transcript  # answered in session 1
    schema = engine.store.schema
    assert engine.history.said_in_session(parse_da("#Greeting", schema))
    engine.process_event(SessionEvent())
    assert not engine.history.said_in_session(parse_da("#Greeting", schema))
