from pathlib import Path

import pytest

from rudic.project import load_project
from rudic.runner import build_engine, compile_project

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def write_project(tmp_path, ontology: str, modules: dict, extra: str = "", name: str = "test"):
    """Materialize a throwaway project directory; returns the project file path."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    (tmp_path / "ontology.nt").write_text(ontology)
    top = None
    for mod_name, text in modules.items():
        (tmp_path / f"{mod_name}.rudi").write_text(text)
        if top is None:
            top = mod_name
    project = tmp_path / "project.yml"
    project.write_text(
        f"name: {name}\nontology: ontology.nt\nrules: {top}.rudi\n" + extra
    )
    return project


def compile_and_engine(project_path, clock=None, log_sink=None):
    config = load_project(project_path)
    result = compile_project(config)
    assert result.ok, "\n".join(d.format() for d in result.diagnostics)
    engine = build_engine(config, result.program, clock=clock, log_sink=log_sink)
    return config, result.program, engine


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS
