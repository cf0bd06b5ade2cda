"""Project file loading and validation.

A project is a small YAML file naming the ontology, the top-level rule
file, the selection component, iteration caps, the guard mode for chain
comparisons, extension-function signatures and the debug port.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

GUARD_MODES = ("strict", "defaulting")
SELECTION_KINDS = ("first", "random", "external")


class ProjectError(Exception):
    pass


@dataclass
class SelectionConfig:
    kind: str = "first"
    seed: int = 0
    command: str | None = None
    host: str | None = None
    port: int | None = None
    timeout_ms: int = 500
    features: list = field(default_factory=list)  # "subject predicate" qname pairs


@dataclass
class FunctionDecl:
    name: str
    params: list
    returns: str
    pure: bool = True
    python: str | None = None  # "module:attr" implementing the function


@dataclass
class ProjectConfig:
    name: str
    root: Path
    ontology: Path
    rules: Path
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    max_iterations: int = 100
    max_rounds: int = 10
    bare_chain_guards: str = "strict"
    builtin_dacts: bool = True
    debug_port: int | None = None
    functions: list = field(default_factory=list)  # of FunctionDecl
    save_snapshot: Path | None = None

    @property
    def top_module(self) -> str:
        return self.rules.stem

    def artifact_path(self) -> Path:
        return self.root / f"{self.name}.rudic"


def _require(data: dict, key: str, path: Path):
    if key not in data:
        raise ProjectError(f"{path}: missing required key '{key}'")
    return data[key]


def load_project(path: str | Path) -> ProjectConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ProjectError(f"cannot read project file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ProjectError(f"{path}: malformed project file: {exc}") from exc
    if not isinstance(data, dict):
        raise ProjectError(f"{path}: project file must be a key-value mapping")

    root = path.parent
    ontology = root / str(_require(data, "ontology", path))
    rules_value = _require(data, "rules", path)
    if isinstance(rules_value, list):
        raise ProjectError(f"{path}: exactly one top-level rule file is required")
    rules = root / str(rules_value)
    for p, what in ((ontology, "ontology"), (rules, "rules")):
        if not p.is_file():
            raise ProjectError(f"{path}: {what} file does not exist: {p}")

    sel_data = data.get("selection") or {}
    if not isinstance(sel_data, dict):
        raise ProjectError(f"{path}: 'selection' must be a mapping")
    selection = SelectionConfig(
        kind=str(sel_data.get("kind", "first")),
        seed=int(sel_data.get("seed", 0)),
        command=sel_data.get("command"),
        host=sel_data.get("host"),
        port=sel_data.get("port"),
        timeout_ms=int(sel_data.get("timeout_ms", 500)),
        features=list(sel_data.get("features", [])),
    )
    if selection.kind not in SELECTION_KINDS:
        raise ProjectError(f"{path}: unknown selection kind '{selection.kind}'")
    if selection.kind == "external" and not (selection.command or selection.port):
        raise ProjectError(f"{path}: external selection needs 'command' or 'host'/'port'")

    guards = str(data.get("bare_chain_guards", "strict"))
    if guards not in GUARD_MODES:
        raise ProjectError(
            f"{path}: bare_chain_guards must be one of {', '.join(GUARD_MODES)}"
        )

    functions = []
    for entry in data.get("functions", []) or []:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ProjectError(f"{path}: malformed function declaration: {entry!r}")
        functions.append(
            FunctionDecl(
                name=str(entry["name"]),
                params=[str(p) for p in entry.get("params", [])],
                returns=str(entry.get("returns", "void")),
                pure=bool(entry.get("pure", True)),
                python=entry.get("python"),
            )
        )

    snapshot = data.get("save_snapshot")
    return ProjectConfig(
        name=str(data.get("name", path.parent.name)),
        root=root,
        ontology=ontology,
        rules=rules,
        selection=selection,
        max_iterations=int(data.get("max_iterations", 100)),
        max_rounds=int(data.get("max_rounds", 10)),
        bare_chain_guards=guards,
        builtin_dacts=bool(data.get("builtin_dacts", True)),
        debug_port=int(data["debug_port"]) if "debug_port" in data else None,
        functions=functions,
        save_snapshot=root / str(snapshot) if snapshot else None,
    )
