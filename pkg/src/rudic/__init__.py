"""rudic: a compiler and reactive runtime for ontology-based dialogue rules.

The pipeline: `.rudi` rule files parse to an AST, are type-checked against
an RDF-style class/property schema, and lower to a portable IR that the
engine evaluates to a fixed point over a temporal tuple store.  Proposals
go through a pluggable selection component; a debug server streams
per-rule condition evaluations to remote clients.
"""

from .dacts import DialogueAct, format_da, parse_da, subsumes
from .engine import Engine, EngineRuntimeError, IterationLimitExceeded, SimulatedClock
from .ir import IRProgram, dump_program, load_program
from .lower import lower_program
from .parser import parse_module
from .project import ProjectConfig, load_project
from .runner import build_engine, compile_project, parse_script, run_script
from .store import OntologySchema, Resource, TupleStore, load_ontology
from .typecheck import check_program, check_single_module

__version__ = "0.1.0"

__all__ = [
    "DialogueAct",
    "Engine",
    "EngineRuntimeError",
    "IRProgram",
    "IterationLimitExceeded",
    "OntologySchema",
    "ProjectConfig",
    "Resource",
    "SimulatedClock",
    "TupleStore",
    "build_engine",
    "check_program",
    "check_single_module",
    "compile_project",
    "dump_program",
    "format_da",
    "load_ontology",
    "load_program",
    "load_project",
    "lower_program",
    "parse_da",
    "parse_module",
    "parse_script",
    "run_script",
    "subsumes",
    "__version__",
]
