"""Quantum branching programs: model, validation, simulation, transforms,
program families, gate-set tools, lower-bound analysis and a small QTM
compiler."""
from .model import (SINK_LABELS, BranchingProgram, Edge, Node, ProgramBuilder, ProgramFormatError,
                    all_assignments, load_program, parse_program, save_program, serialize_program,
                    with_mode)
from .semantics import (absolute_probabilities, classical_eval, complete_unitary, evolve, evolve_gm,
                        running_times)
from .validate import ValidationReport, Violation, validate_program

__version__ = "0.1.0"

__all__ = [
    "SINK_LABELS",
    "BranchingProgram",
    "Edge",
    "Node",
    "ProgramBuilder",
    "ProgramFormatError",
    "all_assignments",
    "load_program",
    "parse_program",
    "save_program",
    "serialize_program",
    "with_mode",
    "absolute_probabilities",
    "classical_eval",
    "complete_unitary",
    "evolve",
    "evolve_gm",
    "running_times",
    "ValidationReport",
    "Violation",
    "validate_program",
]
