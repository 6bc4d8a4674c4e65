"""Constant-depth dynamic circuits: builders, a sparse simulator and a resource audit."""
from .ir import (ClassicalCondition, ClassicalRegister, CircuitError, DynamicCircuit, Gate, Instruction, Kind,
                 Measure, QuantumRegister, Reset, Role, validate)
from .sim import SparseState, run_all_branches, run_shot

__all__ = [
    "ClassicalCondition", "ClassicalRegister", "CircuitError", "DynamicCircuit", "Gate", "Instruction", "Kind",
    "Measure", "QuantumRegister", "Reset", "Role", "validate", "SparseState", "run_all_branches", "run_shot",
]
