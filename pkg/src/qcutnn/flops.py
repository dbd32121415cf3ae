"""Floating-point operation accounting for quantum-layer execution.

Convention: every executed item counts 2 FLOPs. Forward items are gate
instances, with boundary measure/re-encode gates included for cut graphs.
Backward items are the reverse-sweep gate visits plus one accumulation per
differentiated parameter or input slot, plus one propagation per boundary
link. The convention reproduces 12n forward FLOPs for the two-layer
benchmark circuit on n qubits.
"""
from __future__ import annotations

from dataclasses import dataclass

from .circuit import Circuit
from .cutting import SubcircuitGraph

FLOPS_PER_ITEM = 2


@dataclass(frozen=True)
class FlopsReport:
    forward: int
    backward: int
    subcircuits: tuple[tuple[int, int], ...] = ()  # per-subcircuit (forward, backward)

    @property
    def total(self) -> int:
        return self.forward + self.backward


def _circuit_forward(circuit: Circuit) -> int:
    return FLOPS_PER_ITEM * len(circuit.gates)


def _circuit_backward(circuit: Circuit) -> int:
    # reverse sweep revisits every gate, then accumulates one gradient entry
    # per parameter slot and per encoded input slot
    return FLOPS_PER_ITEM * (len(circuit.gates) + circuit.num_params + circuit.num_inputs)


def count_forward(target: Circuit | SubcircuitGraph) -> int:
    if isinstance(target, Circuit):
        return _circuit_forward(target)
    return sum(_circuit_forward(sub) for sub in target.subcircuits)


def count_backward(target: Circuit | SubcircuitGraph) -> int:
    if isinstance(target, Circuit):
        return _circuit_backward(target)
    per_sub = sum(_circuit_backward(sub) for sub in target.subcircuits)
    return per_sub + FLOPS_PER_ITEM * len(target.links)


def report(target: Circuit | SubcircuitGraph) -> FlopsReport:
    if isinstance(target, Circuit):
        return FlopsReport(_circuit_forward(target), _circuit_backward(target))
    breakdown = tuple((_circuit_forward(sub), _circuit_backward(sub)) for sub in target.subcircuits)
    return FlopsReport(count_forward(target), count_backward(target), breakdown)


def flops_table(ns=(4, 6, 8, 10), ms=(2, 3, 4), layers: int = 2) -> tuple[list[str], dict[str, FlopsReport]]:
    """Paper-style grid: each original circuit followed by its n-m cut variants."""
    from .circuit import build_ansatz
    from .cutting import design_cutting_points, generate_subcircuits

    columns: list[str] = []
    reports: dict[str, FlopsReport] = {}
    for n in ns:
        circuit = build_ansatz(n, layers=layers)
        columns.append(str(n))
        reports[str(n)] = report(circuit)
        for m in ms:
            if m >= n:
                continue
            graph = generate_subcircuits(circuit, design_cutting_points(circuit, m))
            label = f"{n}-{m}"
            columns.append(label)
            reports[label] = report(graph)
    return columns, reports
