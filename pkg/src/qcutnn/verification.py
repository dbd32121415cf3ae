"""Independent reference paths used to cross-check the execution engine.

The reference simulator builds full 2**q x 2**q gate matrices by Kronecker
products and evaluates states and expectations with dense matrix algebra,
sharing no kernel code with the stride-based simulator. Together with
central finite differences it forms the oracle side of every dual-route
check; keep it boring and obviously correct.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .circuit import Circuit, Gate, GateKind, build_ansatz, make_circuit
from .cutting import design_cutting_points, generate_subcircuits
from . import simulator

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _rotation_matrix(kind: GateKind, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]])
    if kind is GateKind.RZ:
        return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]])
    raise ValueError(kind)


def _embed(factors: dict[int, np.ndarray], q: int) -> np.ndarray:
    """Kronecker product over all wires; wire 0 is the most significant factor."""
    return reduce(np.kron, [factors.get(w, _I2) for w in range(q)])


def gate_unitary(gate: Gate, q: int, params, inputs) -> np.ndarray:
    if gate.kind is GateKind.CNOT:
        control, target = gate.wires
        return _embed({control: _P0}, q) + _embed({control: _P1, target: _X}, q)
    if gate.kind is GateKind.ENCODE:
        return _embed({gate.wires[0]: _rotation_matrix(GateKind.RX, inputs[gate.slot])}, q)
    return _embed({gate.wires[0]: _rotation_matrix(gate.kind, params[gate.slot])}, q)


def reference_run(circuit: Circuit, params, inputs, initial_state=None) -> np.ndarray:
    """Evaluate the circuit by full dense matrix products."""
    q = circuit.num_wires
    if initial_state is None:
        state = np.zeros(1 << q, dtype=complex)
        state[0] = 1.0
    else:
        state = np.asarray(initial_state, dtype=complex)
    outputs = np.zeros(circuit.num_outputs)
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            z_full = _embed({g.wires[0]: _Z}, q)
            outputs[g.slot] = np.real(state.conj() @ z_full @ state)
        else:
            state = gate_unitary(g, q, params, inputs) @ state
    return outputs


def reference_run_amplitude(circuit: Circuit, params, features) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    state = np.zeros(1 << circuit.num_wires, dtype=complex)
    state[: features.size] = features / np.linalg.norm(features)
    return reference_run(circuit, params, np.zeros(0), initial_state=state)


def finite_difference_jacobians(circuit: Circuit, params, inputs, h: float = 1e-5):
    """Central-difference Jacobians of run() w.r.t. params and inputs."""
    params = np.asarray(params, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    jp = np.zeros((circuit.num_outputs, circuit.num_params))
    jx = np.zeros((circuit.num_outputs, circuit.num_inputs))
    for i in range(circuit.num_params):
        plus, minus = params.copy(), params.copy()
        plus[i] += h
        minus[i] -= h
        jp[:, i] = (simulator.run(circuit, plus, inputs).outputs
                    - simulator.run(circuit, minus, inputs).outputs) / (2 * h)
    for i in range(circuit.num_inputs):
        plus, minus = inputs.copy(), inputs.copy()
        plus[i] += h
        minus[i] -= h
        jx[:, i] = (simulator.run(circuit, params, plus).outputs
                    - simulator.run(circuit, params, minus).outputs) / (2 * h)
    return jp, jx


# --- random instances -------------------------------------------------------

def random_circuit(rng: np.random.Generator, max_wires: int = 6, max_gates: int = 40) -> Circuit:
    """Random well-formed circuit over the supported gate set; >=1 measurement."""
    q = int(rng.integers(1, max_wires + 1))
    count = int(rng.integers(1, max_gates + 1))
    kinds = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.ENCODE, GateKind.MEASURE]
    if q >= 2:
        kinds.append(GateKind.CNOT)
    slots = {"param": 0, "input": 0, "output": 0}
    ops: list[tuple[GateKind, tuple[int, ...], int | None]] = []
    for _ in range(count):
        kind = kinds[rng.integers(len(kinds))]
        wires = tuple(rng.choice(q, size=kind.num_wires, replace=False).tolist())
        if kind.is_rotation:
            slot, slots["param"] = slots["param"], slots["param"] + 1
        elif kind is GateKind.ENCODE:
            slot, slots["input"] = slots["input"], slots["input"] + 1
        elif kind is GateKind.MEASURE:
            slot, slots["output"] = slots["output"], slots["output"] + 1
        else:
            slot = None
        ops.append((kind, wires, slot))
    if slots["output"] == 0:
        ops.append((GateKind.MEASURE, (int(rng.integers(q)),), 0))
    return make_circuit(q, ops)


def random_arguments(rng: np.random.Generator, circuit: Circuit) -> tuple[np.ndarray, np.ndarray]:
    return (rng.uniform(-np.pi, np.pi, circuit.num_params),
            rng.uniform(-np.pi, np.pi, circuit.num_inputs))


# --- check suites -----------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_oracle_equivalence(num_circuits: int = 1000, seed: int = 0,
                             tol: float = 1e-10) -> CheckResult:
    """run() must match the dense matrix-product oracle on random circuits."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(num_circuits):
        circuit = random_circuit(rng)
        params, inputs = random_arguments(rng, circuit)
        got = simulator.run(circuit, params, inputs).outputs
        expected = reference_run(circuit, params, inputs)
        worst = max(worst, float(np.max(np.abs(got - expected), initial=0.0)))
        if np.any(np.abs(got) > 1.0 + 1e-10):
            return CheckResult("oracle-equivalence", False, "output escaped [-1, 1]")
    return CheckResult("oracle-equivalence", worst <= tol,
                       f"{num_circuits} circuits, max |diff| = {worst:.3e} (tol {tol:g})")


def check_gradient_consistency(num_circuits: int = 200, seed: int = 1,
                               shift_tol: float = 1e-10, fd_tol: float = 1e-5) -> CheckResult:
    """Adjoint gradients must match parameter-shift exactly and finite differences closely."""
    rng = np.random.default_rng(seed)
    worst_shift = worst_fd = 0.0
    for _ in range(num_circuits):
        circuit = random_circuit(rng, max_wires=5, max_gates=25)
        params, inputs = random_arguments(rng, circuit)
        jp, jx = simulator.gradients(circuit, params, inputs)
        for i in range(circuit.num_params):
            column = simulator.parameter_shift(circuit, params, inputs, i)
            worst_shift = max(worst_shift, float(np.max(np.abs(jp[:, i] - column), initial=0.0)))
        fd_p, fd_x = finite_difference_jacobians(circuit, params, inputs)
        worst_fd = max(worst_fd,
                       float(np.max(np.abs(jp - fd_p), initial=0.0)),
                       float(np.max(np.abs(jx - fd_x), initial=0.0)))
    passed = worst_shift <= shift_tol and worst_fd <= fd_tol
    return CheckResult("gradient-consistency", passed,
                       f"{num_circuits} circuits, max |adjoint-shift| = {worst_shift:.3e} "
                       f"(tol {shift_tol:g}), max |adjoint-fd| = {worst_fd:.3e} (tol {fd_tol:g})")


def check_zero_cut_identity(ns=(4, 6, 8, 10), seed: int = 2, tol: float = 1e-10) -> CheckResult:
    """With m >= n the cut pipeline must reproduce the uncut forward exactly."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in ns:
        circuit = build_ansatz(n)
        graph = generate_subcircuits(circuit, design_cutting_points(circuit, n))
        params = rng.uniform(0, 2 * np.pi, circuit.num_params)
        inputs = rng.uniform(-np.pi, np.pi, circuit.num_inputs)
        direct = simulator.run(circuit, params, inputs).outputs
        composed, _ = simulator.run_graph(graph, params, inputs)
        worst = max(worst, float(np.max(np.abs(direct - composed.outputs))))
    return CheckResult("zero-cut-identity", worst <= tol,
                       f"n in {tuple(ns)}, max |diff| = {worst:.3e} (tol {tol:g})")


def run_all_checks(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    scale = (200, 50) if quick else (1000, 200)
    return [
        check_oracle_equivalence(num_circuits=scale[0], seed=seed),
        check_gradient_consistency(num_circuits=scale[1], seed=seed + 1),
        check_zero_cut_identity(seed=seed + 2),
    ]
