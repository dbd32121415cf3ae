"""Dense statevector execution with analytic <Z> readout and exact gradients.

States are complex128 arrays whose last axis has length 2**q; wire 0 is the
most significant bit of the amplitude index. Every kernel accepts arbitrary
leading (batch) axes, so single-sample calls are batch-of-one. Gradients
come from a reverse adjoint sweep that undoes gates analytically; the
parameter-shift rule provides an independent cross-check path.

MeasureZ records <psi|Z_w|psi> at its position without collapsing the
state, keeping the whole pipeline differentiable.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, GateKind

DEFAULT_MAX_QUBITS = 16
MAX_QUBITS_ENV = "QCUT_MAX_QUBITS"


class CapacityError(ValueError):
    """Circuit needs more qubits than the simulator cap allows."""


class DegenerateEncodingError(ValueError):
    """Amplitude encoding of an all-zero feature vector is undefined."""


class SequencingError(RuntimeError):
    """Graph backward pass invoked without a matching forward execution."""


def max_qubits() -> int:
    raw = os.environ.get(MAX_QUBITS_ENV)
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{MAX_QUBITS_ENV} must be an integer, got {raw!r}") from None


def _check_capacity(q: int, cap: int | None) -> None:
    limit = max_qubits() if cap is None else cap
    if q > limit:
        raise CapacityError(
            f"{q}-qubit state exceeds the {limit}-qubit cap; cut the circuit "
            f"to a smaller device or raise {MAX_QUBITS_ENV}")


# --- gate kernels ---------------------------------------------------------
# A state array has shape lead + (2**q,). Kernels reshape the last axis to
# (pre, 2, post) around the target wire and return fresh arrays.

def _shape_coeffs(coeffs, state: np.ndarray):
    """Align per-sample (B,) coefficient arrays with the split state view."""
    target = state.ndim + 1
    return tuple(m.reshape(m.shape + (1,) * (target - m.ndim))
                 if isinstance(m, np.ndarray) and m.ndim else m
                 for m in coeffs)


def _apply_1q(state: np.ndarray, q: int, wire: int, coeffs) -> np.ndarray:
    m00, m01, m10, m11 = coeffs
    pre, post = 1 << wire, 1 << (q - wire - 1)
    view = state.reshape(state.shape[:-1] + (pre, 2, post))
    a0, a1 = view[..., 0, :], view[..., 1, :]
    out = np.empty_like(view)
    out[..., 0, :] = m00 * a0 + m01 * a1
    out[..., 1, :] = m10 * a0 + m11 * a1
    return out.reshape(state.shape)


def _apply_cnot(state: np.ndarray, q: int, control: int, target: int) -> np.ndarray:
    view = state.reshape(state.shape[:-1] + (2,) * q)
    nlead = view.ndim - q
    def idx(c_bit, t_bit):
        ix = [slice(None)] * view.ndim
        ix[nlead + control], ix[nlead + target] = c_bit, t_bit
        return tuple(ix)
    out = view.copy()
    out[idx(1, 0)] = view[idx(1, 1)]
    out[idx(1, 1)] = view[idx(1, 0)]
    return out.reshape(state.shape)


def _apply_z(state: np.ndarray, q: int, wire: int) -> np.ndarray:
    pre, post = 1 << wire, 1 << (q - wire - 1)
    out = state.reshape(state.shape[:-1] + (pre, 2, post)).copy()
    out[..., 1, :] *= -1
    return out.reshape(state.shape)


def _expect_z(state: np.ndarray, q: int, wire: int) -> np.ndarray:
    pre, post = 1 << wire, 1 << (q - wire - 1)
    probs = (state.real ** 2 + state.imag ** 2).reshape(state.shape[:-1] + (pre, 2, post))
    marginal = probs.sum(axis=(-3, -1))
    return marginal[..., 0] - marginal[..., 1]


def _rot_coeffs(kind: GateKind, theta):
    """2x2 rotation matrix entries; theta may be a scalar or a (B,) array."""
    if isinstance(theta, np.ndarray) and theta.ndim:
        c, s = np.cos(theta * 0.5), np.sin(theta * 0.5)
    else:
        half = float(theta) * 0.5
        c, s = math.cos(half), math.sin(half)
    if kind is GateKind.RX:
        return c, -1j * s, -1j * s, c
    if kind is GateKind.RY:
        return c, -s, s, c
    if kind is GateKind.RZ:
        return c - 1j * s, 0.0, 0.0, c + 1j * s
    raise ValueError(f"{kind.name} is not a rotation")


# U(theta)^dagger dU/dtheta = -i G / 2 for U = exp(-i theta G / 2), G in {X, Y, Z}
_GENERATOR_COEFFS = {
    GateKind.RX: (0.0, -0.5j, -0.5j, 0.0),
    GateKind.RY: (0.0, -0.5, 0.5, 0.0),
    GateKind.RZ: (-0.5j, 0.0, 0.0, 0.5j),
}


def _gate_angle(gate, params: np.ndarray, inputs: np.ndarray):
    """Rotation kind and angle for a 1-qubit gate; ENC acts as RX(input value)."""
    if gate.kind is GateKind.ENCODE:
        return GateKind.RX, inputs[:, gate.slot]
    return gate.kind, params[gate.slot]


# --- execution ------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionResult:
    outputs: np.ndarray  # (num_outputs,) <Z> values, each in [-1, 1]


def _check_args(circuit: Circuit, params, inputs_2d) -> tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=float)
    inputs_2d = np.asarray(inputs_2d, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ValueError(f"expected {circuit.num_params} params, got shape {params.shape}")
    if inputs_2d.ndim != 2 or inputs_2d.shape[1] != circuit.num_inputs:
        raise ValueError(f"expected inputs of shape (batch, {circuit.num_inputs}), got {inputs_2d.shape}")
    return params, inputs_2d


def _initial_state(batch: int, q: int) -> np.ndarray:
    state = np.zeros((batch, 1 << q), dtype=complex)
    state[:, 0] = 1.0
    return state


def _run_state(circuit: Circuit, params: np.ndarray, inputs: np.ndarray,
               state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = circuit.num_wires
    outputs = np.zeros((state.shape[0], circuit.num_outputs))
    for g in circuit.gates:
        if g.kind is GateKind.CNOT:
            state = _apply_cnot(state, q, g.wires[0], g.wires[1])
        elif g.kind is GateKind.MEASURE:
            outputs[:, g.slot] = _expect_z(state, q, g.wires[0])
        else:
            kind, theta = _gate_angle(g, params, inputs)
            state = _apply_1q(state, q, g.wires[0], _shape_coeffs(_rot_coeffs(kind, theta), state))
    drift = np.abs(np.einsum("...d,...d->...", state, state.conj()).real - 1.0).max()
    if drift > 2e-9:
        raise RuntimeError(f"statevector norm drifted by {drift:.3e}")
    return outputs, state


def run_batch(circuit: Circuit, params, inputs, *, cap: int | None = None) -> np.ndarray:
    """Execute one circuit on a (batch, num_inputs) input matrix; returns (batch, num_outputs)."""
    _check_capacity(circuit.num_wires, cap)
    params, inputs = _check_args(circuit, params, inputs)
    outputs, _ = _run_state(circuit, params, inputs, _initial_state(inputs.shape[0], circuit.num_wires))
    return outputs


def run(circuit: Circuit, params, inputs, *, cap: int | None = None) -> ExecutionResult:
    """Execute from |0...0>, reading each MeasureZ as a non-collapsing <Z>."""
    outputs = run_batch(circuit, params, np.asarray(inputs, dtype=float).reshape(1, -1), cap=cap)
    return ExecutionResult(outputs[0])


def _prepare_amplitudes(circuit: Circuit, features_2d: np.ndarray) -> np.ndarray:
    if not circuit.amplitude_encoded:
        raise ValueError("circuit is not flagged for amplitude encoding")
    dim = 1 << circuit.num_wires
    if features_2d.ndim != 2 or features_2d.shape[1] > dim:
        raise ValueError(f"need at most {dim} features for {circuit.num_wires} qubits, got shape {features_2d.shape}")
    norms = np.linalg.norm(features_2d, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateEncodingError("cannot amplitude-encode an all-zero feature vector")
    state = np.zeros((features_2d.shape[0], dim), dtype=complex)
    state[:, : features_2d.shape[1]] = features_2d / norms[:, None]
    return state


def run_amplitude_batch(circuit: Circuit, params, features, *, cap: int | None = None) -> np.ndarray:
    _check_capacity(circuit.num_wires, cap)
    features = np.asarray(features, dtype=float)
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ValueError(f"expected {circuit.num_params} params, got shape {params.shape}")
    state = _prepare_amplitudes(circuit, features)
    outputs, _ = _run_state(circuit, params, np.zeros((features.shape[0], 0)), state)
    return outputs


def run_amplitude(circuit: Circuit, params, features, *, cap: int | None = None) -> ExecutionResult:
    """Execute with the L2-normalized, zero-padded features as initial amplitudes."""
    outputs = run_amplitude_batch(circuit, params, np.asarray(features, dtype=float).reshape(1, -1), cap=cap)
    return ExecutionResult(outputs[0])


# --- adjoint gradients ----------------------------------------------------

def _reverse_sweep(circuit: Circuit, params: np.ndarray, inputs: np.ndarray,
                   final_state: np.ndarray):
    """Undo the gate sequence from the final state, accumulating exact Jacobians.

    A measurement's bra activates when the sweep passes its position, so
    mid-circuit readouts only feel the gates before them. Because undoing
    happens before the contribution, the tangent uses the constant matrix
    U^dagger dU = -iG/2 instead of the per-angle derivative. Returns the
    Jacobians plus the fully back-propagated kets and bras at the initial
    state (the latter drive the amplitude feature gradient).
    """
    q = circuit.num_wires
    batch, dim = final_state.shape
    # row 0 carries the ket; rows 1..O carry one bra per output slot
    combined = np.zeros((batch, circuit.num_outputs + 1, dim), dtype=complex)
    combined[:, 0, :] = final_state
    j_params = np.zeros((batch, circuit.num_outputs, circuit.num_params))
    j_inputs = np.zeros((batch, circuit.num_outputs, circuit.num_inputs))
    for g in reversed(circuit.gates):
        if g.kind is GateKind.MEASURE:
            combined[:, 1 + g.slot, :] = _apply_z(combined[:, 0, :], q, g.wires[0])
        elif g.kind is GateKind.CNOT:
            combined = _apply_cnot(combined, q, g.wires[0], g.wires[1])
        else:
            kind, theta = _gate_angle(g, params, inputs)
            undo = _rot_coeffs(kind, -theta if isinstance(theta, np.ndarray) else -float(theta))
            combined = _apply_1q(combined, q, g.wires[0], _shape_coeffs(undo, combined))
            tangent = _apply_1q(np.ascontiguousarray(combined[:, 0, :]), q, g.wires[0],
                                _GENERATOR_COEFFS[kind])
            contrib = 2.0 * np.real(np.einsum("bod,bd->bo", combined[:, 1:, :], tangent.conj()))
            if g.kind is GateKind.ENCODE:
                j_inputs[:, :, g.slot] += contrib
            else:
                j_params[:, :, g.slot] += contrib
    return j_params, j_inputs, combined[:, 0, :], combined[:, 1:, :]


def _adjoint_sweep(circuit: Circuit, params: np.ndarray, inputs: np.ndarray,
                   state: np.ndarray):
    outputs, ket = _run_state(circuit, params, inputs, state)
    j_params, j_inputs, ket0, bras0 = _reverse_sweep(circuit, params, inputs, ket)
    return outputs, j_params, j_inputs, ket0, bras0


def gradients_batch(circuit: Circuit, params, inputs, *, cap: int | None = None):
    """Outputs plus exact Jacobians d<Z>/d_params (B, O, P) and d<Z>/d_inputs (B, O, I)."""
    _check_capacity(circuit.num_wires, cap)
    params, inputs = _check_args(circuit, params, inputs)
    outputs, jp, jx, _, _ = _adjoint_sweep(circuit, params, inputs,
                                           _initial_state(inputs.shape[0], circuit.num_wires))
    return outputs, jp, jx


def gradients(circuit: Circuit, params, inputs, *, cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact Jacobians of every <Z> output w.r.t. every parameter and input value."""
    _, jp, jx = gradients_batch(circuit, params, np.asarray(inputs, dtype=float).reshape(1, -1), cap=cap)
    return jp[0], jx[0]


def gradients_amplitude_batch(circuit: Circuit, params, features, *, cap: int | None = None):
    """Outputs plus Jacobians w.r.t. params and the raw (pre-normalization) features."""
    _check_capacity(circuit.num_wires, cap)
    features = np.asarray(features, dtype=float)
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ValueError(f"expected {circuit.num_params} params, got shape {params.shape}")
    state0 = _prepare_amplitudes(circuit, features)
    outputs, jp, _, ket0, bras0 = _adjoint_sweep(circuit, params, np.zeros((features.shape[0], 0)), state0)
    # d<Z>/d(prepared amplitude_j) along real directions; prepared amplitudes are real.
    g = 2.0 * np.real(bras0)
    psi0 = np.real(ket0)
    norms = np.linalg.norm(features, axis=1)
    radial = np.einsum("bod,bd->bo", g, psi0)
    j_feat = (g[:, :, : features.shape[1]]
              - radial[:, :, None] * psi0[:, None, : features.shape[1]]) / norms[:, None, None]
    return outputs, jp, j_feat


def parameter_shift(circuit: Circuit, params, inputs, param_index: int, *,
                    cap: int | None = None) -> np.ndarray:
    """Gradient column for one parameter via [f(t + pi/2) - f(t - pi/2)] / 2."""
    params = np.asarray(params, dtype=float)
    if not 0 <= param_index < circuit.num_params:
        raise ValueError(f"param_index {param_index} outside 0..{circuit.num_params - 1}")
    carrier = next((g for g in circuit.gates if g.kind.is_rotation and g.slot == param_index), None)
    if carrier is None:
        raise ValueError(f"parameter {param_index} is not carried by a rotation gate")
    shifted = params.copy()
    shifted[param_index] = params[param_index] + np.pi / 2
    plus = run(circuit, shifted, inputs, cap=cap).outputs
    shifted[param_index] = params[param_index] - np.pi / 2
    minus = run(circuit, shifted, inputs, cap=cap).outputs
    return (plus - minus) / 2.0


# --- subcircuit-graph execution -------------------------------------------

BOUNDARY_MAPS = ("plain", "arccos")


def _boundary_encode(values: np.ndarray, mode: str) -> np.ndarray:
    if mode == "plain":
        return values
    if mode == "arccos":
        return np.arccos(np.clip(values, -1.0, 1.0))
    raise ValueError(f"unknown boundary map {mode!r}")


def _boundary_encode_deriv(values: np.ndarray, mode: str) -> np.ndarray:
    if mode == "plain":
        return np.ones_like(values)
    if mode == "arccos":
        clipped = np.clip(values, -1.0 + 1e-12, 1.0 - 1e-12)
        return -1.0 / np.sqrt(1.0 - clipped ** 2)
    raise ValueError(f"unknown boundary map {mode!r}")


@dataclass
class GraphExecution:
    """Forward record of a subcircuit-graph run; required by the backward pass."""
    outputs: np.ndarray             # (B, num_outputs) in original output-slot order
    sub_inputs: list[np.ndarray]    # per subcircuit, the encoded values actually fed
    sub_outputs: list[np.ndarray]   # per subcircuit, all <Z> readouts (boundary values included)
    boundary_map: str = "plain"
    sub_states: list[np.ndarray] | None = None  # per subcircuit, final statevectors


def run_graph_batch(graph, params, inputs, *, boundary_map: str = "plain",
                    cap: int | None = None) -> GraphExecution:
    """Execute subcircuits sequentially, feeding each producer <Z> into its consumer encoder."""
    params = np.asarray(params, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if params.shape != (graph.num_params,):
        raise ValueError(f"expected {graph.num_params} params, got shape {params.shape}")
    if inputs.ndim != 2 or inputs.shape[1] != graph.num_inputs:
        raise ValueError(f"expected inputs of shape (batch, {graph.num_inputs}), got {inputs.shape}")
    by_consumer = {link.consumer: link for link in graph.links}
    batch = inputs.shape[0]
    sub_inputs: list[np.ndarray] = []
    sub_outputs: list[np.ndarray] = []
    sub_states: list[np.ndarray] = []
    for k, sub in enumerate(graph.subcircuits):
        _check_capacity(sub.num_wires, cap)
        x = np.zeros((batch, sub.num_inputs))
        for slot in range(sub.num_inputs):
            origin = graph.external_inputs.get((k, slot))
            if origin is not None:
                x[:, slot] = inputs[:, origin]
            else:
                producer_sub, producer_slot = by_consumer[(k, slot)].producer
                x[:, slot] = _boundary_encode(sub_outputs[producer_sub][:, producer_slot], boundary_map)
        out, state = _run_state(sub, params[graph.param_maps[k]], x,
                                _initial_state(batch, sub.num_wires))
        sub_inputs.append(x)
        sub_outputs.append(out)
        sub_states.append(state)
    outputs = np.zeros((batch, graph.num_outputs))
    for original_slot, (k, slot) in graph.final_outputs.items():
        outputs[:, original_slot] = sub_outputs[k][:, slot]
    return GraphExecution(outputs, sub_inputs, sub_outputs, boundary_map, sub_states)


def run_graph(graph, params, inputs, *, boundary_map: str = "plain",
              cap: int | None = None) -> tuple[ExecutionResult, GraphExecution]:
    """Single-sample graph execution; returns final outputs plus the boundary-value cache."""
    execution = run_graph_batch(graph, params, np.asarray(inputs, dtype=float).reshape(1, -1),
                                boundary_map=boundary_map, cap=cap)
    return ExecutionResult(execution.outputs[0]), execution


def graph_gradients_batch(graph, params, inputs, upstream, execution: GraphExecution | None,
                          *, cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode chain rule across subcircuits.

    `upstream` is d_loss/d_outputs of shape (B, num_outputs); returns
    d_loss/d_params summed over the batch and d_loss/d_inputs per sample.
    """
    if execution is None:
        raise SequencingError("run_graph must be executed first; pass its GraphExecution here")
    if len(execution.sub_outputs) != len(graph.subcircuits):
        raise SequencingError("execution cache does not match this graph")
    params = np.asarray(params, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != execution.outputs.shape:
        raise ValueError(f"expected upstream of shape {execution.outputs.shape}, got {upstream.shape}")
    batch = upstream.shape[0]
    by_consumer = {link.consumer: link for link in graph.links}
    sensitivities = [np.zeros_like(out) for out in execution.sub_outputs]
    for original_slot, (k, slot) in graph.final_outputs.items():
        sensitivities[k][:, slot] += upstream[:, original_slot]
    d_params = np.zeros(graph.num_params)
    d_inputs = np.zeros((batch, graph.num_inputs))
    for k in reversed(range(len(graph.subcircuits))):
        sens = sensitivities[k]
        if not sens.any():
            continue
        sub = graph.subcircuits[k]
        sub_params = params[graph.param_maps[k]]
        if execution.sub_states is not None:
            jp, jx, _, _ = _reverse_sweep(sub, sub_params, execution.sub_inputs[k],
                                          execution.sub_states[k])
        else:
            _, jp, jx = gradients_batch(sub, sub_params, execution.sub_inputs[k], cap=cap)
        d_params[graph.param_maps[k]] += np.einsum("bop,bo->p", jp, sens)
        dx = np.einsum("boi,bo->bi", jx, sens)
        for slot in range(sub.num_inputs):
            origin = graph.external_inputs.get((k, slot))
            if origin is not None:
                d_inputs[:, origin] += dx[:, slot]
                continue
            producer_sub, producer_slot = by_consumer[(k, slot)].producer
            raw = execution.sub_outputs[producer_sub][:, producer_slot]
            sensitivities[producer_sub][:, producer_slot] += (
                dx[:, slot] * _boundary_encode_deriv(raw, execution.boundary_map))
    return d_params, d_inputs


def graph_gradients(graph, params, inputs, upstream, execution: GraphExecution | None,
                    *, cap: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Single-sample d_loss/d_params and d_loss/d_inputs given d_loss/d_outputs."""
    d_params, d_inputs = graph_gradients_batch(
        graph, params, np.asarray(inputs, dtype=float).reshape(1, -1),
        np.asarray(upstream, dtype=float).reshape(1, -1), execution, cap=cap)
    return d_params, d_inputs[0]
