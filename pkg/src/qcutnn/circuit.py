"""Quantum circuit IR: an ordered gate list with per-wire dependency chains.

A gate depends on the previous gate acting on each of its wires, so the
gate list itself induces the dependency DAG. Parameterized rotations read
from a flat parameter vector, angle encoders from a flat input vector, and
Z readouts write to a flat output vector, each addressed by a per-gate
slot index that is referenced exactly once.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum


class CircuitError(ValueError):
    """Structurally invalid circuit, or unparseable circuit text."""


class GateKind(Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    ENCODE = "ENC"    # angle-encode a classical input value, applied as RX(value)
    MEASURE = "MZ"    # non-collapsing <Z> readout into an output slot

    @property
    def num_wires(self) -> int:
        return 2 if self is GateKind.CNOT else 1

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @property
    def has_slot(self) -> bool:
        return self is not GateKind.CNOT


@dataclass(frozen=True)
class Gate:
    id: int
    kind: GateKind
    wires: tuple[int, ...]
    slot: int | None = None  # param slot (rotations), input slot (ENC), output slot (MZ)


@dataclass(frozen=True)
class Circuit:
    num_wires: int
    gates: tuple[Gate, ...]
    num_params: int
    num_inputs: int
    num_outputs: int
    amplitude_encoded: bool = False  # state preparation handled by the simulator, not gates

    def __post_init__(self):
        _check_circuit(self)

    @property
    def num_gates(self) -> int:
        return len(self.gates)

    def gate_map(self) -> dict[int, Gate]:
        return {g.id: g for g in self.gates}


def _check_circuit(c: Circuit) -> None:
    if c.num_wires < 1:
        raise CircuitError(f"circuit needs at least 1 wire, got {c.num_wires}")
    slots: dict[str, list[int]] = {"param": [], "input": [], "output": []}
    for g in c.gates:
        if len(g.wires) != g.kind.num_wires:
            raise CircuitError(f"gate {g.id}: {g.kind.name} takes {g.kind.num_wires} wires, got {len(g.wires)}")
        if len(set(g.wires)) != len(g.wires):
            raise CircuitError(f"gate {g.id}: repeated wire in {g.wires}")
        for w in g.wires:
            if not 0 <= w < c.num_wires:
                raise CircuitError(f"gate {g.id}: wire {w} outside 0..{c.num_wires - 1}")
        if g.kind.has_slot:
            if g.slot is None or g.slot < 0:
                raise CircuitError(f"gate {g.id}: {g.kind.name} needs a non-negative slot")
            category = "param" if g.kind.is_rotation else ("input" if g.kind is GateKind.ENCODE else "output")
            slots[category].append(g.slot)
        elif g.slot is not None:
            raise CircuitError(f"gate {g.id}: {g.kind.name} takes no slot")
    ids = sorted(g.id for g in c.gates)
    if ids != list(range(len(c.gates))):
        raise CircuitError("gate ids must be unique and dense 0..num_gates-1")
    for category, count in (("param", c.num_params), ("input", c.num_inputs), ("output", c.num_outputs)):
        if sorted(slots[category]) != list(range(count)):
            raise CircuitError(f"{category} slots must cover 0..{count - 1} exactly once, got {sorted(slots[category])}")
    if c.amplitude_encoded and c.num_inputs:
        raise CircuitError("amplitude-encoded circuits take their features as state amplitudes, not ENC gates")


def make_circuit(num_wires: int, ops: list[tuple[GateKind, tuple[int, ...], int | None]],
                 amplitude_encoded: bool = False) -> Circuit:
    """Build a circuit from (kind, wires, slot) triples, assigning ids by position."""
    gates = tuple(Gate(i, kind, tuple(wires), slot) for i, (kind, wires, slot) in enumerate(ops))
    counts = {"param": 0, "input": 0, "output": 0}
    for g in gates:
        if g.kind.is_rotation:
            counts["param"] = max(counts["param"], (g.slot or 0) + 1)
        elif g.kind is GateKind.ENCODE:
            counts["input"] = max(counts["input"], (g.slot or 0) + 1)
        elif g.kind is GateKind.MEASURE:
            counts["output"] = max(counts["output"], (g.slot or 0) + 1)
    return Circuit(num_wires, gates, counts["param"], counts["input"], counts["output"], amplitude_encoded)


def build_ansatz(n: int, layers: int = 2, encoder: str = "angle",
                 rotation: GateKind = GateKind.RX) -> Circuit:
    """Benchmark circuit: per-wire angle encoders (or an amplitude-preparation
    flag), `layers` repetitions of one parameterized rotation per wire plus a
    ring of CNOTs, and a final <Z> readout on every wire."""
    if n < 2:
        raise CircuitError(f"ansatz needs n >= 2 for the CNOT ring, got n={n}")
    if layers < 1:
        raise CircuitError(f"ansatz needs layers >= 1, got {layers}")
    if encoder not in ("angle", "amplitude"):
        raise CircuitError(f"unknown encoder {encoder!r}")
    if not rotation.is_rotation:
        raise CircuitError(f"{rotation.name} is not a rotation kind")
    ops: list[tuple[GateKind, tuple[int, ...], int | None]] = []
    if encoder == "angle":
        ops += [(GateKind.ENCODE, (w,), w) for w in range(n)]
    for layer in range(layers):
        ops += [(rotation, (w,), layer * n + w) for w in range(n)]
        ops += [(GateKind.CNOT, (w, (w + 1) % n), None) for w in range(n)]
    ops += [(GateKind.MEASURE, (w,), w) for w in range(n)]
    return make_circuit(n, ops, amplitude_encoded=(encoder == "amplitude"))


def dependency_graph(circuit: Circuit) -> dict[int, set[int]]:
    """Map each gate id to the ids of the previous gates on each of its wires."""
    preds: dict[int, set[int]] = {g.id: set() for g in circuit.gates}
    last: dict[int, int] = {}
    for g in circuit.gates:
        for w in g.wires:
            if w in last:
                preds[g.id].add(last[w])
            last[w] = g.id
    return preds


def priority_order(circuit: Circuit) -> list[int]:
    """Topological order of the dependency graph, smallest gate id first among ready gates."""
    preds = dependency_graph(circuit)
    succs: dict[int, list[int]] = {gid: [] for gid in preds}
    indegree = {gid: len(p) for gid, p in preds.items()}
    for gid, p in preds.items():
        for d in p:
            succs[d].append(gid)
    ready = [gid for gid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        gid = heapq.heappop(ready)
        order.append(gid)
        for s in succs[gid]:
            indegree[s] -= 1
            if indegree[s] == 0:
                heapq.heappush(ready, s)
    if len(order) != len(circuit.gates):  # unreachable from a well-formed gate list
        raise CircuitError("dependency cycle detected")
    return order


# Text format: header line `CIRCUIT n=<n> params=<p> inputs=<i> outputs=<o>`
# (plus ` encoding=amplitude` when flagged), then one gate per line:
# `<kind> <wire...> [slot]`, e.g. `RX 3 5`, `CNOT 0 1`, `MZ 2 2`.

_KIND_BY_TOKEN = {k.value: k for k in GateKind}


def circuit_to_text(circuit: Circuit) -> str:
    header = (f"CIRCUIT n={circuit.num_wires} params={circuit.num_params} "
              f"inputs={circuit.num_inputs} outputs={circuit.num_outputs}")
    if circuit.amplitude_encoded:
        header += " encoding=amplitude"
    lines = [header]
    for g in circuit.gates:
        parts = [g.kind.value] + [str(w) for w in g.wires]
        if g.kind.has_slot:
            parts.append(str(g.slot))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines or not lines[0].startswith("CIRCUIT"):
        raise CircuitError("line 1: expected header starting with CIRCUIT")
    fields = dict(tok.split("=", 1) for tok in lines[0].split()[1:] if "=" in tok)
    try:
        n = int(fields["n"])
        num_params = int(fields["params"])
        num_inputs = int(fields["inputs"])
        num_outputs = int(fields["outputs"])
    except (KeyError, ValueError) as exc:
        raise CircuitError(f"line 1: bad header field ({exc})") from None
    amplitude = fields.get("encoding") == "amplitude"
    ops = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        kind = _KIND_BY_TOKEN.get(tokens[0])
        if kind is None:
            raise CircuitError(f"line {lineno}: unknown gate kind {tokens[0]!r}")
        expected = kind.num_wires + (1 if kind.has_slot else 0)
        if len(tokens) - 1 != expected:
            raise CircuitError(f"line {lineno}: {kind.name} takes {expected} integers, got {len(tokens) - 1}")
        try:
            values = [int(t) for t in tokens[1:]]
        except ValueError:
            raise CircuitError(f"line {lineno}: non-integer field in {line!r}") from None
        wires = tuple(values[:kind.num_wires])
        slot = values[kind.num_wires] if kind.has_slot else None
        ops.append((kind, wires, slot))
    gates = tuple(Gate(i, kind, wires, slot) for i, (kind, wires, slot) in enumerate(ops))
    try:
        return Circuit(n, gates, num_params, num_inputs, num_outputs, amplitude)
    except CircuitError as exc:
        raise CircuitError(f"circuit body inconsistent with header: {exc}") from None
