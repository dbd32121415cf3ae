"""Greedy wire-cut planning and generation of device-sized subcircuits.

The planner walks the gates in priority order, repeatedly selecting up to m
wires and mapping every gate that fits and whose dependencies are already
mapped; a gate that fits but still waits on an unmapped dependency gets a
cut placed before it and its wire blocked for the rest of the current
subcircuit. The resulting assignment is the ground truth: wherever a
wire's quantum state crosses from one subcircuit to a later one, the
producer gains a <Z> measurement and the consumer a fresh angle-encoded
wire, linked classically. That measure-and-re-encode channel is an
approximate, trainable boundary, not exact state reconstruction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .circuit import (Circuit, CircuitError, Gate, GateKind, circuit_from_text,
                      circuit_to_text, dependency_graph, priority_order)


class PlanningError(RuntimeError):
    """The greedy loop made no progress (unreachable for well-formed circuits)."""


class PlanMismatchError(ValueError):
    """The plan does not belong to the given circuit."""


@dataclass(frozen=True)
class Cut:
    wire: int
    before_gate: int  # cut sits immediately before this gate on this wire


@dataclass(frozen=True)
class CutPlan:
    device_qubits: int
    cuts: tuple[Cut, ...]
    assignment: dict[int, int]  # gate id -> subcircuit index
    num_subcircuits: int


@dataclass(frozen=True)
class BoundaryLink:
    producer: tuple[int, int]  # (subcircuit index, output slot)
    consumer: tuple[int, int]  # (subcircuit index, input slot)
    original_wire: int


@dataclass
class SubcircuitGraph:
    subcircuits: list[Circuit]
    links: list[BoundaryLink]
    external_inputs: dict[tuple[int, int], int]   # (subcircuit, input slot) -> original input slot
    final_outputs: dict[int, tuple[int, int]]     # original output slot -> (subcircuit, output slot)
    wire_maps: list[list[int]]                    # per subcircuit: local wire -> original wire
    param_maps: list[list[int]]                   # per subcircuit: local param slot -> original slot
    original_wires: int = 0
    num_params: int = 0
    num_inputs: int = 0
    num_outputs: int = 0

    @property
    def num_cut_wires(self) -> int:
        return len(self.links)


def _select_wires(order: list[int], unmapped: set[int], by_id: dict[int, Gate], m: int) -> set[int]:
    """The m distinct wires touched by the earliest-priority unmapped gates."""
    selected: list[int] = []
    for gid in order:
        if gid not in unmapped:
            continue
        for w in by_id[gid].wires:
            if w not in selected:
                selected.append(w)
                if len(selected) == m:
                    return set(selected)
    return set(selected)


def design_cutting_points(circuit: Circuit, m: int) -> CutPlan:
    """Greedy assignment of every gate to a sequence of <=m-wire subcircuits."""
    if m < 2:
        raise ValueError(f"a {m}-qubit device cannot host a CNOT; need m >= 2")
    if circuit.amplitude_encoded:
        raise CircuitError("amplitude-encoded circuits cannot be cut: the state preparation "
                           "spans every wire; use angle encoding or run uncut")
    order = priority_order(circuit)
    preds = dependency_graph(circuit)
    by_id = circuit.gate_map()
    unmapped = set(by_id)
    assignment: dict[int, int] = {}
    cuts: list[Cut] = []
    cut_seen: set[tuple[int, int]] = set()
    subcircuit = 0
    while unmapped:
        selected = _select_wires(order, unmapped, by_id, m)
        blocked: set[int] = set()
        progressed = False
        for gid in order:
            if gid not in unmapped:
                continue
            g = by_id[gid]
            if any(w not in selected or w in blocked for w in g.wires):
                continue
            missing = [d for d in preds[gid] if d not in assignment]
            if not missing:
                assignment[gid] = subcircuit
                unmapped.remove(gid)
                progressed = True
            else:
                # cut before this gate on each wire it shares with a missing
                # dependency; later gates on those wires wait for the next round
                for d in missing:
                    for w in set(by_id[d].wires) & set(g.wires):
                        if (w, gid) not in cut_seen:
                            cut_seen.add((w, gid))
                            cuts.append(Cut(w, gid))
                            progressed = True
                        blocked.add(w)
        if not progressed:
            raise PlanningError(f"no gate mapped and no cut placed with {len(unmapped)} gates left")
        subcircuit += 1
    plan = CutPlan(m, tuple(cuts), assignment, subcircuit)
    _check_plan(circuit, plan)
    return plan


def _check_plan(circuit: Circuit, plan: CutPlan) -> None:
    by_id = circuit.gate_map()
    if set(plan.assignment) != set(by_id):
        raise PlanMismatchError("plan assignment does not cover exactly the circuit's gates")
    wires_per_sub: dict[int, set[int]] = {}
    for gid, k in plan.assignment.items():
        if not 0 <= k < plan.num_subcircuits:
            raise PlanMismatchError(f"gate {gid} assigned to out-of-range subcircuit {k}")
        wires_per_sub.setdefault(k, set()).update(by_id[gid].wires)
    for k, wires in wires_per_sub.items():
        if len(wires) > plan.device_qubits:
            raise PlanMismatchError(f"subcircuit {k} touches {len(wires)} > {plan.device_qubits} wires")
    for gid, ds in dependency_graph(circuit).items():
        for d in ds:
            if plan.assignment[d] > plan.assignment[gid]:
                raise PlanMismatchError(f"gate {gid} scheduled before its dependency {d}")


def generate_subcircuits(circuit: Circuit, plan: CutPlan) -> SubcircuitGraph:
    """Materialize the plan: remap wires locally and splice in the
    measure-and-re-encode boundaries wherever a wire changes subcircuit."""
    _check_plan(circuit, plan)
    num_subs = plan.num_subcircuits

    # wire crossings, from the assignment: consecutive gates on a wire that
    # sit in different subcircuits hand the state across a boundary
    entering: list[list[int]] = [[] for _ in range(num_subs)]  # wires re-encoded at start of sub k
    leaving: list[list[int]] = [[] for _ in range(num_subs)]   # wires measured at end of sub k
    crossings: list[tuple[int, int, int]] = []                 # (wire, producer sub, consumer sub)
    last_sub_on_wire: dict[int, int] = {}
    for g in circuit.gates:
        k = plan.assignment[g.id]
        for w in g.wires:
            prev = last_sub_on_wire.get(w)
            if prev is not None and prev != k:
                crossings.append((w, prev, k))
                leaving[prev].append(w)
                entering[k].append(w)
            last_sub_on_wire[w] = k

    subcircuits: list[Circuit] = []
    wire_maps: list[list[int]] = []
    param_maps: list[list[int]] = []
    external_inputs: dict[tuple[int, int], int] = {}
    final_outputs: dict[int, tuple[int, int]] = {}
    boundary_in: dict[tuple[int, int], int] = {}   # (sub, original wire) -> local input slot
    boundary_out: dict[tuple[int, int], int] = {}  # (sub, original wire) -> local output slot
    for k in range(num_subs):
        assigned = [g for g in circuit.gates if plan.assignment[g.id] == k]
        local: dict[int, int] = {}
        def local_wire(w: int) -> int:
            return local.setdefault(w, len(local))
        ops: list[tuple[GateKind, tuple[int, ...], int | None, Gate | None]] = []
        for w in sorted(entering[k]):
            ops.append((GateKind.ENCODE, (local_wire(w),), None, None))
        for g in assigned:
            ops.append((g.kind, tuple(local_wire(w) for w in g.wires), g.slot, g))
        for w in sorted(leaving[k]):
            ops.append((GateKind.MEASURE, (local_wire(w),), None, None))

        params: list[int] = []
        gates: list[Gate] = []
        n_inputs = n_outputs = 0
        original_wire = {v: w for w, v in local.items()}
        for kind, wires, slot, origin in ops:
            if kind.is_rotation:
                local_slot = len(params)
                params.append(slot)
            elif kind is GateKind.ENCODE:
                local_slot = n_inputs
                n_inputs += 1
                if origin is None:
                    boundary_in[(k, original_wire[wires[0]])] = local_slot
                else:
                    external_inputs[(k, local_slot)] = origin.slot
            elif kind is GateKind.MEASURE:
                local_slot = n_outputs
                n_outputs += 1
                if origin is None:
                    boundary_out[(k, original_wire[wires[0]])] = local_slot
                else:
                    final_outputs[origin.slot] = (k, local_slot)
            else:
                local_slot = None
            gates.append(Gate(len(gates), kind, wires, local_slot))
        subcircuits.append(Circuit(len(local), tuple(gates), len(params), n_inputs, n_outputs))
        wire_maps.append([original_wire[v] for v in range(len(local))])
        param_maps.append(params)

    links = [BoundaryLink((producer, boundary_out[(producer, w)]),
                          (consumer, boundary_in[(consumer, w)]), w)
             for w, producer, consumer in sorted(crossings, key=lambda c: (c[2], c[0]))]
    return SubcircuitGraph(subcircuits, links, external_inputs, final_outputs,
                           wire_maps, param_maps, circuit.num_wires,
                           circuit.num_params, circuit.num_inputs, circuit.num_outputs)


def validate(graph: SubcircuitGraph, m: int) -> list[str]:
    """Check every graph invariant; returns violation messages (empty = valid)."""
    violations: list[str] = []
    for k, sub in enumerate(graph.subcircuits):
        if sub.num_wires > m:
            violations.append(f"subcircuit {k} uses {sub.num_wires} > {m} wires")
        touched = {w for g in sub.gates for w in g.wires}
        if touched != set(range(sub.num_wires)):
            violations.append(f"subcircuit {k} has wires hosting no gate")
        try:
            Circuit(sub.num_wires, sub.gates, sub.num_params, sub.num_inputs, sub.num_outputs,
                    sub.amplitude_encoded)
        except CircuitError as exc:
            violations.append(f"subcircuit {k} is malformed: {exc}")
        if k < len(graph.wire_maps) and len(set(graph.wire_maps[k])) != sub.num_wires:
            violations.append(f"subcircuit {k} wire map does not cover its {sub.num_wires} wires")

    consumers: list[tuple[int, int]] = []
    for link in graph.links:
        if link.producer[0] >= link.consumer[0]:
            violations.append(f"link on wire {link.original_wire}: producer subcircuit "
                              f"{link.producer[0]} not before consumer {link.consumer[0]}")
        consumers.append(link.consumer)
    for consumer in set(consumers):
        if consumers.count(consumer) > 1:
            violations.append(f"consumer input {consumer} bound by multiple links")

    num_subs = len(graph.subcircuits)
    def in_range(k: int, slot: int, count_of) -> bool:
        return 0 <= k < num_subs and 0 <= slot < count_of(graph.subcircuits[k])
    for (k, slot) in list(graph.external_inputs) + [link.consumer for link in graph.links]:
        if not in_range(k, slot, lambda s: s.num_inputs):
            violations.append(f"input binding ({k}, {slot}) out of range")
    for (k, slot) in list(graph.final_outputs.values()) + [link.producer for link in graph.links]:
        if not in_range(k, slot, lambda s: s.num_outputs):
            violations.append(f"output binding ({k}, {slot}) out of range")

    externals = sorted(graph.external_inputs.values())
    if externals != list(range(graph.num_inputs)):
        violations.append(f"external inputs cover {externals}, expected 0..{graph.num_inputs - 1}")
    finals = sorted(graph.final_outputs)
    if finals != list(range(graph.num_outputs)):
        violations.append(f"final outputs cover {finals}, expected 0..{graph.num_outputs - 1}")
    bound_inputs = sorted(set(graph.external_inputs) | set(consumers))
    expected_inputs = sorted((k, s) for k, sub in enumerate(graph.subcircuits)
                             for s in range(sub.num_inputs))
    if bound_inputs != expected_inputs or len(graph.external_inputs) + len(consumers) != len(expected_inputs):
        violations.append("subcircuit input slots are not bound exactly once")

    flat_params = sorted(p for ps in graph.param_maps for p in ps)
    if flat_params != list(range(graph.num_params)):
        violations.append(f"param maps cover {flat_params}, expected 0..{graph.num_params - 1}")

    # replay order: a consumer must never read a value its producer has not emitted yet
    for link in graph.links:
        if link.producer[0] >= link.consumer[0]:
            violations.append(f"replay would read an unproduced value on wire {link.original_wire}")
    return violations


# --- serialization ---------------------------------------------------------

def graph_to_doc(graph: SubcircuitGraph) -> dict:
    return {
        "original": {
            "wires": graph.original_wires,
            "params": graph.num_params,
            "inputs": graph.num_inputs,
            "outputs": graph.num_outputs,
        },
        "subcircuits": [circuit_to_text(sub) for sub in graph.subcircuits],
        "links": [{"producer": list(link.producer), "consumer": list(link.consumer),
                   "wire": link.original_wire} for link in graph.links],
        "external_inputs": [[k, slot, origin] for (k, slot), origin in sorted(graph.external_inputs.items())],
        "final_outputs": [[origin, k, slot] for origin, (k, slot) in sorted(graph.final_outputs.items())],
        "wire_maps": graph.wire_maps,
        "param_maps": graph.param_maps,
    }


def graph_from_doc(doc: dict) -> SubcircuitGraph:
    return SubcircuitGraph(
        subcircuits=[circuit_from_text(block) for block in doc["subcircuits"]],
        links=[BoundaryLink(tuple(link["producer"]), tuple(link["consumer"]), link["wire"])
               for link in doc["links"]],
        external_inputs={(k, slot): origin for k, slot, origin in doc["external_inputs"]},
        final_outputs={origin: (k, slot) for origin, k, slot in doc["final_outputs"]},
        wire_maps=[list(wm) for wm in doc["wire_maps"]],
        param_maps=[list(pm) for pm in doc["param_maps"]],
        original_wires=doc["original"]["wires"],
        num_params=doc["original"]["params"],
        num_inputs=doc["original"]["inputs"],
        num_outputs=doc["original"]["outputs"],
    )


def plan_to_json(circuit: Circuit, plan: CutPlan, graph: SubcircuitGraph) -> str:
    doc = {
        "device_qubits": plan.device_qubits,
        "num_subcircuits": plan.num_subcircuits,
        "cuts": [{"wire": c.wire, "before_gate": c.before_gate} for c in plan.cuts],
        "assignment": [plan.assignment[gid] for gid in range(len(circuit.gates))],
        "original_circuit": circuit_to_text(circuit),
    }
    doc.update(graph_to_doc(graph))
    return json.dumps(doc, indent=2)


def graph_from_json(text: str) -> tuple[SubcircuitGraph, CutPlan | None]:
    doc = json.loads(text)
    graph = graph_from_doc(doc)
    plan = None
    if "device_qubits" in doc:
        plan = CutPlan(
            device_qubits=doc["device_qubits"],
            cuts=tuple(Cut(c["wire"], c["before_gate"]) for c in doc["cuts"]),
            assignment={gid: k for gid, k in enumerate(doc["assignment"])},
            num_subcircuits=doc["num_subcircuits"],
        )
    return graph, plan


def graph_to_dot(graph: SubcircuitGraph) -> str:
    """DOT rendering of the subcircuit dependency graph (edges = boundary links)."""
    lines = ["digraph subcircuits {", "  rankdir=LR;"]
    for k, sub in enumerate(graph.subcircuits):
        lines.append(f'  s{k} [shape=box label="subcircuit {k}\\n{sub.num_wires} wires, '
                     f'{len(sub.gates)} gates"];')
    for link in graph.links:
        lines.append(f'  s{link.producer[0]} -> s{link.consumer[0]} [label="w{link.original_wire}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
