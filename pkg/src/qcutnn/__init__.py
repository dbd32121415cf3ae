"""Train hybrid quantum-classical networks whose quantum layer is wire-cut
into subcircuits small enough for a limited-qubit device, without losing
end-to-end gradients."""

from .circuit import (Circuit, CircuitError, Gate, GateKind, build_ansatz,
                      circuit_from_text, circuit_to_text, dependency_graph,
                      make_circuit, priority_order)
from .cutting import (BoundaryLink, Cut, CutPlan, PlanMismatchError, PlanningError,
                      SubcircuitGraph, design_cutting_points, generate_subcircuits,
                      graph_from_json, graph_to_dot, plan_to_json, validate)
from .data import Dataset, DataFormatError, load_digits, load_mnist, split, subsample
from .flops import FlopsReport, count_backward, count_forward, flops_table
from .hqnn import (AdamState, DenseLayer, HybridModel, TrainingRecord, adam_step,
                   evaluate, forward, init_model, load_checkpoint, loss_and_grad,
                   save_checkpoint, train)
from .simulator import (CapacityError, DegenerateEncodingError, ExecutionResult,
                        GraphExecution, SequencingError, gradients, gradients_batch,
                        graph_gradients, graph_gradients_batch, parameter_shift,
                        run, run_amplitude, run_batch, run_graph, run_graph_batch)

__version__ = "0.1.0"
