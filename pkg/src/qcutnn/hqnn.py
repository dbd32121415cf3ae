"""Hybrid dense-quantum-dense classifier with end-to-end reverse-mode training.

The quantum layer is either a single circuit or a cut subcircuit graph; in
both cases the loss gradient reaches every trainable parameter, including
rotation parameters inside every subcircuit. Softmax is fused into the
cross-entropy loss for numerical stability; the output layer emits raw
logits.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import Circuit, circuit_from_text, circuit_to_text
from .cutting import SubcircuitGraph, graph_from_doc, graph_to_doc
from . import simulator


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"inconsistent dense shapes {self.weights.shape} / {self.bias.shape}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("dense layer has non-finite entries")


def _quantum_widths(quantum: Circuit | SubcircuitGraph, encoder: str) -> tuple[int, int]:
    """(input width fed by dense_in, output width feeding dense_out)."""
    if isinstance(quantum, Circuit):
        n = quantum.num_wires
        return (n if encoder == "amplitude" else quantum.num_inputs), quantum.num_outputs
    return quantum.num_inputs, quantum.num_outputs


@dataclass
class HybridModel:
    dense_in: DenseLayer
    quantum: Circuit | SubcircuitGraph
    dense_out: DenseLayer
    encoder: str = "angle"  # "angle" | "amplitude"; amplitude requires an uncut circuit
    quantum_params: np.ndarray | None = None
    boundary_map: str = "plain"  # how cut-boundary <Z> values become re-encoding angles

    def __post_init__(self):
        if self.encoder not in ("angle", "amplitude"):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if self.encoder == "amplitude" and not (
                isinstance(self.quantum, Circuit) and self.quantum.amplitude_encoded):
            raise ValueError("amplitude encoder needs an uncut amplitude-flagged circuit")
        q_in, q_out = _quantum_widths(self.quantum, self.encoder)
        if self.dense_in.weights.shape[0] != q_in:
            raise ValueError(f"dense_in emits {self.dense_in.weights.shape[0]} values, quantum layer takes {q_in}")
        if self.dense_out.weights.shape[1] != q_out:
            raise ValueError(f"quantum layer emits {q_out} values, dense_out takes {self.dense_out.weights.shape[1]}")

    @property
    def num_quantum_params(self) -> int:
        return self.quantum.num_params

    @property
    def feature_dim(self) -> int:
        return self.dense_in.weights.shape[1]

    @property
    def num_classes(self) -> int:
        return self.dense_out.weights.shape[0]

    def _sizes(self) -> list[int]:
        return [self.dense_in.weights.size, self.dense_in.bias.size, self.num_quantum_params,
                self.dense_out.weights.size, self.dense_out.bias.size]

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.dense_in.weights.ravel(), self.dense_in.bias,
                               self.quantum_params,
                               self.dense_out.weights.ravel(), self.dense_out.bias])

    def set_params(self, flat: np.ndarray) -> None:
        sizes = self._sizes()
        if flat.shape != (sum(sizes),):
            raise ValueError(f"expected {sum(sizes)} parameters, got shape {flat.shape}")
        w_in, b_in, q, w_out, b_out = np.split(flat, np.cumsum(sizes)[:-1])
        self.dense_in.weights = w_in.reshape(self.dense_in.weights.shape)
        self.dense_in.bias = b_in
        self.quantum_params = q
        self.dense_out.weights = w_out.reshape(self.dense_out.weights.shape)
        self.dense_out.bias = b_out

    def quantum_slice(self) -> slice:
        sizes = self._sizes()
        start = sizes[0] + sizes[1]
        return slice(start, start + sizes[2])


def _rotation_init_limit(quantum: Circuit | SubcircuitGraph) -> float:
    """Glorot-style bound for the rotation angles, treated as an (layers, wires) tensor.

    Small initial angles keep long measure-and-re-encode chains transparent
    at the start of training; uniform [0, 2pi) angles make deep cut graphs
    start from a scrambled signal and converge far slower.
    """
    wires = quantum.num_wires if isinstance(quantum, Circuit) else quantum.original_wires
    layers = max(1, round(quantum.num_params / max(wires, 1)))
    return math.sqrt(6.0 / (layers + wires))


def init_model(quantum: Circuit | SubcircuitGraph, feature_dim: int, num_classes: int = 10,
               seed: int = 0, encoder: str = "angle", boundary_map: str = "plain",
               quantum_init: str = "glorot") -> HybridModel:
    """Seeded init: dense weights uniform in +-sqrt(1/fan_in); quantum angles
    glorot-small by default, or uniform in [0, 2pi) with quantum_init="uniform_2pi"."""
    rng = np.random.default_rng(seed)
    q_in, q_out = _quantum_widths(quantum, encoder)
    def dense(out_dim: int, in_dim: int) -> DenseLayer:
        bound = np.sqrt(1.0 / in_dim)
        return DenseLayer(rng.uniform(-bound, bound, (out_dim, in_dim)),
                          rng.uniform(-bound, bound, out_dim))
    model = HybridModel(dense(q_in, feature_dim), quantum, dense(num_classes, q_out), encoder,
                        boundary_map=boundary_map)
    if quantum_init == "glorot":
        limit = _rotation_init_limit(quantum)
        model.quantum_params = rng.uniform(-limit, limit, quantum.num_params)
    elif quantum_init == "uniform_2pi":
        model.quantum_params = rng.uniform(0.0, 2.0 * np.pi, quantum.num_params)
    else:
        raise ValueError(f"unknown quantum_init {quantum_init!r}")
    return model


def _quantum_forward(model: HybridModel, z: np.ndarray):
    """Quantum outputs (B, q_out) plus the cache needed for the backward pass."""
    if isinstance(model.quantum, SubcircuitGraph):
        execution = simulator.run_graph_batch(model.quantum, model.quantum_params, z,
                                              boundary_map=model.boundary_map)
        return execution.outputs, execution
    if model.encoder == "amplitude":
        return simulator.run_amplitude_batch(model.quantum, model.quantum_params, z), None
    return simulator.run_batch(model.quantum, model.quantum_params, z), None


def forward(model: HybridModel, batch: np.ndarray):
    """Logits (B, classes) plus the activation cache (dense_in outputs, quantum outputs)."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != model.feature_dim:
        raise ValueError(f"expected batch of shape (B, {model.feature_dim}), got {batch.shape}")
    z = batch @ model.dense_in.weights.T + model.dense_in.bias
    q, execution = _quantum_forward(model, z)
    logits = q @ model.dense_out.weights.T + model.dense_out.bias
    return logits, {"z": z, "q": q, "execution": execution}


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_norm - shifted[np.arange(len(labels)), labels]))


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must be integers in 0..{num_classes - 1}")
    return labels.astype(np.int64)


def _loss_grad_logits(model: HybridModel, batch: np.ndarray, labels: np.ndarray):
    batch = np.asarray(batch, dtype=float)
    labels = _check_labels(labels, model.num_classes)
    z = batch @ model.dense_in.weights.T + model.dense_in.bias
    q_params = model.quantum_params

    if isinstance(model.quantum, SubcircuitGraph):
        execution = simulator.run_graph_batch(model.quantum, q_params, z,
                                              boundary_map=model.boundary_map)
        q = execution.outputs
    elif model.encoder == "amplitude":
        q, jp, jf = simulator.gradients_amplitude_batch(model.quantum, q_params, z)
    else:
        q, jp, jx = simulator.gradients_batch(model.quantum, q_params, z)

    logits = q @ model.dense_out.weights.T + model.dense_out.bias
    loss = cross_entropy(logits, labels)
    b = len(labels)
    d_logits = _softmax(logits)
    d_logits[np.arange(b), labels] -= 1.0
    d_logits /= b

    d_w_out = d_logits.T @ q
    d_b_out = d_logits.sum(axis=0)
    d_q = d_logits @ model.dense_out.weights
    if isinstance(model.quantum, SubcircuitGraph):
        d_qp, d_z = simulator.graph_gradients_batch(model.quantum, q_params, z, d_q, execution)
    elif model.encoder == "amplitude":
        d_qp = np.einsum("bop,bo->p", jp, d_q)
        d_z = np.einsum("boi,bo->bi", jf, d_q)
    else:
        d_qp = np.einsum("bop,bo->p", jp, d_q)
        d_z = np.einsum("boi,bo->bi", jx, d_q)
    d_w_in = d_z.T @ batch
    d_b_in = d_z.sum(axis=0)
    grad = np.concatenate([d_w_in.ravel(), d_b_in, d_qp, d_w_out.ravel(), d_b_out])
    return loss, grad, logits


def loss_and_grad(model: HybridModel, batch: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient over the full flat parameter vector."""
    loss, grad, _ = _loss_grad_logits(model, batch, labels)
    return loss, grad


def predict(model: HybridModel, features: np.ndarray, chunk: int = 256) -> np.ndarray:
    parts = [forward(model, features[i:i + chunk])[0] for i in range(0, len(features), chunk)]
    return np.argmax(np.concatenate(parts), axis=1)


def evaluate(model: HybridModel, features: np.ndarray, labels: np.ndarray,
             chunk: int = 256) -> tuple[float, float]:
    """(accuracy, mean loss) over a dataset split."""
    logits = np.concatenate([forward(model, features[i:i + chunk])[0]
                             for i in range(0, len(features), chunk)])
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    return accuracy, cross_entropy(logits, np.asarray(labels))


# --- optimization -----------------------------------------------------------

@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, num_params: int, learning_rate: float = 0.01) -> "AdamState":
        return cls(np.zeros(num_params), np.zeros(num_params), 0, learning_rate)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """Standard Adam update with bias correction; returns fresh arrays."""
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                         f"moments {state.first_moment.shape}")
    step = state.step + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grads ** 2
    m_hat = m / (1 - state.beta1 ** step)
    v_hat = v / (1 - state.beta2 ** step)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, step, state.learning_rate, state.beta1, state.beta2, state.eps)


# --- training ----------------------------------------------------------------

@dataclass
class TrainingRecord:
    seed: int
    train_accuracy: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    optimizer_steps: int = 0

    @property
    def epochs(self) -> int:
        return len(self.train_accuracy)

    def final(self) -> dict[str, float]:
        return {"train_accuracy": self.train_accuracy[-1], "train_loss": self.train_loss[-1],
                "val_accuracy": self.val_accuracy[-1], "val_loss": self.val_loss[-1]}


def train(model: HybridModel, train_set, val_set, *, epochs: int, batch_size: int = 5,
          learning_rate: float = 0.01, seed: int = 0) -> TrainingRecord:
    """Minibatch Adam training with a seeded per-epoch shuffle; deterministic given the seed.

    Per-epoch training metrics are the sample-weighted means of the
    pre-update minibatch evaluations; validation is a full pass at epoch end.
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError(f"need epochs >= 1 and batch_size >= 1, got {epochs}, {batch_size}")
    if len(train_set) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    params = model.get_params()
    state = AdamState.init(params.size, learning_rate)
    record = TrainingRecord(seed=seed)
    for _ in range(epochs):
        order = rng.permutation(len(train_set))
        seen = 0
        loss_sum = hits = 0.0
        for start in range(0, len(order), batch_size):
            picked = order[start:start + batch_size]
            model.set_params(params)
            loss, grad, logits = _loss_grad_logits(
                model, train_set.features[picked], train_set.labels[picked])
            params, state = adam_step(state, params, grad)
            record.optimizer_steps += 1
            seen += len(picked)
            loss_sum += loss * len(picked)
            hits += float(np.sum(np.argmax(logits, axis=1) == train_set.labels[picked]))
        model.set_params(params)
        val_acc, val_loss = evaluate(model, val_set.features, val_set.labels)
        record.train_accuracy.append(hits / seen)
        record.train_loss.append(loss_sum / seen)
        record.val_accuracy.append(val_acc)
        record.val_loss.append(val_loss)
    model.set_params(params)
    return record


# --- checkpoints --------------------------------------------------------------

def save_checkpoint(model: HybridModel, state: AdamState | None, seed: int, path: str | Path) -> None:
    """Single JSON document: architecture descriptor, flat parameters, Adam state, seed."""
    if isinstance(model.quantum, SubcircuitGraph):
        quantum = {"type": "graph", "doc": graph_to_doc(model.quantum)}
    else:
        quantum = {"type": "circuit", "text": circuit_to_text(model.quantum)}
    doc = {
        "architecture": {
            "feature_dim": model.feature_dim,
            "num_classes": model.num_classes,
            "encoder": model.encoder,
            "quantum": quantum,
        },
        "params": model.get_params().tolist(),
        "adam": None if state is None else {
            "first_moment": state.first_moment.tolist(),
            "second_moment": state.second_moment.tolist(),
            "step": state.step,
            "learning_rate": state.learning_rate,
        },
        "seed": seed,
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> tuple[HybridModel, AdamState | None, int]:
    doc = json.loads(Path(path).read_text())
    arch = doc["architecture"]
    if arch["quantum"]["type"] == "graph":
        quantum = graph_from_doc(arch["quantum"]["doc"])
    else:
        quantum = circuit_from_text(arch["quantum"]["text"])
    model = init_model(quantum, arch["feature_dim"], arch["num_classes"],
                       seed=doc["seed"], encoder=arch["encoder"])
    model.set_params(np.array(doc["params"], dtype=float))
    state = None
    if doc["adam"] is not None:
        state = AdamState(np.array(doc["adam"]["first_moment"]), np.array(doc["adam"]["second_moment"]),
                          doc["adam"]["step"], doc["adam"]["learning_rate"])
    return model, state, doc["seed"]
