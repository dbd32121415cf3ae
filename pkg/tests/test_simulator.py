import numpy as np
import pytest

from qcutnn import simulator as sim
from qcutnn.circuit import GateKind, build_ansatz, make_circuit
from qcutnn.cutting import design_cutting_points, generate_subcircuits
from qcutnn.simulator import (CapacityError, DegenerateEncodingError, SequencingError,
                              gradients, gradients_batch, parameter_shift, run,
                              run_amplitude, run_batch, run_graph, run_graph_batch,
                              graph_gradients)
from qcutnn.verification import (finite_difference_jacobians, random_arguments,
                                 random_circuit, reference_run, reference_run_amplitude)

K = GateKind


def test_measure_of_ground_state():
    c = make_circuit(1, [(K.MEASURE, (0,), 0)])
    assert run(c, [], []).outputs == pytest.approx([1.0])


def test_encode_pi_flips_z():
    c = make_circuit(1, [(K.ENCODE, (0,), 0), (K.MEASURE, (0,), 0)])
    assert run(c, [], [np.pi]).outputs == pytest.approx([-1.0])
    assert run(c, [], [0.0]).outputs == pytest.approx([1.0])


def test_cnot_entangles():
    # RX(pi) on control flips it; CNOT then flips the target
    c = make_circuit(2, [(K.RX, (0,), 0), (K.CNOT, (0, 1), None),
                         (K.MEASURE, (0,), 0), (K.MEASURE, (1,), 1)])
    assert run(c, [np.pi], []).outputs == pytest.approx([-1.0, -1.0])


def test_run_contract_errors():
    c = build_ansatz(3)
    with pytest.raises(ValueError):
        run(c, np.zeros(5), np.zeros(3))
    with pytest.raises(ValueError):
        run(c, np.zeros(6), np.zeros(1))


def test_capacity_cap(monkeypatch):
    c = build_ansatz(5)
    with pytest.raises(CapacityError):
        run(c, np.zeros(10), np.zeros(5), cap=4)
    monkeypatch.setenv(sim.MAX_QUBITS_ENV, "4")
    with pytest.raises(CapacityError):
        run(c, np.zeros(10), np.zeros(5))


def test_matches_dense_oracle_on_random_circuits():
    rng = np.random.default_rng(42)
    for _ in range(100):
        c = random_circuit(rng)
        params, inputs = random_arguments(rng, c)
        got = run(c, params, inputs).outputs
        expected = reference_run(c, params, inputs)
        np.testing.assert_allclose(got, expected, atol=1e-10)
        assert np.all(np.abs(got) <= 1 + 1e-10)


def test_norm_preserved_after_every_gate():
    rng = np.random.default_rng(5)
    c = random_circuit(rng, max_wires=4, max_gates=25)
    params, inputs = random_arguments(rng, c)
    # replay prefixes; each prefix ends with a normalized state
    for stop in range(1, c.num_gates + 1):
        prefix = make_circuit(c.num_wires, [(g.kind, g.wires, g.slot) for g in c.gates[:stop]])
        run_batch(prefix, params[:prefix.num_params], inputs[:prefix.num_inputs].reshape(1, -1))


def test_batch_matches_single():
    rng = np.random.default_rng(9)
    c = build_ansatz(4)
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-np.pi, np.pi, (6, c.num_inputs))
    batched = run_batch(c, params, inputs)
    for b in range(6):
        np.testing.assert_allclose(batched[b], run(c, params, inputs[b]).outputs, atol=1e-12)


def test_amplitude_basis_state():
    c = build_ansatz(3, encoder="amplitude")
    features = np.zeros(8)
    features[0] = 1.0
    got = run_amplitude(c, np.zeros(c.num_params), features).outputs
    # |000> through zero-angle rotations stays |000>
    np.testing.assert_allclose(got, np.ones(3), atol=1e-12)


def test_amplitude_uniform_two_qubits():
    c = make_circuit(2, [(K.MEASURE, (0,), 0), (K.MEASURE, (1,), 1)], amplitude_encoded=True)
    got = run_amplitude(c, [], np.ones(4)).outputs
    np.testing.assert_allclose(got, [0.0, 0.0], atol=1e-12)


def test_amplitude_matches_oracle():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(1, 5))
        ops = []
        p = 0
        for _ in range(int(rng.integers(1, 15))):
            if n >= 2 and rng.random() < 0.3:
                ops.append((K.CNOT, tuple(rng.choice(n, 2, replace=False).tolist()), None))
            else:
                kind = (K.RX, K.RY, K.RZ)[rng.integers(3)]
                ops.append((kind, (int(rng.integers(n)),), p))
                p += 1
        ops += [(K.MEASURE, (w,), w) for w in range(n)]
        c = make_circuit(n, ops, amplitude_encoded=True)
        params = rng.uniform(-np.pi, np.pi, c.num_params)
        features = rng.uniform(-1, 1, int(rng.integers(1, (1 << n) + 1)))
        if not np.any(features):
            features[0] = 1.0
        got = run_amplitude(c, params, features).outputs
        expected = reference_run_amplitude(c, params, features)
        np.testing.assert_allclose(got, expected, atol=1e-10)


def test_amplitude_degenerate_vector_rejected():
    c = build_ansatz(3, encoder="amplitude")
    with pytest.raises(DegenerateEncodingError):
        run_amplitude(c, np.zeros(c.num_params), np.zeros(8))


def test_gradient_of_single_encoder():
    c = make_circuit(1, [(K.ENCODE, (0,), 0), (K.MEASURE, (0,), 0)])
    _, jx = gradients(c, [], [0.0])
    assert jx[0, 0] == pytest.approx(0.0, abs=1e-12)
    _, jx = gradients(c, [], [np.pi / 2])
    assert jx[0, 0] == pytest.approx(-1.0)


def test_parameter_shift_single_rx():
    c = make_circuit(1, [(K.RX, (0,), 0), (K.MEASURE, (0,), 0)])
    assert parameter_shift(c, [0.0], [], 0)[0] == pytest.approx(0.0, abs=1e-12)
    assert parameter_shift(c, [np.pi / 2], [], 0)[0] == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        parameter_shift(c, [0.0], [], 3)


def test_gradient_triple_agreement():
    rng = np.random.default_rng(23)
    for _ in range(30):
        c = random_circuit(rng, max_wires=5, max_gates=20)
        params, inputs = random_arguments(rng, c)
        jp, jx = gradients(c, params, inputs)
        for i in range(c.num_params):
            np.testing.assert_allclose(jp[:, i], parameter_shift(c, params, inputs, i), atol=1e-10)
        fd_p, fd_x = finite_difference_jacobians(c, params, inputs)
        np.testing.assert_allclose(jp, fd_p, atol=1e-5)
        np.testing.assert_allclose(jx, fd_x, atol=1e-5)


def test_gradients_batch_matches_single():
    rng = np.random.default_rng(31)
    c = build_ansatz(4)
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-np.pi, np.pi, (4, c.num_inputs))
    _, jp, jx = gradients_batch(c, params, inputs)
    for b in range(4):
        sp, sx = gradients(c, params, inputs[b])
        np.testing.assert_allclose(jp[b], sp, atol=1e-12)
        np.testing.assert_allclose(jx[b], sx, atol=1e-12)


def test_amplitude_feature_gradient_vs_fd():
    rng = np.random.default_rng(37)
    c = build_ansatz(3, encoder="amplitude")
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    features = rng.uniform(0.1, 1.0, 5)
    _, jp, jf = sim.gradients_amplitude_batch(c, params, features.reshape(1, -1))
    h = 1e-6
    for i in range(5):
        plus, minus = features.copy(), features.copy()
        plus[i] += h
        minus[i] -= h
        fd = (run_amplitude(c, params, plus).outputs - run_amplitude(c, params, minus).outputs) / (2 * h)
        np.testing.assert_allclose(jf[0, :, i], fd, atol=1e-6)
    for i in range(c.num_params):
        plus, minus = params.copy(), params.copy()
        plus[i] += h
        minus[i] -= h
        fd = (run_amplitude(c, plus, features).outputs - run_amplitude(c, minus, features).outputs) / (2 * h)
        np.testing.assert_allclose(jp[0, :, i], fd, atol=1e-6)


def test_run_graph_zero_cut_identity():
    rng = np.random.default_rng(41)
    c = build_ansatz(5)
    graph = generate_subcircuits(c, design_cutting_points(c, 5))
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-np.pi, np.pi, c.num_inputs)
    composed, _ = run_graph(graph, params, inputs)
    np.testing.assert_allclose(composed.outputs, run(c, params, inputs).outputs, atol=1e-10)


def test_run_graph_matches_manual_composition():
    # 6-qubit circuit on a 3-qubit device, composed by hand from run() calls
    rng = np.random.default_rng(43)
    c = build_ansatz(6)
    graph = generate_subcircuits(c, design_cutting_points(c, 3))
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-np.pi, np.pi, c.num_inputs)
    result, _ = run_graph(graph, params, inputs)

    by_consumer = {link.consumer: link for link in graph.links}
    sub_outputs = []
    for k, sub in enumerate(graph.subcircuits):
        x = np.zeros(sub.num_inputs)
        for slot in range(sub.num_inputs):
            if (k, slot) in graph.external_inputs:
                x[slot] = inputs[graph.external_inputs[(k, slot)]]
            else:
                pk, ps = by_consumer[(k, slot)].producer
                x[slot] = sub_outputs[pk][ps]
        sub_outputs.append(run(sub, np.asarray(params)[graph.param_maps[k]], x).outputs)
    manual = np.zeros(c.num_outputs)
    for o, (k, slot) in graph.final_outputs.items():
        manual[o] = sub_outputs[k][slot]
    np.testing.assert_allclose(result.outputs, manual, atol=1e-12)


def test_run_graph_outputs_bounded():
    rng = np.random.default_rng(47)
    c = build_ansatz(6)
    graph = generate_subcircuits(c, design_cutting_points(c, 2))
    for _ in range(10):
        params = rng.uniform(-10, 10, c.num_params)
        inputs = rng.uniform(-10, 10, c.num_inputs)
        execution = run_graph_batch(graph, params, inputs.reshape(1, -1))
        assert np.all(np.abs(execution.outputs) <= 1 + 1e-10)
        for out in execution.sub_outputs:
            assert np.all(np.abs(out) <= 1 + 1e-10)


@pytest.mark.parametrize("boundary_map", ["plain", "arccos"])
def test_graph_gradients_match_fd(boundary_map):
    rng = np.random.default_rng(53)
    c = build_ansatz(6)
    graph = generate_subcircuits(c, design_cutting_points(c, 3))
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-1, 1, c.num_inputs)
    upstream = rng.normal(size=c.num_outputs)
    _, cache = run_graph(graph, params, inputs, boundary_map=boundary_map)
    dp, dx = graph_gradients(graph, params, inputs, upstream, cache)

    def value(p, x):
        result, _ = run_graph(graph, p, x, boundary_map=boundary_map)
        return float(np.dot(upstream, result.outputs))
    h = 1e-5
    for i in range(len(params)):
        e = np.zeros(len(params)); e[i] = h
        fd = (value(params + e, inputs) - value(params - e, inputs)) / (2 * h)
        assert dp[i] == pytest.approx(fd, abs=1e-5)
    for i in range(len(inputs)):
        e = np.zeros(len(inputs)); e[i] = h
        fd = (value(params, inputs + e) - value(params, inputs - e)) / (2 * h)
        assert dx[i] == pytest.approx(fd, abs=1e-5)


def test_graph_gradients_zero_upstream():
    c = build_ansatz(4)
    graph = generate_subcircuits(c, design_cutting_points(c, 2))
    params = np.linspace(0, 1, c.num_params)
    inputs = np.linspace(-1, 1, c.num_inputs)
    _, cache = run_graph(graph, params, inputs)
    dp, dx = graph_gradients(graph, params, inputs, np.zeros(c.num_outputs), cache)
    assert not dp.any() and not dx.any()


def test_graph_gradients_single_sub_equals_plain_gradients():
    rng = np.random.default_rng(59)
    c = build_ansatz(4)
    graph = generate_subcircuits(c, design_cutting_points(c, 4))
    params = rng.uniform(0, 2 * np.pi, c.num_params)
    inputs = rng.uniform(-1, 1, c.num_inputs)
    upstream = rng.normal(size=c.num_outputs)
    _, cache = run_graph(graph, params, inputs)
    dp, dx = graph_gradients(graph, params, inputs, upstream, cache)
    jp, jx = gradients(c, params, inputs)
    np.testing.assert_allclose(dp, upstream @ jp, atol=1e-10)
    np.testing.assert_allclose(dx, upstream @ jx, atol=1e-10)


def test_graph_gradients_require_cache():
    c = build_ansatz(4)
    graph = generate_subcircuits(c, design_cutting_points(c, 2))
    with pytest.raises(SequencingError):
        graph_gradients(graph, np.zeros(c.num_params), np.zeros(c.num_inputs),
                        np.zeros(c.num_outputs), None)
