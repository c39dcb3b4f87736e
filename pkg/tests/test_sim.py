import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reducechop.sim import (
    GATE_ARITY,
    GATE_NPARAMS,
    Circuit,
    Gate,
    SimulationError,
    Statevector,
    all_bitstrings,
    apply_gate,
    bits_to_index,
    ghz_circuit,
    index_to_bits,
    probability,
    random_circuit,
    run_circuit,
    sample,
    sample_counts,
)

from conftest import dense_unitary, embed, gate_oracle

angles = st.floats(min_value=-10, max_value=10, allow_nan=False)


def make_gate(kind, params, n=3):
    targets = (0,) if GATE_ARITY[kind] == 1 else (0, 2)
    return Gate(kind, targets, tuple(params[: GATE_NPARAMS[kind]]))


@given(kind=st.sampled_from(sorted(GATE_ARITY)), params=st.lists(angles, min_size=3, max_size=3))
@settings(max_examples=80, deadline=None)
def test_gate_matrix_matches_generator_oracle(kind, params):
    g = make_gate(kind, params)
    M = g.matrix()
    np.testing.assert_allclose(M, gate_oracle(kind, g.params), atol=1e-12)
    np.testing.assert_allclose(M.conj().T @ M, np.eye(M.shape[0]), atol=1e-12)
    np.testing.assert_allclose(g.dagger().matrix(), M.conj().T, atol=1e-12)


def test_u3_reduces_to_rx():
    th = 0.731
    np.testing.assert_allclose(
        Gate("U3", (0,), (th, -np.pi / 2, np.pi / 2)).matrix(), Gate("RX", (0,), (th,)).matrix(), atol=1e-12
    )


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("seed", range(5))
def test_run_matches_dense_oracle(n, seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(n, 4, rng)
    U = dense_unitary(c)
    np.testing.assert_allclose(run_circuit(c).amplitudes, U[:, 0], atol=1e-12)
    psi = Statevector.from_amplitudes(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))
    np.testing.assert_allclose(run_circuit(c, psi).amplitudes, U @ psi.amplitudes, atol=1e-12)


def test_reversed_two_qubit_targets():
    # diagonal fast path with q0 > q1 and a generic gate with reversed targets
    for g in (Gate("ZZ", (2, 0), (0.4,)), Gate("CNOT", (3, 1)), Gate("CZ", (2, 1))):
        c = Circuit.from_gates(4, [Gate("H", (q,)) for q in range(4)] + [Gate("RZ", (1,), (0.3,)), g])
        np.testing.assert_allclose(run_circuit(c).amplitudes, dense_unitary(c)[:, 0], atol=1e-12)


def test_bit_order_qubit0_is_leftmost():
    s = run_circuit(Circuit.from_gates(3, [Gate("X", (0,))]))
    assert probability(s, "100") == pytest.approx(1.0)
    assert bits_to_index("100") == 4 and index_to_bits(4, 3) == "100"
    assert all_bitstrings(2) == ["00", "01", "10", "11"]


def test_dagger_inverts_and_norm_preserved():
    rng = np.random.default_rng(3)
    c = random_circuit(8, 6, rng)
    psi = run_circuit(c)
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-12
    back = run_circuit(c.dagger(), psi)
    assert abs(back.amplitudes[0]) == pytest.approx(1.0, abs=1e-12)


def test_ghz_and_depth():
    c = ghz_circuit(4)
    p = run_circuit(c).probabilities()
    assert p[0] == pytest.approx(0.5) and p[-1] == pytest.approx(0.5)
    assert c.depth == 3
    assert Circuit.identity(4).depth == 0


def test_reported_depth_survives_then_and_json():
    a = Circuit(2, ((Gate("CZ", (0, 1)),),), reported_depth=4)
    b = ghz_circuit(2)
    assert a.then(b).depth == 5
    assert Circuit.from_json(a.to_json()).depth == 4


def test_layer_validation():
    with pytest.raises(SimulationError):
        Circuit(2, ((Gate("H", (0,)), Gate("X", (0,))),))
    with pytest.raises(SimulationError):
        Circuit(2, ((Gate("H", (2,)),),))
    with pytest.raises(SimulationError):
        Gate("RX", (0,), ())
    with pytest.raises(SimulationError):
        Gate("CZ", (1, 1))


def test_json_roundtrip_and_diagnostics():
    c = random_circuit(3, 3, np.random.default_rng(0))
    back = Circuit.from_json(c.to_json())
    np.testing.assert_allclose(run_circuit(back).amplitudes, run_circuit(c).amplitudes, atol=1e-14)
    with pytest.raises(SimulationError, match="unknown circuit keys"):
        Circuit.from_dict({"n": 1, "layers": [], "extra": 1})
    bad = {"n": 2, "layers": [[{"kind": "H", "targets": [0]}], [{"kind": "RX", "targets": [1]}]]}
    with pytest.raises(SimulationError, match=r"layers\[1\]\[0\]"):
        Circuit.from_dict(bad)
    bad2 = json.loads(json.dumps(bad))
    bad2["layers"][1][0] = {"targets": [1]}
    with pytest.raises(SimulationError, match=r"layers\[1\]\[0\]"):
        Circuit.from_dict(bad2)


def test_statevector_validation():
    with pytest.raises(SimulationError):
        Statevector(1, np.array([1.0, 1.0], dtype=complex))
    with pytest.raises(SimulationError):
        Statevector(2, np.array([1.0, 0.0], dtype=complex))
    s = Statevector.from_amplitudes([1, 1j])
    assert Statevector.from_dict(s.to_dict()).amplitudes[1] == pytest.approx(1j / np.sqrt(2))


def test_sampling():
    rng = np.random.default_rng(0)
    s = run_circuit(ghz_circuit(5))
    out = sample(s, 2000, rng)
    assert set(out) <= {"00000", "11111"}
    assert 850 < out.count("00000") < 1150
    counts = sample_counts(s.probabilities(), 777, rng)
    assert counts.sum() == 777 and counts[0] + counts[-1] == 777


def test_apply_gate_matches_embed():
    g = Gate("U3", (1,), (0.3, 0.2, -0.7))
    psi = Statevector.from_amplitudes(np.arange(8) + 1j)
    np.testing.assert_allclose(
        apply_gate(psi, g).amplitudes, embed(gate_oracle("U3", g.params), (1,), 3) @ psi.amplitudes, atol=1e-12
    )
