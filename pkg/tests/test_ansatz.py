import numpy as np
import pytest
from scipy.linalg import expm

from reducechop.ansatz import (
    ActivationError,
    ActivationPath,
    HeaAnsatz,
    TfimAnsatz,
    build_hea,
    build_tfim,
    hea_cz_layers,
    hea_num_params,
    parametric_activation,
    random_params,
    ring_edges,
    soft_activated_state,
    tfim_num_params,
)
from reducechop.sim import Circuit, Gate, SimulationError, run_circuit

from conftest import X, Z, dense_unitary


def op_on(single: np.ndarray, q: int, n: int) -> np.ndarray:
    mats = [single if k == q else np.eye(2) for k in range(n)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def test_param_counts_and_depths():
    assert tfim_num_params(8, 10) == 160
    assert hea_num_params(8, 2) == 72
    assert TfimAnsatz(8, 10, np.zeros(160)).depth == 40
    assert HeaAnsatz(8, 2, np.zeros(72)).depth == 4
    # one half of the 5+5 split plus one reducer
    assert TfimAnsatz(8, 5, np.zeros(80)).depth + HeaAnsatz(8, 2, np.zeros(72)).depth == 24


def test_wrong_lengths_raise():
    with pytest.raises(SimulationError):
        build_tfim(4, 2, np.zeros(3))
    with pytest.raises(SimulationError):
        build_hea(4, 2, np.zeros(5))


@pytest.mark.parametrize("n", [3, 4])
def test_tfim_matches_hamiltonian_oracle(n):
    # each layer = prod_e exp(-i phi_e Z_a Z_b / 2) prod_q exp(-i phi_q X_q / 2)
    rng = np.random.default_rng(n)
    L = 2
    phi = random_params(tfim_num_params(n, L), rng)
    U = np.eye(2**n, dtype=complex)
    for layer in range(L):
        block = phi[layer * 2 * n : (layer + 1) * 2 * n]
        for q in range(n):
            U = expm(-0.5j * block[q] * op_on(X, q, n)) @ U
        for e, (a, b) in enumerate(ring_edges(n)):
            U = expm(-0.5j * block[n + e] * (op_on(Z, a, n) @ op_on(Z, b, n))) @ U
    np.testing.assert_allclose(dense_unitary(build_tfim(n, L, phi)), U, atol=1e-10)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8])
def test_tfim_layers_cover_ring_once(n):
    c = build_tfim(n, 1, np.ones(2 * n))
    zz = sorted(tuple(sorted(g.targets)) for g in c.gates if g.kind == "ZZ")
    # n=2 keeps both ring edges, so the pair (0, 1) appears twice
    assert zz == sorted(tuple(sorted(e)) for e in ring_edges(n))


def test_hea_layout_n4_frozen():
    assert hea_cz_layers(4) == [[(0, 1), (2, 3)], [(1, 2), (3, 0)]]
    assert hea_cz_layers(2) == [[(0, 1)]]
    pairs5 = {frozenset(p) for layer in hea_cz_layers(5) for p in layer}
    assert pairs5 == {frozenset(e) for e in ring_edges(5)}


def test_hea_zero_angles_is_cz_only_and_keeps_zero_state():
    c = build_hea(6, 2, np.zeros(hea_num_params(6, 2)))
    assert {g.kind for g in c.gates} == {"U3", "CZ"}
    assert abs(run_circuit(c).amplitudes[0]) == pytest.approx(1.0)


def test_hea_structure():
    n, L = 4, 2
    theta = np.arange(hea_num_params(n, L), dtype=float)
    c = build_hea(n, L, theta)
    u3 = [g for g in c.gates if g.kind == "U3"]
    assert len(u3) == n * (L + 1)
    assert u3[1].targets == (1,) and u3[1].params == (3.0, 4.0, 5.0)
    assert c.layers[-1][0].kind == "U3"


def test_soft_activation_endpoints():
    rng = np.random.default_rng(0)
    U1 = build_tfim(4, 2, random_params(16, rng))
    s0 = soft_activated_state(U1, 0.0)
    s1 = soft_activated_state(U1, 1.0)
    assert abs(s0.amplitudes[0]) == pytest.approx(1.0)
    np.testing.assert_allclose(s1.amplitudes, run_circuit(U1).amplitudes, atol=1e-12)
    mid = soft_activated_state(U1, 0.37)
    assert np.linalg.norm(mid.amplitudes) == pytest.approx(1.0)
    with pytest.raises(ActivationError):
        soft_activated_state(U1, 1.2)


def test_soft_activation_degenerate():
    # RX(2 pi) = -I, so cos|0> + sin(-|0>) vanishes at t = 1/2
    U1 = Circuit.from_gates(1, [Gate("RX", (0,), (2 * np.pi,))])
    with pytest.raises(ActivationError, match="degenerate"):
        soft_activated_state(U1, 0.5)


def test_parametric_activation():
    phi = np.arange(1, 9, dtype=float)
    assert not parametric_activation(phi, 0).any()
    np.testing.assert_array_equal(parametric_activation(phi, 3), [1, 2, 3, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(parametric_activation(phi, 8), phi)
    with pytest.raises(ActivationError):
        parametric_activation(phi, 9)
    assert ActivationPath("parametric", 0.5).active_count(8) == 4
    with pytest.raises(ActivationError):
        ActivationPath("sideways")
