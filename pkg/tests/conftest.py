import numpy as np
import pytest
from scipy.linalg import expm

from reducechop.sim import Circuit

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)

# acceptance lines collected by test_acceptance, echoed in the terminal summary
AC_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if AC_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in AC_RESULTS:
            terminalreporter.write_line(line)


def gate_oracle(kind: str, params) -> np.ndarray:
    """Gate matrices built from generators, independent of Gate.matrix()."""
    if kind == "H":
        return (X + Z) / np.sqrt(2)
    if kind == "X":
        return X
    if kind == "RX":
        return expm(-0.5j * params[0] * X)
    if kind == "RZ":
        return expm(-0.5j * params[0] * Z)
    if kind == "PHASE":
        return np.diag([1.0, np.exp(1j * params[0])])
    if kind == "U3":
        th, ph, la = params
        # U3 = e^{i(ph+la)/2} RZ(ph) RY(th) RZ(la)
        rz = lambda a: expm(-0.5j * a * Z)
        ry = expm(-0.5j * th * Y)
        return np.exp(0.5j * (ph + la)) * rz(ph) @ ry @ rz(la)
    if kind == "CNOT":
        P0, P1 = np.diag([1, 0]), np.diag([0, 1])
        return np.kron(P0, np.eye(2)) + np.kron(P1, X)
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if kind == "ZZ":
        return expm(-0.5j * params[0] * np.kron(Z, Z))
    raise ValueError(kind)


def embed(G: np.ndarray, targets, n: int) -> np.ndarray:
    """Full 2^n matrix of a gate on ``targets``; qubit 0 is the leftmost bit."""
    N = 2**n
    U = np.zeros((N, N), dtype=complex)
    k = len(targets)
    for i in range(N):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        col = 0
        for t in targets:
            col = 2 * col + bits[t]
        for row in range(2**k):
            out = list(bits)
            for j, t in enumerate(targets):
                out[t] = (row >> (k - 1 - j)) & 1
            jdx = 0
            for b in out:
                jdx = 2 * jdx + b
            U[jdx, i] += G[row, col]
    return U


def dense_unitary(c: Circuit) -> np.ndarray:
    U = np.eye(2**c.n, dtype=complex)
    for g in c.gates:
        U = embed(gate_oracle(g.kind, g.params), g.targets, c.n) @ U
    return U


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
