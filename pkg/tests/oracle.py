"""Plain statevector simulation, used to cross-check the stabilizer backend."""

import numpy as np

from boundchain.stabilizer import Gate, GateOp, PauliString

I2 = np.eye(2, dtype=complex)
_SINGLE = {
    Gate.H: np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    Gate.S: np.diag([1, 1j]),
    Gate.SDG: np.diag([1, -1j]),
    Gate.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Gate.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    Gate.Z: np.diag([1, -1]).astype(complex),
}
_ZERO = np.diag([1, 0]).astype(complex)
_ONE = np.diag([0, 1]).astype(complex)


def embed(n: int, factors: dict[int, np.ndarray]) -> np.ndarray:
    """Tensor product with ``factors[q]`` on qubit ``q`` and identity elsewhere; qubit 0 leftmost."""
    out = np.ones((1, 1), dtype=complex)
    for q in range(n):
        out = np.kron(out, factors.get(q, I2))
    return out


def gate_matrix(n: int, op: GateOp) -> np.ndarray:
    if op.gate in _SINGLE:
        return embed(n, {op.targets[0]: _SINGLE[op.gate]})
    a, b = op.targets
    if op.gate is Gate.CNOT:
        return embed(n, {a: _ZERO}) + embed(n, {a: _ONE, b: _SINGLE[Gate.X]})
    return embed(n, {a: _ZERO}) + embed(n, {a: _ONE, b: _SINGLE[Gate.Z]})


def zero_vector(n: int) -> np.ndarray:
    vector = np.zeros(1 << n, dtype=complex)
    vector[0] = 1
    return vector


def run_circuit(n: int, circuit: list[GateOp]) -> np.ndarray:
    vector = zero_vector(n)
    for op in circuit:
        vector = gate_matrix(n, op) @ vector
    return vector


def project(vector: np.ndarray, pauli: PauliString, outcome: int) -> tuple[float, np.ndarray]:
    """Probability of ``outcome`` and the normalized post-measurement vector."""
    projector = (np.eye(len(vector)) + outcome * pauli.to_matrix()) / 2
    projected = projector @ vector
    probability = float(np.vdot(projected, projected).real)
    if probability < 1e-12:
        return 0.0, projected
    return probability, projected / np.sqrt(probability)


def density(vector: np.ndarray) -> np.ndarray:
    return np.outer(vector, vector.conj())
