"""Hypothesis strategies for random Pauli strings and Clifford circuits."""

from hypothesis import strategies as st

from boundchain.stabilizer import Gate, GateOp, PauliString

MAX_QUBITS = 6


@st.composite
def pauli_strings(draw, n: int | None = None) -> PauliString:
    n = n if n is not None else draw(st.integers(1, MAX_QUBITS))
    return PauliString(
        n,
        draw(st.integers(0, (1 << n) - 1)),
        draw(st.integers(0, (1 << n) - 1)),
        draw(st.integers(0, 3)),
    )


@st.composite
def gate_ops(draw, n: int) -> GateOp:
    gate = draw(st.sampled_from(list(Gate) if n > 1 else [g for g in Gate if g.arity == 1]))
    targets = draw(st.permutations(range(n)))[: gate.arity]
    return GateOp(gate, tuple(targets))
