"""Exact pure-state stabilizer simulation.

Pauli strings are stored as two integer bit masks (bit ``q`` belongs to qubit
``q``) plus a phase exponent, so a product is a handful of integer operations.
In the dense rendering qubit 0 is the most significant tensor factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Final, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from boundchain.density import DENSIFY_CAP, DensityMatrix
from boundchain.errors import (
    DensifyLimitError,
    InvalidStateError,
    QubitIndexError,
)
from boundchain.strenum import StrEnum

__all__ = [
    "PauliString",
    "StabilizerState",
    "BellIndex",
    "Gate",
    "GateOp",
    "MeasurementBranch",
    "BellBranch",
    "apply_clifford",
    "apply_circuit",
    "apply_pauli",
    "prepare_bell",
    "measure_pauli",
    "bell_measure",
    "reduced_density",
    "to_statevector",
]


LOGGER: Final = logging.getLogger("boundchain-stabilizer")

_POWERS_OF_I: Final = (1, 1j, -1, -1j)
_PHASE_PREFIX: Final = ("+", "+i", "-", "-i")
_LETTERS: Final = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_STATEVECTOR_SEED: Final = 0x5EED


def _index_mask(bits: int, n: int) -> int:
    """Map qubit bits onto computational-basis index bits (qubit 0 is the MSB)."""
    mask = 0
    for q in range(n):
        if bits >> q & 1:
            mask |= 1 << (n - 1 - q)
    return mask


@dataclass(frozen=True, slots=True)
class PauliString:
    """``i**phase`` times a tensor product of I, X, Y, Z.

    The letter on qubit ``q`` is read from ``(x_bits >> q & 1, z_bits >> q & 1)``:
    (1, 0) is X, (1, 1) is Y and (0, 1) is Z.
    """

    n: int
    x_bits: int
    z_bits: int
    phase: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise QubitIndexError(f"Qubit count must be non-negative, got {self.n}")
        limit = 1 << self.n
        if not (0 <= self.x_bits < limit and 0 <= self.z_bits < limit):
            raise QubitIndexError(f"Bit vectors do not fit into {self.n} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0, 0)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> PauliString:
        if not 0 <= qubit < n:
            raise QubitIndexError(f"Qubit {qubit} out of range for {n} qubits")
        return cls.from_label("I" * qubit + letter + "I" * (n - qubit - 1))

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse labels like ``"XZ"``, ``"-YY"`` or ``"+iXI"``; qubit 0 comes first."""
        body = label.strip()
        phase = 0
        if body.startswith("-"):
            phase, body = 2, body[1:]
        elif body.startswith("+"):
            body = body[1:]
        if body.startswith("i"):
            phase, body = phase + 1, body[1:]
        x_bits = z_bits = 0
        for q, letter in enumerate(body):
            match letter:
                case "I":
                    pass
                case "X":
                    x_bits |= 1 << q
                case "Z":
                    z_bits |= 1 << q
                case "Y":
                    x_bits |= 1 << q
                    z_bits |= 1 << q
                case _:
                    raise InvalidStateError(f"Unknown Pauli letter {letter!r} in {label!r}")
        return cls(len(body), x_bits, z_bits, phase)

    @property
    def label(self) -> str:
        letters = "".join(
            _LETTERS[(self.x_bits >> q & 1, self.z_bits >> q & 1)] for q in range(self.n)
        )
        return _PHASE_PREFIX[self.phase] + letters

    def __str__(self) -> str:
        return self.label

    @property
    def phase_value(self) -> complex:
        return _POWERS_OF_I[self.phase]

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def support(self) -> tuple[int, ...]:
        bits = self.x_bits | self.z_bits
        return tuple(q for q in range(self.n) if bits >> q & 1)

    @property
    def weight(self) -> int:
        return (self.x_bits | self.z_bits).bit_count()

    def __neg__(self) -> PauliString:
        return PauliString(self.n, self.x_bits, self.z_bits, self.phase + 2)

    def __mul__(self, other: PauliString) -> PauliString:
        if self.n != other.n:
            raise QubitIndexError(f"Cannot multiply {self.n}- and {other.n}-qubit Paulis")
        mask = (1 << self.n) - 1
        x1, z1, x2, z2 = self.x_bits, self.z_bits, other.x_bits, other.z_bits
        y1, y2 = x1 & z1, x2 & z2
        xo1, xo2 = x1 & ~z1 & mask, x2 & ~z2 & mask
        zo1, zo2 = z1 & ~x1 & mask, z2 & ~x2 & mask
        # XY = iZ, YZ = iX, ZX = iY and the reversed orders pick up -i.
        forward = (xo1 & y2).bit_count() + (y1 & zo2).bit_count() + (zo1 & xo2).bit_count()
        backward = (y1 & xo2).bit_count() + (zo1 & y2).bit_count() + (xo1 & zo2).bit_count()
        return PauliString(
            self.n, x1 ^ x2, z1 ^ z2, self.phase + other.phase + forward - backward
        )

    def commutes_with(self, other: PauliString) -> bool:
        overlap = (self.x_bits & other.z_bits) ^ (self.z_bits & other.x_bits)
        return overlap.bit_count() % 2 == 0

    def tensor(self, other: PauliString) -> PauliString:
        return PauliString(
            self.n + other.n,
            self.x_bits | other.x_bits << self.n,
            self.z_bits | other.z_bits << self.n,
            self.phase + other.phase,
        )

    def restricted(self, qubits: Sequence[int]) -> PauliString:
        """The letters on ``qubits`` as a ``len(qubits)``-qubit string, phase kept."""
        x_bits = z_bits = 0
        for j, q in enumerate(qubits):
            x_bits |= (self.x_bits >> q & 1) << j
            z_bits |= (self.z_bits >> q & 1) << j
        return PauliString(len(qubits), x_bits, z_bits, self.phase)

    def embedded(self, qubits: Sequence[int], n: int) -> PauliString:
        """Inverse of ``restricted``: place this string on ``qubits`` of an ``n``-qubit register."""
        if len(qubits) != self.n:
            raise QubitIndexError(f"Need {self.n} target qubits, got {len(qubits)}")
        x_bits = z_bits = 0
        for j, q in enumerate(qubits):
            if not 0 <= q < n:
                raise QubitIndexError(f"Qubit {q} out of range for {n} qubits")
            x_bits |= (self.x_bits >> j & 1) << q
            z_bits |= (self.z_bits >> j & 1) << q
        return PauliString(n, x_bits, z_bits, self.phase)

    def _dense_action(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dim = 1 << self.n
        x_mask = _index_mask(self.x_bits, self.n)
        z_mask = _index_mask(self.z_bits, self.n)
        columns = np.arange(dim, dtype=np.int64)
        parity = (np.bitwise_count(columns & z_mask) & 1).astype(np.int64)
        # Y = iXZ, so every Y letter adds one power of i on top of X^x Z^z.
        coefficient = _POWERS_OF_I[(self.phase + (self.x_bits & self.z_bits).bit_count()) % 4]
        values = coefficient * (1 - 2 * parity)
        return columns ^ x_mask, columns, values

    def to_matrix(self) -> np.ndarray:
        if self.n > DENSIFY_CAP:
            raise DensifyLimitError(f"{self.n} qubits exceed the dense cap of {DENSIFY_CAP}")
        rows, columns, values = self._dense_action()
        matrix = np.zeros((1 << self.n, 1 << self.n), dtype=complex)
        matrix[rows, columns] = values
        return matrix

    def apply_to_vector(self, vector: np.ndarray) -> np.ndarray:
        rows, columns, values = self._dense_action()
        out = np.empty_like(vector, dtype=complex)
        out[rows] = values * vector[columns]
        return out


class BellIndex(StrEnum):
    """The four Bell states in the order Psi+, Psi-, Phi+, Phi-."""

    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"

    @property
    def signs(self) -> tuple[int, int]:
        """Signs of the XX and ZZ stabilizers."""
        return _BELL_SIGNS[self]

    @property
    def symbol(self) -> str:
        return {"psi": "Ψ", "phi": "Φ"}[self.value[:3]] + self.value[3]

    @classmethod
    def from_signs(cls, s_xx: int, s_zz: int) -> BellIndex:
        for index, signs in _BELL_SIGNS.items():
            if signs == (s_xx, s_zz):
                return index
        raise InvalidStateError(f"No Bell state has signs ({s_xx}, {s_zz})")

    def to_statevector(self) -> np.ndarray:
        return to_statevector(prepare_bell(self))


_BELL_SIGNS: Final = {
    BellIndex.PHI_PLUS: (1, 1),
    BellIndex.PSI_PLUS: (1, -1),
    BellIndex.PHI_MINUS: (-1, 1),
    BellIndex.PSI_MINUS: (-1, -1),
}


def _bit(p: PauliString, qubit: int, is_z: bool) -> int:
    return (p.z_bits if is_z else p.x_bits) >> qubit & 1


def _row_reduce(
    rows: Iterable[PauliString], columns: Iterable[tuple[int, bool]]
) -> tuple[list[PauliString], list[tuple[int, bool]]]:
    """Gauss-Jordan elimination over GF(2) on commuting Hermitian rows.

    Pivots are taken through ``columns`` in the given order; each column is a
    ``(qubit, is_z)`` pair. Returns the nonzero reduced rows and their pivots.
    """
    reduced = list(rows)
    pivots: list[tuple[int, bool]] = []
    rank = 0
    for qubit, is_z in columns:
        selected = next(
            (i for i in range(rank, len(reduced)) if _bit(reduced[i], qubit, is_z)),
            None,
        )
        if selected is None:
            continue
        reduced[rank], reduced[selected] = reduced[selected], reduced[rank]
        pivot = reduced[rank]
        for i, row in enumerate(reduced):
            if i != rank and _bit(row, qubit, is_z):
                reduced[i] = row * pivot
        pivots.append((qubit, is_z))
        rank += 1
    return reduced[:rank], pivots


def _interleaved_columns(qubits: Iterable[int]) -> list[tuple[int, bool]]:
    return [(q, is_z) for q in qubits for is_z in (False, True)]


@dataclass(frozen=True, eq=False)
class StabilizerState:
    """A pure state given by ``n`` commuting, independent Hermitian generators.

    Two states compare equal when their stabilizer groups coincide, which is
    decided on the canonical (reduced row echelon) generator set. Global phase
    is not represented.
    """

    n: int
    generators: tuple[PauliString, ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if len(self.generators) != self.n:
            raise InvalidStateError(
                f"Need {self.n} generators for {self.n} qubits, got {len(self.generators)}"
            )
        for g in self.generators:
            if g.n != self.n:
                raise InvalidStateError(f"Generator {g} does not act on {self.n} qubits")
            if not g.is_hermitian:
                raise InvalidStateError(f"Generator {g} must have phase +1 or -1")
        for i, g in enumerate(self.generators):
            for h in self.generators[i + 1 :]:
                if not g.commutes_with(h):
                    raise InvalidStateError(f"Generators {g} and {h} anticommute")
        if len(self._echelon[0]) != self.n:
            raise InvalidStateError("Generators are not independent")

    @classmethod
    def _unchecked(cls, n: int, generators: Sequence[PauliString]) -> StabilizerState:
        state = object.__new__(cls)
        object.__setattr__(state, "n", n)
        object.__setattr__(state, "generators", tuple(generators))
        return state

    @classmethod
    def zero_state(cls, n: int) -> StabilizerState:
        return cls._unchecked(n, [PauliString(n, 0, 1 << q) for q in range(n)])

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> StabilizerState:
        generators = [PauliString.from_label(label) for label in labels]
        n = generators[0].n if generators else 0
        return cls(n, tuple(generators))

    @cached_property
    def _echelon(self) -> tuple[list[PauliString], list[tuple[int, bool]]]:
        return _row_reduce(self.generators, _interleaved_columns(range(self.n)))

    @property
    def canonical(self) -> tuple[PauliString, ...]:
        """Reduced row echelon generators, pivoting X before Z, qubit by qubit."""
        return tuple(self._echelon[0])

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(g.label for g in self.generators)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StabilizerState):
            return NotImplemented
        return self.n == other.n and self.canonical == other.canonical

    def __hash__(self) -> int:
        return hash((self.n, self.canonical))

    def __repr__(self) -> str:
        return f"StabilizerState({', '.join(g.label for g in self.canonical)})"

    def stabilizer_sign(self, p: PauliString) -> int | None:
        """+1 if ``p`` is in the group, -1 if ``-p`` is, ``None`` if neither."""
        if p.n != self.n:
            raise QubitIndexError(f"Pauli on {p.n} qubits, state on {self.n}")
        element = PauliString.identity(self.n)
        x_bits, z_bits = p.x_bits, p.z_bits
        for row, (qubit, is_z) in zip(*self._echelon):
            if (z_bits if is_z else x_bits) >> qubit & 1:
                element = element * row
                x_bits ^= row.x_bits
                z_bits ^= row.z_bits
        if x_bits or z_bits:
            return None
        return 1 if element.phase == p.phase else -1

    def _supported_rows(self, qubits: Sequence[int]) -> list[PauliString]:
        """Generators of the subgroup supported inside ``qubits`` (full register indexing)."""
        inside = set(qubits)
        outside = [q for q in range(self.n) if q not in inside]
        rows, _ = _row_reduce(
            self.generators,
            _interleaved_columns(outside) + _interleaved_columns(sorted(inside)),
        )
        outside_mask = sum(1 << q for q in outside)
        return [r for r in rows if not (r.x_bits | r.z_bits) & outside_mask]

    def local_generators(self, qubits: Sequence[int]) -> list[PauliString]:
        """Subgroup supported inside ``qubits``, rewritten on ``len(qubits)`` qubits in that order."""
        qubits = _checked_subset(self.n, qubits)
        return [row.restricted(qubits) for row in self._supported_rows(qubits)]

    def factorizes(self, qubits: Sequence[int]) -> bool:
        qubits = _checked_subset(self.n, qubits)
        return len(self._supported_rows(qubits)) == len(qubits)

    def restricted_state(self, qubits: Sequence[int]) -> StabilizerState:
        """The pure state on ``qubits`` when the state is a product across that cut."""
        local = self.local_generators(qubits)
        if len(local) != len(qubits):
            raise InvalidStateError(
                f"State is entangled across {tuple(qubits)} and the rest"
            )
        return StabilizerState._unchecked(len(qubits), local)

    def reset(self, qubits: Sequence[int]) -> StabilizerState:
        """Replace ``qubits`` by |0>; they must be unentangled with the rest."""
        qubits = _checked_subset(self.n, qubits)
        keep = [q for q in range(self.n) if q not in set(qubits)]
        kept = self._supported_rows(keep)
        if len(kept) != len(keep):
            raise InvalidStateError(f"Qubits {tuple(qubits)} are still entangled")
        zeros = [PauliString(self.n, 0, 1 << q) for q in qubits]
        return StabilizerState._unchecked(self.n, kept + zeros)

    def tensor(self, other: StabilizerState) -> StabilizerState:
        left = [g.tensor(PauliString.identity(other.n)) for g in self.generators]
        right = [PauliString.identity(self.n).tensor(g) for g in other.generators]
        return StabilizerState._unchecked(self.n + other.n, left + right)


def _group_elements(generators: Sequence[PauliString], n: int) -> Iterator[PauliString]:
    """All 2**len(generators) products, in Gray-code order."""
    current = PauliString.identity(n)
    yield current
    for step in range(1, 1 << len(generators)):
        flip = (step & -step).bit_length() - 1
        current = current * generators[flip]
        yield current


def _checked_subset(n: int, qubits: Sequence[int]) -> list[int]:
    qubits = list(qubits)
    for q in qubits:
        if not 0 <= q < n:
            raise QubitIndexError(f"Qubit {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"Duplicate qubits in {tuple(qubits)}")
    return qubits


class Gate(StrEnum):
    H = "h"
    S = "s"
    SDG = "sdg"
    X = "x"
    Y = "y"
    Z = "z"
    CNOT = "cnot"
    CZ = "cz"

    @property
    def arity(self) -> int:
        return 2 if self in (Gate.CNOT, Gate.CZ) else 1


class GateOp(NamedTuple):
    gate: Gate
    targets: tuple[int, ...]

    @classmethod
    def of(cls, gate: str | Gate, *targets: int) -> GateOp:
        return cls(Gate(gate), tuple(targets))


class MeasurementBranch(NamedTuple):
    outcome: int
    probability: Fraction
    state: StabilizerState


class BellBranch(NamedTuple):
    outcome: BellIndex
    probability: Fraction
    state: StabilizerState


def _conjugate(p: PauliString, gate: Gate, targets: Sequence[int]) -> PauliString:
    """``U p U^dagger`` for one gate, following the Aaronson-Gottesman update rules."""
    x_bits, z_bits, phase = p.x_bits, p.z_bits, p.phase
    a = targets[0]
    xa, za = x_bits >> a & 1, z_bits >> a & 1
    match gate:
        case Gate.H:
            phase += 2 * (xa & za)
            x_bits ^= (xa ^ za) << a
            z_bits ^= (xa ^ za) << a
        case Gate.S:
            phase += 2 * (xa & za)
            z_bits ^= xa << a
        case Gate.SDG:
            phase += 2 * (xa & (1 - za))
            z_bits ^= xa << a
        case Gate.X:
            phase += 2 * za
        case Gate.Y:
            phase += 2 * (xa ^ za)
        case Gate.Z:
            phase += 2 * xa
        case Gate.CNOT:
            b = targets[1]
            xb, zb = x_bits >> b & 1, z_bits >> b & 1
            phase += 2 * (xa & zb & (1 ^ xb ^ za))
            x_bits ^= xa << b
            z_bits ^= zb << a
        case Gate.CZ:
            b = targets[1]
            q = PauliString(p.n, x_bits, z_bits, phase)
            for step, step_targets in ((Gate.H, (b,)), (Gate.CNOT, (a, b)), (Gate.H, (b,))):
                q = _conjugate(q, step, step_targets)
            return q
    return PauliString(p.n, x_bits, z_bits, phase)


def _check_targets(n: int, gate: Gate, targets: Sequence[int]) -> tuple[int, ...]:
    targets = tuple(targets)
    if len(targets) != gate.arity:
        raise QubitIndexError(f"{gate} takes {gate.arity} target(s), got {targets}")
    for q in targets:
        if not 0 <= q < n:
            raise QubitIndexError(f"Qubit {q} out of range for {n} qubits")
    if len(set(targets)) != len(targets):
        raise QubitIndexError(f"{gate} targets must be distinct, got {targets}")
    return targets


def apply_clifford(
    state: StabilizerState, gate: Gate | str, targets: Sequence[int]
) -> StabilizerState:
    gate = Gate(gate)
    targets = _check_targets(state.n, gate, targets)
    return StabilizerState._unchecked(
        state.n, [_conjugate(g, gate, targets) for g in state.generators]
    )


def apply_circuit(state: StabilizerState, circuit: Iterable[GateOp]) -> StabilizerState:
    for op in circuit:
        state = apply_clifford(state, op.gate, op.targets)
    return state


def apply_pauli(state: StabilizerState, pauli: PauliString) -> StabilizerState:
    """Conjugate by a Pauli: generators anticommuting with it flip sign."""
    if pauli.n != state.n:
        raise QubitIndexError(f"Pauli on {pauli.n} qubits, state on {state.n}")
    return StabilizerState._unchecked(
        state.n,
        [g if g.commutes_with(pauli) else -g for g in state.generators],
    )


def prepare_bell(index: BellIndex | str) -> StabilizerState:
    s_xx, s_zz = BellIndex(index).signs
    xx = PauliString.from_label("XX")
    zz = PauliString.from_label("ZZ")
    return StabilizerState._unchecked(2, [xx if s_xx > 0 else -xx, zz if s_zz > 0 else -zz])


def measure_pauli(state: StabilizerState, p: PauliString) -> list[MeasurementBranch]:
    """All outcome branches of measuring the Hermitian Pauli ``p``."""
    if not p.is_hermitian:
        raise InvalidStateError(f"Cannot measure non-Hermitian {p}")
    if p.n != state.n:
        raise QubitIndexError(f"Pauli on {p.n} qubits, state on {state.n}")
    anticommuting = [i for i, g in enumerate(state.generators) if not g.commutes_with(p)]
    if not anticommuting:
        sign = state.stabilizer_sign(p)
        assert sign is not None, f"{p} commutes with the group but is not in it"
        return [MeasurementBranch(sign, Fraction(1), state)]

    first, *rest = anticommuting
    generators = list(state.generators)
    for i in rest:
        generators[i] = generators[i] * generators[first]
    branches = []
    for outcome, eigen in ((1, p), (-1, -p)):
        generators[first] = eigen
        branches.append(
            MeasurementBranch(
                outcome, Fraction(1, 2), StabilizerState._unchecked(state.n, generators)
            )
        )
    return branches


def bell_measure(state: StabilizerState, qa: int, qb: int) -> list[BellBranch]:
    """Measure XX then ZZ on ``(qa, qb)``; branches are ordered as ``BellIndex``."""
    if qa == qb:
        raise QubitIndexError(f"Bell measurement needs two distinct qubits, got {qa} twice")
    _checked_subset(state.n, (qa, qb))
    xx = PauliString.from_label("XX").embedded((qa, qb), state.n)
    zz = PauliString.from_label("ZZ").embedded((qa, qb), state.n)
    found: dict[BellIndex, BellBranch] = {}
    for s_xx, p_xx, after_xx in measure_pauli(state, xx):
        for s_zz, p_zz, after_zz in measure_pauli(after_xx, zz):
            outcome = BellIndex.from_signs(s_xx, s_zz)
            found[outcome] = BellBranch(outcome, p_xx * p_zz, after_zz)
    return [found[index] for index in BellIndex if index in found]


def reduced_density(state: StabilizerState, subset: Sequence[int]) -> DensityMatrix:
    """``2**-k`` times the sum of all group elements supported inside ``subset``."""
    subset = _checked_subset(state.n, subset)
    k = len(subset)
    if k > DENSIFY_CAP:
        raise DensifyLimitError(f"{k} qubits exceed the dense cap of {DENSIFY_CAP}")
    local = state.local_generators(subset)
    dim = 1 << k
    matrix = np.zeros((dim, dim), dtype=complex)
    for element in _group_elements(local, k):
        rows, columns, values = element._dense_action()
        matrix[rows, columns] += values
    return DensityMatrix(matrix / dim, qubits=tuple(subset))


def to_statevector(state: StabilizerState) -> np.ndarray:
    """Unit vector fixed by every generator; the first largest amplitude is made real."""
    if state.n > DENSIFY_CAP:
        raise DensifyLimitError(f"{state.n} qubits exceed the dense cap of {DENSIFY_CAP}")
    rng = np.random.default_rng(_STATEVECTOR_SEED)
    dim = 1 << state.n
    vector = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    for g in state.generators:
        vector = (vector + g.apply_to_vector(vector)) / 2
    vector /= np.linalg.norm(vector)
    pivot = vector[int(np.argmax(np.abs(vector)))]
    return vector * (abs(pivot) / pivot)
