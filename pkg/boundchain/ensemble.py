"""Exact-weight mixtures of stabilizer states owned by named parties.

An ``Ensemble`` never hands its members to protocol code: the only way to
learn anything about the hidden member is to measure and read an outcome.
``hidden_members`` exists for test introspection only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Final, Iterable, NamedTuple, Sequence

import numpy as np

from boundchain.density import DENSIFY_CAP, DensityMatrix
from boundchain.errors import (
    DensifyLimitError,
    InvalidStateError,
    ProtocolError,
    QubitIndexError,
)
from boundchain.stabilizer import (
    BellIndex,
    GateOp,
    PauliString,
    StabilizerState,
    apply_circuit,
    bell_measure,
    measure_pauli,
    reduced_density,
)
from boundchain.stabilizer import apply_pauli as apply_pauli_to_state

__all__ = [
    "PartyRegistry",
    "Member",
    "Ensemble",
    "PauliMeasurement",
    "BellMeasurement",
    "Outcome",
    "mix",
    "rejoin",
    "map_members",
    "apply_pauli",
    "branch_measure",
    "densify",
    "canonical_merge",
    "tensor",
    "restrict",
    "discard",
    "bring_together",
]


LOGGER: Final = logging.getLogger("boundchain-ensemble")


@dataclass(frozen=True)
class PartyRegistry:
    """Who owns which qubit, and which parties currently sit in the same lab."""

    parties: tuple[str, ...]
    ownership: tuple[str, ...]
    colocated: tuple[frozenset[str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parties", tuple(self.parties))
        object.__setattr__(self, "ownership", tuple(self.ownership))
        if len(set(self.parties)) != len(self.parties):
            raise InvalidStateError(f"Party labels must be unique, got {self.parties}")
        unknown = set(self.ownership) - set(self.parties)
        if unknown:
            raise QubitIndexError(f"Qubits owned by unknown parties {sorted(unknown)}")
        groups = tuple(frozenset(g) for g in self.colocated if len(g) > 1)
        seen: set[str] = set()
        for group in groups:
            if group - set(self.parties):
                raise QubitIndexError(f"Unknown parties in group {sorted(group)}")
            if group & seen:
                raise InvalidStateError(f"Party appears in two co-located groups: {sorted(group)}")
            seen |= group
        object.__setattr__(self, "colocated", groups)

    @classmethod
    def of(cls, ownership: Sequence[str], parties: Sequence[str] | None = None) -> PartyRegistry:
        """Registry from per-qubit owners; party order defaults to first appearance."""
        if parties is None:
            parties = list(dict.fromkeys(ownership))
        return cls(tuple(parties), tuple(ownership))

    @classmethod
    def solo(cls, n: int) -> PartyRegistry:
        """Every qubit held by its own party ``q0``, ``q1``, ..."""
        return cls.of([f"q{q}" for q in range(n)])

    @property
    def n(self) -> int:
        return len(self.ownership)

    def owner(self, qubit: int) -> str:
        if not 0 <= qubit < self.n:
            raise QubitIndexError(f"Qubit {qubit} out of range for {self.n} qubits")
        return self.ownership[qubit]

    def _check_party(self, party: str):
        if party not in self.parties:
            raise QubitIndexError(f"Unknown party {party!r}")

    def qubits_of(self, party: str) -> tuple[int, ...]:
        self._check_party(party)
        return tuple(q for q, owner in enumerate(self.ownership) if owner == party)

    def group_of(self, party: str) -> frozenset[str]:
        self._check_party(party)
        return next((g for g in self.colocated if party in g), frozenset({party}))

    def are_colocated(self, first: str, second: str) -> bool:
        return second in self.group_of(first)

    def bring_together(self, first: str, second: str) -> PartyRegistry:
        self._check_party(first)
        self._check_party(second)
        if first == second:
            raise ProtocolError(f"Cannot bring party {first!r} together with itself")
        merged = self.group_of(first) | self.group_of(second)
        groups = [g for g in self.colocated if not g & merged] + [merged]
        return PartyRegistry(self.parties, self.ownership, tuple(groups))

    def tensor(self, other: PartyRegistry) -> PartyRegistry:
        """Registry of two registers side by side; equal labels denote the same party."""
        parties = self.parties + tuple(p for p in other.parties if p not in self.parties)
        groups: list[frozenset[str]] = []
        for group in self.colocated + other.colocated:
            overlapping = [g for g in groups if g & group]
            groups = [g for g in groups if not g & group]
            groups.append(frozenset(group.union(*overlapping)))
        return PartyRegistry(parties, self.ownership + other.ownership, tuple(groups))

    def restricted(self, qubits: Sequence[int]) -> PartyRegistry:
        ownership = tuple(self.owner(q) for q in qubits)
        kept = set(ownership)
        parties = tuple(p for p in self.parties if p in kept)
        groups = tuple(g & kept for g in self.colocated)
        return PartyRegistry(parties, ownership, groups)


class Member(NamedTuple):
    weight: Fraction
    state: StabilizerState


def _is_dyadic(weight: Fraction) -> bool:
    return weight.denominator & (weight.denominator - 1) == 0


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A finite mixture ``sum_k w_k |psi_k><psi_k|`` with exact rational weights.

    Measured-out qubits stay in the register, reset to |0>, and are listed in
    ``consumed``; marginals refuse to include them.
    """

    n: int
    _members: tuple[Member, ...] = field(repr=False)
    registry: PartyRegistry
    consumed: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "_members", tuple(Member(*m) for m in self._members))
        object.__setattr__(self, "consumed", frozenset(self.consumed))
        if not self._members:
            raise InvalidStateError("An ensemble needs at least one member")
        if self.registry.n != self.n:
            raise InvalidStateError(
                f"Registry covers {self.registry.n} qubits, ensemble has {self.n}"
            )
        total = Fraction(0)
        for weight, state in self._members:
            if not isinstance(weight, Fraction) or weight <= 0:
                raise InvalidStateError(f"Member weights must be positive fractions, got {weight!r}")
            if state.n != self.n:
                raise InvalidStateError(f"Member on {state.n} qubits in a {self.n}-qubit ensemble")
            total += weight
        if total != 1:
            raise InvalidStateError(f"Member weights sum to {total}, not 1")
        if any(not 0 <= q < self.n for q in self.consumed):
            raise QubitIndexError(f"Consumed qubits {sorted(self.consumed)} out of range")

    @classmethod
    def pure(cls, state: StabilizerState, registry: PartyRegistry | None = None) -> Ensemble:
        return cls(state.n, (Member(Fraction(1), state),), registry or PartyRegistry.solo(state.n))

    @classmethod
    def uniform(
        cls, states: Sequence[StabilizerState], registry: PartyRegistry | None = None
    ) -> Ensemble:
        weight = Fraction(1, len(states))
        return mix([(weight, s) for s in states], registry)

    def __len__(self) -> int:
        return len(self._members)

    def hidden_members(self) -> tuple[Member, ...]:
        """Member view for test introspection only."""
        return self._members

    def relabelled(self, registry: PartyRegistry) -> Ensemble:
        """The same mixture handed to other owners; co-location is whatever ``registry`` says."""
        if registry.n != self.n:
            raise InvalidStateError(
                f"Registry covers {registry.n} qubits, ensemble has {self.n}"
            )
        return self._replace(self._members, registry=registry)

    @property
    def is_dyadic(self) -> bool:
        return all(_is_dyadic(m.weight) for m in self._members)

    @property
    def live_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n) if q not in self.consumed)

    @cached_property
    def _signature(self) -> frozenset[tuple[StabilizerState, Fraction]]:
        weights: dict[StabilizerState, Fraction] = {}
        for weight, state in self._members:
            weights[state] = weights.get(state, Fraction(0)) + weight
        return frozenset(weights.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (
            self.n == other.n
            and self.registry == other.registry
            and self.consumed == other.consumed
            and self._signature == other._signature
        )

    def __hash__(self) -> int:
        return hash((self.n, self.registry, self.consumed, self._signature))

    def __repr__(self) -> str:
        return (
            f"Ensemble(n={self.n}, members={len(self)}, "
            f"parties={self.registry.parties}, consumed={sorted(self.consumed)})"
        )

    def _replace(self, members: Iterable[Member], **changes) -> Ensemble:
        return Ensemble(
            changes.get("n", self.n),
            tuple(members),
            changes.get("registry", self.registry),
            changes.get("consumed", self.consumed),
        )


class PauliMeasurement(NamedTuple):
    pauli: PauliString


class BellMeasurement(NamedTuple):
    qa: int
    qb: int


class Outcome(NamedTuple):
    probability: Fraction
    ensemble: Ensemble


def mix(
    items: Iterable[tuple[Fraction | int, Ensemble | StabilizerState]],
    registry: PartyRegistry | None = None,
) -> Ensemble:
    """Flatten a weighted list of ensembles and pure states into one ensemble."""
    items = [(Fraction(w), item) for w, item in items]
    if not items:
        raise InvalidStateError("Nothing to mix")
    for weight, _ in items:
        if weight <= 0 or not _is_dyadic(weight):
            raise InvalidStateError(f"Mixing weights must be positive dyadic rationals, got {weight}")
    total = sum((w for w, _ in items), Fraction(0))
    if total != 1:
        raise InvalidStateError(f"Mixing weights sum to {total}, not 1")

    consumed: frozenset[int] | None = None
    for _, item in items:
        if isinstance(item, Ensemble):
            if registry is None:
                registry = item.registry
            elif item.registry != registry:
                raise InvalidStateError("Cannot mix ensembles with different registries")
            if consumed is None:
                consumed = item.consumed
            elif item.consumed != consumed:
                raise InvalidStateError(
                    f"Cannot mix ensembles with consumed qubits {sorted(consumed)} "
                    f"and {sorted(item.consumed)}"
                )
    if consumed is None:
        consumed = frozenset()
    if registry is None:
        registry = PartyRegistry.solo(items[0][1].n)

    members: list[Member] = []
    for weight, item in items:
        if isinstance(item, Ensemble):
            members.extend(Member(weight * m.weight, m.state) for m in item._members)
        else:
            members.append(Member(weight, item))
    return canonical_merge(Ensemble(registry.n, tuple(members), registry, consumed))


def map_members(e: Ensemble, circuit: Iterable[GateOp] | PauliString) -> Ensemble:
    """Apply the same unitary to every member; weights are untouched."""
    if isinstance(circuit, PauliString):
        return apply_pauli(e, circuit)
    circuit = list(circuit)
    return e._replace(Member(m.weight, apply_circuit(m.state, circuit)) for m in e._members)


def apply_pauli(e: Ensemble, pauli: PauliString) -> Ensemble:
    return e._replace(
        Member(m.weight, apply_pauli_to_state(m.state, pauli)) for m in e._members
    )


def branch_measure(
    e: Ensemble, measurement: PauliMeasurement | BellMeasurement
) -> dict[int | BellIndex, Outcome]:
    """Every outcome with its probability and the renormalized post-measurement ensemble."""
    collected: dict[int | BellIndex, list[Member]] = {}
    for weight, state in e._members:
        match measurement:
            case PauliMeasurement(pauli):
                branches = [(b.outcome, b.probability, b.state) for b in measure_pauli(state, pauli)]
            case BellMeasurement(qa, qb):
                branches = [(b.outcome, b.probability, b.state) for b in bell_measure(state, qa, qb)]
            case _:
                raise ProtocolError(f"Unknown measurement {measurement!r}")
        for outcome, probability, post in branches:
            collected.setdefault(outcome, []).append(Member(weight * probability, post))

    order: list[int | BellIndex] = (
        [1, -1] if isinstance(measurement, PauliMeasurement) else list(BellIndex)
    )
    outcomes: dict[int | BellIndex, Outcome] = {}
    for outcome in order:
        if outcome not in collected:
            continue
        joint = collected[outcome]
        probability = sum((m.weight for m in joint), Fraction(0))
        conditional = e._replace(Member(m.weight / probability, m.state) for m in joint)
        outcomes[outcome] = Outcome(probability, canonical_merge(conditional))
    LOGGER.debug(
        "Measured %s on %d members: %s",
        measurement,
        len(e),
        {str(k): str(v.probability) for k, v in outcomes.items()},
    )
    return outcomes


def _check_register_subset(e: Ensemble, qubits: Sequence[int]) -> list[int]:
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"Duplicate qubits in {tuple(qubits)}")
    for q in qubits:
        if not 0 <= q < e.n:
            raise QubitIndexError(f"Qubit {q} out of range for {e.n} qubits")
    return qubits


def densify(e: Ensemble, subset: Sequence[int]) -> DensityMatrix:
    """``sum_k w_k rho_k`` on ``subset``, rows ordered as ``subset``."""
    subset = _check_register_subset(e, subset)
    if len(subset) > DENSIFY_CAP:
        raise DensifyLimitError(f"{len(subset)} qubits exceed the dense cap of {DENSIFY_CAP}")
    spent = e.consumed.intersection(subset)
    if spent:
        raise QubitIndexError(f"Qubits {sorted(spent)} were measured out")
    dim = 1 << len(subset)
    total = np.zeros((dim, dim), dtype=complex)
    for weight, state in e._members:
        total += float(weight) * reduced_density(state, subset).data
    return DensityMatrix(total, qubits=tuple(subset))


def canonical_merge(e: Ensemble) -> Ensemble:
    """Sum the weights of members with equal stabilizer groups, keeping first-seen order."""
    weights: dict[StabilizerState, Fraction] = {}
    for weight, state in e._members:
        weights[state] = weights.get(state, Fraction(0)) + weight
    if len(weights) == len(e):
        return e
    LOGGER.debug("Merged %d members into %d", len(e), len(weights))
    return e._replace(Member(w, s) for s, w in weights.items())


def tensor(first: Ensemble, second: Ensemble) -> Ensemble:
    """Independent resources side by side; ``second``'s qubits are renumbered after ``first``'s."""
    members = [
        Member(w1 * w2, s1.tensor(s2)) for w1, s1 in first._members for w2, s2 in second._members
    ]
    return canonical_merge(
        Ensemble(
            first.n + second.n,
            tuple(members),
            first.registry.tensor(second.registry),
            first.consumed | {q + first.n for q in second.consumed},
        )
    )


def restrict(e: Ensemble, qubits: Sequence[int]) -> Ensemble:
    """Exact marginal on ``qubits`` (new qubit ``j`` is old ``qubits[j]``).

    Every member must be a product across the cut; the discarded factor is
    simply forgotten, which merges members that only differed there.
    """
    qubits = _check_register_subset(e, qubits)
    members = [Member(w, s.restricted_state(qubits)) for w, s in e._members]
    position = {q: j for j, q in enumerate(qubits)}
    return canonical_merge(
        Ensemble(
            len(qubits),
            tuple(members),
            e.registry.restricted(qubits),
            frozenset(position[q] for q in e.consumed if q in position),
        )
    )


def discard(e: Ensemble, qubits: Sequence[int]) -> Ensemble:
    """Reset unentangled qubits to |0> and flag them consumed."""
    qubits = _check_register_subset(e, qubits)
    return canonical_merge(
        e._replace(
            (Member(w, s.reset(qubits)) for w, s in e._members),
            consumed=e.consumed | set(qubits),
        )
    )


def bring_together(e: Ensemble, parties: tuple[str, str]) -> Ensemble:
    """Co-locate two parties; the quantum state is untouched."""
    first, second = parties
    return e._replace(e._members, registry=e.registry.bring_together(first, second))


def rejoin(parts: Iterable[tuple[Fraction, Ensemble]]) -> Ensemble:
    """Forget which branch happened: the probability-weighted union of branch ensembles.

    Unlike ``mix`` the probabilities need not be dyadic, but every part must
    share one registry and one set of consumed qubits.
    """
    parts = list(parts)
    if not parts:
        raise InvalidStateError("Nothing to rejoin")
    first = parts[0][1]
    members: list[Member] = []
    for probability, part in parts:
        if part.registry != first.registry or part.consumed != first.consumed:
            raise InvalidStateError("Branches disagree on registry or consumed qubits")
        members.extend(Member(probability * m.weight, m.state) for m in part._members)
    return canonical_merge(first._replace(members))
