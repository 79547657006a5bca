"""LOCC protocols over singlet chains.

Every protocol here only ever acts on announced measurement outcomes. The
classical side is written into a ``ProtocolTranscript`` whose ``correct``
method refuses corrections keyed by anything that was not announced.

Chains use link numbers starting at 1. Link ``L`` initially holds qubits
``(2L - 2, 2L - 1)``: the left one owned by node ``L - 1`` and the right one
by node ``L``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cache
from typing import Final, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from boundchain.ensemble import (
    BellMeasurement,
    Ensemble,
    PartyRegistry,
    apply_pauli,
    branch_measure,
    discard,
    mix,
    rejoin,
    restrict,
    tensor,
)
from boundchain.ensemble import bring_together as co_locate
from boundchain.errors import InvalidStateError, ProtocolError, QubitIndexError
from boundchain.models import Action, ProtocolTranscript
from boundchain.stabilizer import (
    BellIndex,
    PauliString,
    StabilizerState,
    apply_pauli as apply_pauli_to_state,
    bell_measure,
    prepare_bell,
)
from boundchain.strenum import StrEnum

__all__ = [
    "SINGLET",
    "CorrectionMode",
    "CorrectionTable",
    "conversion_letter",
    "Branch",
    "TeleportResult",
    "teleport",
    "prepare_smolin_direct",
    "prepare_smolin_locc",
    "LinkRole",
    "ChainConfig",
    "ChainState",
    "build_chain",
    "substitute_abe",
    "remove_link",
    "bring_together",
    "bring_together_via_link",
    "Hop",
    "Route",
    "EndToEndResult",
    "run_route",
    "run_end_to_end",
    "run_segments",
    "sample_end_to_end",
    "distill_pair",
    "werner_ensemble",
    "transmit_over_abe",
    "SuperactivationScenario",
    "ActivationScenario",
    "RelayScenario",
    "Remark3Scenario",
    "scenario_fig2",
    "scenario_fig3",
    "scenario_activation",
    "scenario_relay",
    "scenario_remark3",
]


LOGGER: Final = logging.getLogger("boundchain-protocols")

SINGLET: Final = BellIndex.PSI_MINUS
_TEST_STATES: Final = ("+Z", "-Z", "+X", "+Y")
_CLASS_LETTERS: Final = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


class CorrectionMode(StrEnum):
    # composed Pauli applied once at the route end, one branch per outcome history
    Deferred = "deferred"
    # each correction applied at the nearest live downstream qubit; equal branches merge
    Frame = "frame"


def _bell_class(index: BellIndex) -> tuple[int, int]:
    """``(x, z)`` of the Pauli ``P`` with ``|index> = (I x P)|Phi+>``."""
    s_xx, s_zz = index.signs
    return int(s_zz < 0), int(s_xx < 0)


def conversion_letter(source: BellIndex, target: BellIndex) -> str:
    """Single-qubit Pauli that turns Bell state ``source`` into ``target`` on either qubit."""
    sx, sz = _bell_class(source)
    tx, tz = _bell_class(target)
    return _CLASS_LETTERS[(sx ^ tx, sz ^ tz)]


def _teleports(label: str, channel: BellIndex, outcome: BellIndex, letter: str) -> bool:
    expected = StabilizerState.from_labels([label])
    state = expected.tensor(prepare_bell(channel))
    for branch in bell_measure(state, 0, 1):
        if branch.outcome == outcome:
            corrected = apply_pauli_to_state(branch.state, PauliString.single(3, 2, letter))
            return corrected.restricted_state([2]) == expected
    return False


@cache
def _calibrate(channel: BellIndex) -> tuple[tuple[BellIndex, str], ...]:
    entries = []
    for outcome in BellIndex:
        letter = next(
            (
                letter
                for letter in "IXYZ"
                if all(_teleports(label, channel, outcome, letter) for label in _TEST_STATES)
            ),
            None,
        )
        if letter is None:
            raise ProtocolError(f"No Pauli corrects outcome {outcome} over channel {channel}")
        entries.append((outcome, letter))
    LOGGER.debug("Calibrated corrections over %s: %s", channel, entries)
    return tuple(entries)


@dataclass(frozen=True)
class CorrectionTable:
    """Announced Bell outcome to the Pauli the receiver applies, for one channel Bell state."""

    channel: BellIndex
    entries: Mapping[BellIndex, str]

    @classmethod
    def calibrate(cls, channel: BellIndex | str = SINGLET) -> CorrectionTable:
        """Solve the four test-state teleportation constraints by exhaustive search."""
        channel = BellIndex(channel)
        return cls(channel, dict(_calibrate(channel)))

    def letter(self, outcome: BellIndex) -> str:
        return self.entries[outcome]

    def pauli(self, outcome: BellIndex, qubit: int, n: int) -> PauliString:
        return PauliString.single(n, qubit, self.entries[outcome])

    def as_labels(self, outcomes: Iterable[BellIndex] | None = None) -> dict[str, str]:
        return {str(o): self.entries[o] for o in (outcomes if outcomes is not None else BellIndex)}


@dataclass(frozen=True)
class Branch:
    """One announced-outcome branch. ``histories`` lists every outcome sequence merged into it."""

    probability: Fraction
    histories: tuple[tuple[BellIndex, ...], ...]
    ensemble: Ensemble
    frame: Optional[PauliString] = None


def _merge_branches(branches: Sequence[Branch]) -> list[Branch]:
    merged: dict[Ensemble, Branch] = {}
    for branch in branches:
        known = merged.get(branch.ensemble)
        if known is None:
            merged[branch.ensemble] = branch
        else:
            merged[branch.ensemble] = replace(
                known,
                probability=known.probability + branch.probability,
                histories=known.histories + branch.histories,
            )
    return list(merged.values())


def _check_colocated(registry: PartyRegistry, qa: int, qb: int) -> str:
    first, second = registry.owner(qa), registry.owner(qb)
    if not registry.are_colocated(first, second):
        raise ProtocolError(
            f"Qubits {qa} ({first}) and {qb} ({second}) are in different labs; "
            "bring the parties together first"
        )
    return first


class TeleportResult(NamedTuple):
    ensemble: Ensemble
    branches: tuple[Branch, ...]
    transcript: ProtocolTranscript


def teleport(
    e: Ensemble,
    source: int,
    channel: tuple[int, int],
    table: CorrectionTable | None = None,
    *,
    singlet: bool = True,
    transcript: ProtocolTranscript | None = None,
) -> TeleportResult:
    """Move qubit ``source`` to ``channel[1]`` through the pair ``channel``.

    The sender Bell-measures ``(source, channel[0])`` and announces; the
    receiver applies the table's correction for the announced outcome. The
    measured pair is reset and flagged consumed.
    """
    sender, receiver = channel
    if len({source, sender, receiver}) != 3:
        raise QubitIndexError(f"Source {source} and channel {channel} must be three distinct qubits")
    table = table or CorrectionTable.calibrate()
    transcript = transcript if transcript is not None else ProtocolTranscript()
    actor = _check_colocated(e.registry, source, sender)

    transcript.record(actor, Action.BellMeasure, [source, sender])
    outcomes = branch_measure(e, BellMeasurement(source, sender))
    announcement = transcript.announce(
        actor, [source, sender], {str(o): str(p) for o, (p, _) in outcomes.items()}
    )
    transcript.correct(
        e.registry.owner(receiver), [receiver], table.as_labels(outcomes), announcement
    )

    branches = []
    for outcome, (probability, conditional) in outcomes.items():
        conditional = discard(conditional, [source, sender])
        conditional = apply_pauli(conditional, table.pauli(outcome, receiver, e.n))
        branches.append(Branch(probability, ((outcome,),), conditional))
    transcript.channel_uses += 1
    if singlet:
        transcript.singlets_consumed += 1
    return TeleportResult(
        rejoin((b.probability, b.ensemble) for b in branches), tuple(branches), transcript
    )


def _smolin_members(indices: Sequence[BellIndex]) -> list[StabilizerState]:
    return [prepare_bell(i).tensor(prepare_bell(i)) for i in indices]


def prepare_smolin_direct(parties: Sequence[str] = ("A", "B", "C", "D")) -> Ensemble:
    """Uniform mixture of ``|Phi_i>^{AB} |Phi_i>^{CD}`` over the four Bell states."""
    if len(parties) != 4 or len(set(parties)) != 4:
        raise ProtocolError(f"Need four distinct parties, got {tuple(parties)}")
    return Ensemble.uniform(_smolin_members(list(BellIndex)), PartyRegistry.of(list(parties)))


def _install_abe(
    e: Ensemble,
    first: tuple[int, int],
    second: tuple[int, int],
    transcript: ProtocolTranscript,
    table: CorrectionTable,
    hidden: Sequence[BellIndex],
) -> Ensemble:
    """Replace two singlets by the four-party state over their endpoints.

    The two senders share a random Bell index, each prepares two copies of
    that Bell state locally and teleports one half through their singlet.
    The returned register has the same size and layout as ``e``.
    """
    (a, b), (c, d) = first, second
    left, far = e.registry.owner(a), e.registry.owner(c)
    ancillas = Ensemble.uniform(
        _smolin_members(hidden), PartyRegistry.of([left, left, far, far])
    )
    n = e.n
    transcript.record(
        left,
        Action.ShareRandomness,
        [n, n + 1, n + 2, n + 3],
        note=f"uniform Bell index shared with {far}, then forgotten",
    )
    transcript.record(left, Action.Prepare, [n, n + 1])
    transcript.record(far, Action.Prepare, [n + 2, n + 3])
    extended = tensor(e, ancillas)
    extended = teleport(extended, n + 1, (a, b), table, transcript=transcript).ensemble
    extended = teleport(extended, n + 3, (c, d), table, transcript=transcript).ensemble
    layout = [n if q == a else n + 2 if q == c else q for q in range(n)]
    return restrict(extended, layout)


def prepare_smolin_locc(
    parties: Sequence[str] = ("A", "B", "C", "D"),
    *,
    table: CorrectionTable | None = None,
    hidden: Sequence[BellIndex] = tuple(BellIndex),
) -> tuple[Ensemble, ProtocolTranscript]:
    """Four-party state from the singlets AB and CD and shared randomness between A and C."""
    if len(parties) != 4 or len(set(parties)) != 4:
        raise ProtocolError(f"Need four distinct parties, got {tuple(parties)}")
    singlets = prepare_bell(SINGLET).tensor(prepare_bell(SINGLET))
    e = Ensemble.pure(singlets, PartyRegistry.of(list(parties)))
    transcript = ProtocolTranscript()
    state = _install_abe(
        e, (0, 1), (2, 3), transcript, table or CorrectionTable.calibrate(), hidden
    )
    return state, transcript


class LinkRole(StrEnum):
    Singlet = "singlet"
    Abe = "abe"
    Removed = "removed"
    Contracted = "contracted"


@dataclass(frozen=True)
class ChainConfig:
    """Node labels, the role of every link and the qubits currently carrying each link."""

    labels: tuple[str, ...]
    roles: tuple[LinkRole, ...]
    endpoints: tuple[tuple[int, int], ...]
    groups: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if len(self.roles) != self.link_count or len(self.endpoints) != self.link_count:
            raise ProtocolError("Every adjacent node pair needs exactly one link")
        seen: set[int] = set()
        for i, j in self.groups:
            if i == j or {i, j} & seen:
                raise ProtocolError(f"ABE group ({i}, {j}) overlaps another group")
            seen |= {i, j}
            if self.role(i) is not LinkRole.Abe or self.role(j) is not LinkRole.Abe:
                raise ProtocolError(f"ABE group ({i}, {j}) references non-ABE links")

    @classmethod
    def uniform(cls, labels: Sequence[str]) -> ChainConfig:
        m = len(labels) - 1
        return cls(
            tuple(labels),
            (LinkRole.Singlet,) * m,
            tuple((2 * k, 2 * k + 1) for k in range(m)),
        )

    @property
    def link_count(self) -> int:
        return len(self.labels) - 1

    def _check_link(self, link: int):
        if not 1 <= link <= self.link_count:
            raise ProtocolError(f"Link {link} outside 1..{self.link_count}")

    def role(self, link: int) -> LinkRole:
        self._check_link(link)
        return self.roles[link - 1]

    def qubits(self, link: int) -> tuple[int, int]:
        self._check_link(link)
        return self.endpoints[link - 1]

    def nodes(self, link: int) -> tuple[str, str]:
        self._check_link(link)
        return self.labels[link - 1], self.labels[link]

    def group_of(self, link: int) -> Optional[tuple[int, int]]:
        return next((g for g in self.groups if link in g), None)

    def with_link(
        self, link: int, role: LinkRole | None = None, endpoints: tuple[int, int] | None = None
    ) -> ChainConfig:
        self._check_link(link)
        roles = list(self.roles)
        ends = list(self.endpoints)
        if role is not None:
            roles[link - 1] = role
        if endpoints is not None:
            ends[link - 1] = endpoints
        return replace(self, roles=tuple(roles), endpoints=tuple(ends))

    def segments(self) -> list[list[int]]:
        """Maximal runs of usable links; removed links split the chain."""
        runs: list[list[int]] = [[]]
        for link in range(1, self.link_count + 1):
            match self.role(link):
                case LinkRole.Removed:
                    runs.append([])
                case LinkRole.Contracted:
                    pass
                case _:
                    runs[-1].append(link)
        return [run for run in runs if run]

    def route(self, links: Sequence[int]) -> Route:
        hops = tuple(Hop(*self.qubits(link)) for link in links)
        singlets = frozenset(k for k, link in enumerate(links) if self.role(link) is LinkRole.Singlet)
        return Route(hops, singlets)

    def intact(self, links: Sequence[int]) -> bool:
        """True when every ABE group touching ``links`` has both of its links inside."""
        inside = set(links)
        return all(set(g) <= inside or not set(g) & inside for g in self.groups)

    def split_groups(self) -> list[tuple[int, int]]:
        """ABE groups whose two links ended up in different segments."""
        segment_of = {link: k for k, links in enumerate(self.segments()) for link in links}
        return [g for g in self.groups if segment_of[g[0]] != segment_of[g[1]]]

    def group_label(self, group: tuple[int, int]) -> str:
        i, j = group
        return "".join(self.nodes(i) + self.nodes(j))


@dataclass(frozen=True)
class ChainState:
    ensemble: Ensemble
    config: ChainConfig
    transcript: ProtocolTranscript = field(default_factory=ProtocolTranscript)

    @property
    def registry(self) -> PartyRegistry:
        return self.ensemble.registry


def build_chain(m: int, labels: Sequence[str] | None = None) -> ChainState:
    """``m`` singlets joining ``m + 1`` nodes in a line."""
    if m < 1:
        raise ProtocolError(f"A chain needs at least one link, got {m}")
    if labels is None:
        labels = [chr(ord("A") + k) for k in range(m + 1)]
    if len(labels) != m + 1 or len(set(labels)) != m + 1:
        raise ProtocolError(f"Need {m + 1} distinct node labels, got {tuple(labels)}")
    state = prepare_bell(SINGLET)
    for _ in range(m - 1):
        state = state.tensor(prepare_bell(SINGLET))
    owners = [labels[k + side] for k in range(m) for side in (0, 1)]
    registry = PartyRegistry.of(owners, parties=list(labels))
    LOGGER.debug("Built a %d-link chain over %s", m, "".join(labels))
    return ChainState(Ensemble.pure(state, registry), ChainConfig.uniform(labels))


def substitute_abe(
    chain: ChainState,
    i: int,
    j: int,
    *,
    table: CorrectionTable | None = None,
    hidden: Sequence[BellIndex] = tuple(BellIndex),
) -> ChainState:
    """Convert singlet links ``i`` and ``j`` into one four-party state by LOCC.

    ``hidden`` is the set the shared random Bell index is drawn from; narrowing
    it is only useful for replay harnesses.
    """
    config = chain.config
    if i == j:
        raise ProtocolError(f"Cannot pair link {i} with itself")
    for link in (i, j):
        if config.role(link) is not LinkRole.Singlet:
            raise ProtocolError(f"Link {link} is {config.role(link)}, not a singlet")
    if len(hidden) & (len(hidden) - 1):
        raise InvalidStateError(f"Shared randomness over {len(hidden)} values is not dyadic")
    first, second = sorted((i, j))
    transcript = chain.transcript.model_copy(deep=True)
    ensemble = _install_abe(
        chain.ensemble,
        config.qubits(first),
        config.qubits(second),
        transcript,
        table or CorrectionTable.calibrate(),
        hidden,
    )
    config = config.with_link(first, LinkRole.Abe).with_link(second, LinkRole.Abe)
    config = replace(config, groups=config.groups + ((first, second),))
    LOGGER.debug("Substituted links %d and %d by an ABE group", first, second)
    return ChainState(ensemble, config, transcript)


def remove_link(chain: ChainState, link: int) -> ChainState:
    if chain.config.role(link) is not LinkRole.Singlet:
        raise ProtocolError(f"Only singlet links can be removed; link {link} is {chain.config.role(link)}")
    return replace(chain, config=chain.config.with_link(link, LinkRole.Removed))


def bring_together(e: Ensemble, parties: tuple[str, str]) -> Ensemble:
    """Put two parties in one lab so they may act jointly; no quantum operation happens."""
    return co_locate(e, parties)


def bring_together_via_link(
    chain: ChainState,
    link: int,
    mover: str,
    *,
    table: CorrectionTable | None = None,
) -> ChainState:
    """Spend singlet ``link`` to move ``mover``'s other qubit to the node across the link.

    The mover Bell-measures its two qubits and announces, the node across the
    link corrects, and the chain is contracted: the neighbouring link now ends
    at the receiving node.
    """
    config = chain.config
    if config.role(link) is not LinkRole.Singlet:
        raise ProtocolError(f"Link {link} is {config.role(link)}, not a usable singlet")
    left_node, right_node = config.nodes(link)
    near, far = config.qubits(link)
    if mover == right_node:
        neighbour = link + 1
        source = config.qubits(neighbour)[0] if neighbour <= config.link_count else None
        sender, receiver = far, near
    elif mover == left_node:
        neighbour = link - 1
        source = config.qubits(neighbour)[1] if neighbour >= 1 else None
        sender, receiver = near, far
    else:
        raise ProtocolError(f"{mover} is not an endpoint of link {link}")
    if source is None or config.role(neighbour) in (LinkRole.Removed, LinkRole.Contracted):
        raise ProtocolError(f"{mover} holds no other live link to carry across link {link}")

    transcript = chain.transcript.model_copy(deep=True)
    transcript.record(
        mover,
        Action.BringTogether,
        [source, sender, receiver],
        note=f"{mover} joins {left_node if mover == right_node else right_node}",
    )
    result = teleport(chain.ensemble, source, (sender, receiver), table, transcript=transcript)
    ends = config.qubits(neighbour)
    ends = (receiver, ends[1]) if mover == right_node else (ends[0], receiver)
    config = config.with_link(link, LinkRole.Contracted).with_link(neighbour, endpoints=ends)
    return ChainState(result.ensemble, config, transcript)


class Hop(NamedTuple):
    left: int
    right: int


@dataclass(frozen=True)
class Route:
    """Hops from one end node to the other; consecutive hops meet in one lab."""

    hops: tuple[Hop, ...]
    singlet_hops: frozenset[int] = frozenset()

    def __post_init__(self):
        if not self.hops:
            raise ProtocolError("A route needs at least one hop")
        qubits = [q for hop in self.hops for q in hop]
        if len(set(qubits)) != len(qubits):
            raise ProtocolError(f"Route reuses qubits: {self.hops}")

    @property
    def ends(self) -> tuple[int, int]:
        return self.hops[0].left, self.hops[-1].right

    @property
    def junctions(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (self.hops[k].right, self.hops[k + 1].left) for k in range(len(self.hops) - 1)
        )

    def remapped(self, mapping: Mapping[int, int]) -> Route:
        return Route(
            tuple(Hop(mapping[h.left], mapping[h.right]) for h in self.hops), self.singlet_hops
        )


@dataclass(frozen=True)
class EndToEndResult:
    branches: tuple[Branch, ...]
    route: Route
    transcript: ProtocolTranscript
    mode: CorrectionMode
    measured: tuple[int, ...]
    sampled: bool = False

    @property
    def end_qubits(self) -> tuple[int, int]:
        return self.route.ends

    @property
    def probability(self) -> Fraction:
        return sum((b.probability for b in self.branches), Fraction(0))

    def ensemble(self) -> Ensemble:
        """All branches rejoined, as seen by someone who ignores the announcements."""
        return rejoin((b.probability / self.probability, b.ensemble) for b in self.branches)

    @property
    def remaining(self) -> tuple[int, ...]:
        return tuple(k for k in range(len(self.route.junctions)) if k not in self.measured)


def _downstream_target(route: Route, junction: int, measured: set[int]) -> int:
    k = junction + 1
    while k < len(route.junctions) and k in measured:
        k += 1
    return route.hops[k].right


def run_route(
    e: Ensemble,
    route: Route,
    order: Sequence[int] | None = None,
    *,
    mode: CorrectionMode = CorrectionMode.Frame,
    table: CorrectionTable | None = None,
    transcript: ProtocolTranscript | None = None,
    merge: bool = True,
    rng: np.random.Generator | None = None,
) -> EndToEndResult:
    """Bell-measure the junctions listed in ``order`` (default: all, left to right).

    Every junction measurement teleports the qubit arriving from the left one
    hop further. With ``rng`` only one sampled outcome is followed.
    """
    table = table or CorrectionTable.calibrate()
    transcript = transcript if transcript is not None else ProtocolTranscript()
    junctions = route.junctions
    order = list(range(len(junctions))) if order is None else list(order)
    if len(set(order)) != len(order) or any(not 0 <= k < len(junctions) for k in order):
        raise ProtocolError(f"Order {order} is not a selection of junctions 0..{len(junctions) - 1}")
    end = route.ends[1]

    branches = [
        Branch(
            Fraction(1),
            ((),),
            e,
            PauliString.identity(e.n) if mode is CorrectionMode.Deferred else None,
        )
    ]
    measured: set[int] = set()
    for k in order:
        qa, qb = junctions[k]
        actor = _check_colocated(e.registry, qa, qb)
        target = end if mode is CorrectionMode.Deferred else _downstream_target(route, k, measured)
        transcript.record(actor, Action.BellMeasure, [qa, qb])

        expanded: list[Branch] = []
        totals: dict[BellIndex, Fraction] = {}
        for branch in branches:
            outcomes = list(branch_measure(branch.ensemble, BellMeasurement(qa, qb)).items())
            if rng is not None:
                weights = np.array([float(p) for _, (p, _) in outcomes])
                outcomes = [outcomes[int(rng.choice(len(outcomes), p=weights / weights.sum()))]]
            for outcome, (probability, conditional) in outcomes:
                totals[outcome] = totals.get(outcome, Fraction(0)) + branch.probability * probability
                conditional = discard(conditional, [qa, qb])
                correction = table.pauli(outcome, target, e.n)
                frame = branch.frame
                if mode is CorrectionMode.Deferred:
                    frame = correction * frame
                else:
                    conditional = apply_pauli(conditional, correction)
                expanded.append(
                    Branch(
                        branch.probability * probability,
                        tuple(h + (outcome,) for h in branch.histories),
                        conditional,
                        frame,
                    )
                )

        announced = [o for o in BellIndex if o in totals]
        announcement = transcript.announce(
            actor, [qa, qb], {str(o): str(totals[o]) for o in announced}
        )
        transcript.correct(
            e.registry.owner(target),
            [target],
            table.as_labels(announced),
            announcement,
            note="deferred to the route end" if mode is CorrectionMode.Deferred else "",
        )
        transcript.channel_uses += 1
        if k + 1 in route.singlet_hops:
            transcript.singlets_consumed += 1
        measured.add(k)
        branches = (
            _merge_branches(expanded) if mode is CorrectionMode.Frame and merge else expanded
        )
        LOGGER.debug("Junction %d (%s): %d branches", k, actor, len(branches))

    if mode is CorrectionMode.Deferred and len(measured) == len(junctions):
        branches = [
            replace(b, ensemble=apply_pauli(b.ensemble, b.frame)) for b in branches
        ]
    return EndToEndResult(
        tuple(branches), route, transcript, mode, tuple(order), sampled=rng is not None
    )


def _order_from_labels(
    registry: PartyRegistry, route: Route, order: Sequence[str] | None
) -> list[int] | None:
    if order is None:
        return None
    by_actor = {registry.owner(qa): k for k, (qa, _) in enumerate(route.junctions)}
    if sorted(order) != sorted(by_actor):
        raise ProtocolError(
            f"Order {list(order)} is not a permutation of the interior nodes {sorted(by_actor)}"
        )
    return [by_actor[label] for label in order]


def _single_route(chain: ChainState) -> Route:
    segments = chain.config.segments()
    if len(segments) != 1:
        raise ProtocolError(
            f"The chain is broken into {len(segments)} segments; run them with run_segments"
        )
    return chain.config.route(segments[0])


def run_end_to_end(
    chain: ChainState,
    order: Sequence[str] | None = None,
    *,
    mode: CorrectionMode = CorrectionMode.Frame,
    table: CorrectionTable | None = None,
) -> EndToEndResult:
    """Standard teleportation protocol: every interior node Bell-measures and announces.

    ``order`` lists interior node labels; the default is left to right.
    """
    if chain.ensemble.n != 2 * chain.config.link_count:
        raise ProtocolError("Chain register does not hold two qubits per link")
    route = _single_route(chain)
    return run_route(
        chain.ensemble,
        route,
        _order_from_labels(chain.registry, route, order),
        mode=mode,
        table=table,
        transcript=chain.transcript.model_copy(deep=True),
    )


def run_segments(
    chain: ChainState,
    *,
    mode: CorrectionMode = CorrectionMode.Frame,
    table: CorrectionTable | None = None,
) -> tuple[Ensemble, list[EndToEndResult]]:
    """Run the protocol independently on every connected segment.

    Segments share no qubits, so each one starts from the rejoined output of
    the previous one.
    """
    ensemble = chain.ensemble
    transcript = chain.transcript.model_copy(deep=True)
    results = []
    for links in chain.config.segments():
        result = run_route(
            ensemble, chain.config.route(links), mode=mode, table=table, transcript=transcript
        )
        results.append(result)
        ensemble = result.ensemble()
    return ensemble, results


def sample_end_to_end(
    chain: ChainState,
    rng: np.random.Generator,
    order: Sequence[str] | None = None,
    *,
    table: CorrectionTable | None = None,
) -> EndToEndResult:
    """Follow one seeded outcome per Bell measurement; demonstration only."""
    route = _single_route(chain)
    return run_route(
        chain.ensemble,
        route,
        _order_from_labels(chain.registry, route, order),
        table=table,
        transcript=chain.transcript.model_copy(deep=True),
        rng=rng,
    )


def distill_pair(
    e: Ensemble, parties: tuple[str, str], *, table: CorrectionTable | None = None
) -> EndToEndResult:
    """Bring two single-qubit parties together, Bell-measure them, correct at one of the others.

    On the four-party state this leaves the other two parties with a singlet
    whichever two came together.
    """
    first, second = parties
    together = bring_together(e, parties)
    registry = together.registry
    held = {party: registry.qubits_of(party) for party in parties}
    if any(len(qubits) != 1 for qubits in held.values()):
        raise ProtocolError(f"Distillation needs one qubit per joining party, got {held}")
    (qx,), (qy,) = held[first], held[second]
    others = [q for q in together.live_qubits if q not in (qx, qy)]
    if len(others) != 2:
        raise InvalidStateError(f"Expected two other live qubits, got {others}")
    qp, qq = others
    route = Route((Hop(qp, qx), Hop(qy, qq)))
    transcript = ProtocolTranscript()
    transcript.record(first, Action.BringTogether, [qx, qy], note=f"{first} joins {second}")
    return run_route(together, route, table=table, transcript=transcript)


def werner_ensemble(p: Fraction, parties: Sequence[str] = ("A", "C")) -> Ensemble:
    """``p |Psi-><Psi-| + (1 - p) I/4`` as a Bell-diagonal mixture; needs dyadic weights."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise InvalidStateError(f"Werner parameter must lie in [0, 1], got {p}")
    rest = (1 - p) / 4
    items = [(p + rest if i is SINGLET else rest, prepare_bell(i)) for i in BellIndex]
    return mix([(w, s) for w, s in items if w], PartyRegistry.of(list(parties)))


def transmit_over_abe(
    message: Ensemble,
    channel: Ensemble | None = None,
    *,
    table: CorrectionTable | None = None,
) -> tuple[Ensemble, ProtocolTranscript]:
    """Teleport a two-qubit message held by A and C through the AB and CD pairs.

    The receivers B and D end up with the message twirled by ``s_i x s_i``.
    """
    if message.n != 2:
        raise InvalidStateError(f"The message must have two qubits, got {message.n}")
    if channel is None:
        channel = prepare_smolin_direct()
    sender_left, _, sender_right, _ = channel.registry.ownership
    message = message.relabelled(PartyRegistry.of([sender_left, sender_right]))
    e = tensor(message, channel)
    transcript = ProtocolTranscript()
    e = teleport(e, 0, (2, 3), table, singlet=False, transcript=transcript).ensemble
    e = teleport(e, 1, (4, 5), table, singlet=False, transcript=transcript).ensemble
    return restrict(e, [3, 5]), transcript


# Scenario constructors. Each one performs the LOCC set-up of its chain and
# keeps the qubits of every constituent four-party state for the checks.


def _chain_with_groups(labels: str, groups: Sequence[tuple[int, int]]) -> ChainState:
    chain = build_chain(len(labels) - 1, list(labels))
    for i, j in groups:
        chain = substitute_abe(chain, i, j)
    return chain


def _constituents(config: ChainConfig) -> tuple[tuple[int, int, int, int], ...]:
    return tuple(config.qubits(i) + config.qubits(j) for i, j in config.groups)


@dataclass(frozen=True)
class SuperactivationScenario:
    chain: ChainState
    constituents: tuple[tuple[int, int, int, int], ...]

    @property
    def route(self) -> Route:
        return _single_route(self.chain)

    @property
    def end_qubits(self) -> tuple[int, int]:
        return self.chain.config.qubits(1)[0], self.chain.config.qubits(self.chain.config.link_count)[1]

    def distill(
        self, mode: CorrectionMode = CorrectionMode.Frame, order: Sequence[str] | None = None
    ) -> EndToEndResult:
        return run_end_to_end(self.chain, order, mode=mode)


def scenario_fig2() -> SuperactivationScenario:
    """Seven singlets, two ABE groups; the three remaining singlets bring F, G, H to B, C, D."""
    chain = _chain_with_groups("ABFGCDHE", [(1, 5), (3, 7)])
    for link, mover in ((2, "F"), (4, "G"), (6, "H")):
        chain = bring_together_via_link(chain, link, mover)
    return SuperactivationScenario(chain, _constituents(chain.config))


def scenario_fig3(bridged: bool = True) -> SuperactivationScenario:
    """Three ABE groups on the seven-singlet chain; the last singlet brings G to C.

    Without the bring-together the CG singlet is removed instead: neighbouring
    groups then share fewer than three parties and the chain falls apart.
    """
    chain = _chain_with_groups("ABFGCDHE", [(1, 5), (3, 7), (2, 6)])
    if bridged:
        chain = bring_together_via_link(chain, 4, "G")
    else:
        chain = remove_link(chain, 4)
    return SuperactivationScenario(chain, _constituents(chain.config))


@dataclass(frozen=True)
class ActivationScenario:
    """The three-group configuration after C alone has measured and announced.

    Every branch holds ``rho_x`` on A, B, F, D, H, E next to the untouched
    BDFH state.
    """

    branches: tuple[Branch, ...]
    rho_x_qubits: tuple[int, ...]
    auxiliary_qubits: tuple[int, ...]
    completion_route: Route
    transcript: ProtocolTranscript

    @property
    def parties(self) -> tuple[str, ...]:
        registry = self.branches[0].ensemble.registry
        return tuple(registry.owner(q) for q in self.rho_x_qubits)

    def rho_x(self, branch: Branch) -> Ensemble:
        return restrict(branch.ensemble, self.rho_x_qubits)

    def auxiliary(self, branch: Branch) -> Ensemble:
        return restrict(branch.ensemble, self.auxiliary_qubits)

    def complete(
        self,
        branch: Branch,
        mode: CorrectionMode = CorrectionMode.Frame,
        order: Sequence[str] | None = None,
    ) -> EndToEndResult:
        """Finish the protocol on ``rho_x`` tensored with the auxiliary state."""
        e = tensor(self.rho_x(branch), self.auxiliary(branch))
        route = self.completion_route
        return run_route(e, route, _order_from_labels(e.registry, route, order), mode=mode)


def scenario_activation() -> ActivationScenario:
    fig3 = scenario_fig3()
    chain, route = fig3.chain, fig3.route
    (c_junction,) = [
        k for k, (qa, _) in enumerate(route.junctions) if chain.registry.owner(qa) == "C"
    ]
    partial = run_route(
        chain.ensemble,
        route,
        [c_junction],
        transcript=chain.transcript.model_copy(deep=True),
        merge=False,
    )
    (a, b, _, d), (f, _, h, e), auxiliary = fig3.constituents
    rho_x = (a, b, f, d, h, e)

    # C's Bell measurement fused the hops on either side of it
    hops = list(route.hops)
    fused = Hop(hops[c_junction].left, hops[c_junction + 1].right)
    live = hops[:c_junction] + [fused] + hops[c_junction + 2 :]
    position = {q: k for k, q in enumerate(rho_x + auxiliary)}
    completion = Route(tuple(live)).remapped(position)
    return ActivationScenario(partial.branches, rho_x, auxiliary, completion, partial.transcript)


@dataclass(frozen=True)
class RelayScenario:
    chain: ChainState

    @property
    def route(self) -> Route:
        return _single_route(self.chain)

    def distill(
        self, order: Sequence[str] | None = None, mode: CorrectionMode = CorrectionMode.Frame
    ) -> EndToEndResult:
        return run_end_to_end(self.chain, order, mode=mode)


def scenario_relay() -> RelayScenario:
    """Four singlets A-B-C-D-E turned into the ABCD and BCDE states."""
    return RelayScenario(_chain_with_groups("ABCDE", [(1, 3), (2, 4)]))


@dataclass(frozen=True)
class Remark3Scenario:
    chain: ChainState
    removed: tuple[int, ...]

    def run(self, mode: CorrectionMode = CorrectionMode.Frame) -> tuple[Ensemble, list[EndToEndResult]]:
        return run_segments(self.chain, mode=mode)

    def split_groups(self) -> list[tuple[int, int]]:
        return self.chain.config.split_groups()


def scenario_remark3(removed: Sequence[int] = (4,)) -> Remark3Scenario:
    """The two-group seven-singlet chain with connecting singlets removed instead of used."""
    chain = _chain_with_groups("ABFGCDHE", [(1, 5), (3, 7)])
    for link in removed:
        chain = remove_link(chain, link)
    return Remark3Scenario(chain, tuple(removed))
