"""Certification batteries.

Every check ends up as a ``Claim`` whose status follows mechanically from its
numeric evidence and the tolerance it was compared against. Undistillability
is only ever claimed through PPT certificates; distillability is shown
constructively by a protocol reaching singlet fidelity one in every branch.
"""

import logging
from itertools import combinations, permutations
from typing import Callable, Final, NamedTuple, Optional, Sequence

from boundchain.density import (
    Cut,
    DensityMatrix,
    fidelity_pure,
    maximally_mixed,
    negativity,
    permute_parties,
    ppt_certificate,
    smolin_density,
)
from boundchain.ensemble import Ensemble, densify
from boundchain.errors import InvalidStateError, SampledModeError
from boundchain.models import (
    CertificationReport,
    Claim,
    ProtocolTranscript,
    RunMode,
    Scenario,
    ScenarioConfig,
    Tolerances,
)
from boundchain.protocols import (
    SINGLET,
    ChainState,
    CorrectionMode,
    EndToEndResult,
    build_chain,
    distill_pair,
    prepare_smolin_locc,
    remove_link,
    run_end_to_end,
    run_segments,
    scenario_activation,
    scenario_fig2,
    scenario_fig3,
    scenario_relay,
    scenario_remark3,
    substitute_abe,
)
from boundchain.stabilizer import BellIndex

__all__ = [
    "FidelityReport",
    "smolin_battery",
    "pairwise_undistillability",
    "distill_fidelity",
    "depolarization_check",
    "certify_smolin",
    "certify_chain",
    "certify_fig2",
    "certify_fig3",
    "certify_activation",
    "certify_relay",
    "certify_remark3",
    "certify",
    "configured_chain",
]


LOGGER: Final = logging.getLogger("boundchain-verification")

SMOLIN_SYMMETRIES: Final = {"ACBD": (0, 2, 1, 3), "ADCB": (0, 3, 2, 1)}
TWO_TWO_CUTS: Final = ((0, 1), (0, 2), (0, 3))
ONE_THREE_CUTS: Final = ((0,), (1,), (2,), (3,))
DEFERRED_CHECK_MAX_LINKS: Final = 4
REMARK3_SWEEP: Final = ((), (2,), (4,), (6,))

ANCHORS: Final = {
    "matrix": "four-party state: uniform mixture of doubled Bell pairs",
    "symmetry": "four-party state: symmetric under interchange of parties",
    "ppt_2_2": "four-party state: PPT across every 2:2 cut",
    "npt_1_3": "four-party state: NPT across every 1:3 cut",
    "pair_distill": "four-party state: any two parties together distil a singlet for the others",
    "pair_ppt": "pairwise PPT certificate: undistillable across the pair cut",
    "distill": "standard teleportation protocol: singlet between the end nodes",
    "depolarized": "broken chain acts as a depolarizing channel",
    "constituent": "constituent four-party state matches the reference mixture",
    "order": "Bell measurements commute: every interior order gives the same output",
    "deferred": "deferred and frame corrections give the same end state",
    "members": "tensor product of three four-member mixtures",
    "ownership": "relay chain: qubits held per node after preparation",
    "branches": "announced outcomes of one interior measurement",
}


class FidelityReport(NamedTuple):
    minimum: float
    weighted: float
    per_branch: list[float]


def _pass_fidelity(value: float, tolerances: Tolerances) -> bool:
    return value >= 1 - tolerances.equality


def _cut_label(names: Sequence[str], left: Sequence[int]) -> str:
    right = [q for q in range(len(names)) if q not in left]
    return "".join(names[q] for q in left) + "|" + "".join(names[q] for q in right)


def _four_party_names(e: Ensemble) -> list[str]:
    registry = e.registry
    if e.n != 4 or len(e.live_qubits) != 4 or len(registry.parties) != 4:
        raise InvalidStateError(f"Expected four parties with one live qubit each, got {e!r}")
    return [registry.owner(q) for q in range(4)]


def distill_fidelity(result: EndToEndResult, target: BellIndex = SINGLET) -> FidelityReport:
    """Fidelity of the end pair with ``target``, per branch and probability-weighted."""
    if result.sampled:
        raise SampledModeError("A sampled run follows one outcome only; certify an exhaustive run")
    if result.remaining:
        raise InvalidStateError(f"Junctions {list(result.remaining)} were never measured")
    ends = list(result.end_qubits)
    per_branch = []
    for branch in result.branches:
        spent = branch.ensemble.consumed.intersection(ends)
        if spent:
            raise InvalidStateError(f"End qubits {sorted(spent)} were measured out")
        per_branch.append(fidelity_pure(densify(branch.ensemble, ends), target))
    weighted = sum(
        float(b.probability / result.probability) * f for b, f in zip(result.branches, per_branch)
    )
    return FidelityReport(min(per_branch), weighted, per_branch)


def _fidelity_claim(
    id: str, result: EndToEndResult, tolerances: Tolerances, anchor: str = ANCHORS["distill"]
) -> Claim:
    report = distill_fidelity(result)
    return Claim.check(
        id,
        anchor,
        _pass_fidelity(report.minimum, tolerances),
        {
            "min_fidelity": report.minimum,
            "weighted_fidelity": report.weighted,
            "branch_fidelities": report.per_branch,
        },
        tolerances.equality,
    )


def smolin_battery(e: Ensemble, tolerances: Optional[Tolerances] = None) -> CertificationReport:
    """The five defining properties of the four-party state, checked on ``e``."""
    tolerances = tolerances or Tolerances()
    names = _four_party_names(e)
    rho = densify(e, range(4))

    deviation = rho.deviation(smolin_density())
    matrix = Claim.check(
        "smolin.matrix",
        ANCHORS["matrix"],
        deviation <= tolerances.equality,
        {"max_deviation": deviation, "eigenvalues": [float(v) for v in rho.eigenvalues]},
        tolerances.equality,
    )

    deviations = {
        "".join(names[p] for p in perm): permute_parties(rho, perm).deviation(rho)
        for perm in SMOLIN_SYMMETRIES.values()
    }
    symmetry = Claim.check(
        "smolin.symmetry",
        ANCHORS["symmetry"],
        max(deviations.values()) <= tolerances.equality,
        deviations,
        tolerances.equality,
    )

    two_two = {
        _cut_label(names, left): ppt_certificate(rho, Cut.of(left, 4), tolerances.ppt)
        for left in TWO_TWO_CUTS
    }
    ppt = Claim.check(
        "smolin.ppt_2_2",
        ANCHORS["ppt_2_2"],
        all(cert.is_ppt for cert in two_two.values()),
        {label: cert.min_eigenvalue for label, cert in two_two.items()},
        tolerances.ppt,
        note="PPT certifies undistillability; the product form is explicit only across AB|CD",
    )

    evidence: dict[str, float] = {}
    npt_everywhere = True
    for left in ONE_THREE_CUTS:
        cut = Cut.of(left, 4)
        cert = ppt_certificate(rho, cut, tolerances.ppt)
        npt_everywhere &= not cert.is_ppt
        label = _cut_label(names, left)
        evidence[f"{label} min_eigenvalue"] = cert.min_eigenvalue
        evidence[f"{label} negativity"] = negativity(rho, cut)
    npt = Claim.check(
        "smolin.npt_1_3", ANCHORS["npt_1_3"], npt_everywhere, evidence, tolerances.ppt
    )

    fidelities = {
        f"{x}{y}": distill_fidelity(distill_pair(e, (x, y))).minimum
        for x, y in combinations(names, 2)
    }
    pairs = Claim.check(
        "smolin.pair_distill",
        ANCHORS["pair_distill"],
        all(_pass_fidelity(f, tolerances) for f in fidelities.values()),
        fidelities,
        tolerances.equality,
    )
    return CertificationReport(scenario="smolin", claims=[matrix, symmetry, ppt, npt, pairs])


def pairwise_undistillability(
    e: Ensemble,
    pairs: Sequence[tuple[str, str]],
    tolerances: Optional[Tolerances] = None,
    prefix: str = "pair",
) -> CertificationReport:
    """PPT certificate across ``X|Y`` for the joint marginal of every pair."""
    tolerances = tolerances or Tolerances()
    live = set(e.live_qubits)
    claims = []
    for x, y in pairs:
        qx = [q for q in e.registry.qubits_of(x) if q in live]
        qy = [q for q in e.registry.qubits_of(y) if q in live]
        rho = densify(e, qx + qy)
        cut = rho.cut(qx)
        cert = ppt_certificate(rho, cut, tolerances.ppt)
        claims.append(
            Claim.check(
                f"{prefix}.{x}{y}",
                ANCHORS["pair_ppt"],
                cert.is_ppt,
                {"min_eigenvalue": cert.min_eigenvalue, "negativity": negativity(rho, cut)},
                tolerances.ppt,
            )
        )
    return CertificationReport(scenario="pairs", claims=claims)


def depolarization_check(
    e: Ensemble,
    end_pair: tuple[int, int],
    tolerances: Optional[Tolerances] = None,
    id: str = "depolarized",
) -> CertificationReport:
    """The end-pair marginal must be I/4."""
    tolerances = tolerances or Tolerances()
    rho = densify(e, end_pair)
    deviation = rho.deviation(maximally_mixed(2))
    claim = Claim.check(
        id,
        ANCHORS["depolarized"],
        deviation <= tolerances.equality,
        {"max_deviation": deviation, "singlet_fidelity": fidelity_pure(rho, SINGLET)},
        tolerances.equality,
    )
    return CertificationReport(scenario="depolarization", claims=[claim])


def resources(transcript: ProtocolTranscript, **extra: int) -> dict[str, int]:
    return {
        "singlets_consumed": transcript.singlets_consumed,
        "channel_uses": transcript.channel_uses,
        **extra,
    }


def _constituent_claims(
    prefix: str,
    e: Ensemble,
    constituents: Sequence[tuple[int, ...]],
    tolerances: Tolerances,
) -> list[Claim]:
    reference = smolin_density()
    claims = []
    for qubits in constituents:
        label = "".join(e.registry.owner(q) for q in qubits)
        deviation = densify(e, qubits).deviation(reference)
        claims.append(
            Claim.check(
                f"{prefix}.constituent.{label}",
                ANCHORS["constituent"],
                deviation <= tolerances.equality,
                {"max_deviation": deviation},
                tolerances.equality,
            )
        )
    return claims


def certify_smolin(tolerances: Optional[Tolerances] = None) -> CertificationReport:
    e, transcript = prepare_smolin_locc()
    report = smolin_battery(e, tolerances)
    report.transcript = transcript
    report.resources = resources(transcript)
    return report


def configured_chain(config: ScenarioConfig) -> ChainState:
    """The chain of a ``chain`` or ``remark3`` style configuration, substitutions and removals applied."""
    layout = config.layout
    chain = build_chain(layout.link_count, list(layout.labels))
    for i, j in layout.substitutions:
        chain = substitute_abe(chain, i, j)
    for link in config.removed:
        chain = remove_link(chain, link)
    return chain


def _segment_claims(prefix: str, chain: ChainState, tolerances: Tolerances) -> CertificationReport:
    """Run every segment; intact segments must distil, split ones must depolarize."""
    ensemble, results = run_segments(chain)
    report = CertificationReport(scenario=prefix)
    for links, result in zip(chain.config.segments(), results):
        left, right = result.end_qubits
        label = chain.registry.owner(left) + chain.registry.owner(right)
        if chain.config.intact(links):
            report.claims.append(_fidelity_claim(f"{prefix}.segment.{label}", result, tolerances))
        else:
            report.absorb(
                depolarization_check(
                    ensemble, (left, right), tolerances, id=f"{prefix}.segment.{label}"
                )
            )
    first, last = results[0].end_qubits[0], results[-1].end_qubits[1]
    ends = chain.registry.owner(first) + chain.registry.owner(last)
    end_to_end = depolarization_check(ensemble, (first, last), tolerances, id=f"{prefix}.{ends}")
    split = chain.config.split_groups()
    # links of every ABE group the removals cut apart, keyed by its four nodes
    end_to_end.claims[0].evidence.update(
        {f"split.{chain.config.group_label(g)}": [float(link) for link in g] for g in split}
    )
    report.absorb(end_to_end)
    report.transcript = results[-1].transcript
    report.resources = resources(report.transcript, segments=len(results), split_groups=len(split))
    return report


def _explicit_order(config: ScenarioConfig) -> Optional[list[str]]:
    return config.order if isinstance(config.order, list) else None


def _orders(config: ScenarioConfig) -> list[Optional[tuple[str, ...]]]:
    if config.order is None:
        return [None]
    if config.order == "all":
        return list(permutations(config.layout.route_nodes))
    return [tuple(config.order)]


def certify_chain(config: ScenarioConfig) -> CertificationReport:
    """End-to-end teleportation over a chain with the configured substitutions."""
    tolerances = config.tolerances
    chain = configured_chain(config)
    if config.removed:
        return _segment_claims("chain", chain, tolerances)

    report = CertificationReport(scenario="chain")
    outputs: list[DensityMatrix] = []
    for order in _orders(config):
        result = run_end_to_end(chain, order)
        label = "".join(order) if order else "default"
        report.claims.append(_fidelity_claim(f"chain.order.{label}", result, tolerances))
        outputs.append(densify(result.ensemble(), result.end_qubits))
        if not report.transcript.events:
            report.transcript = result.transcript
    if len(outputs) > 1:
        deviation = max(rho.deviation(outputs[0]) for rho in outputs)
        report.claims.append(
            Claim.check(
                "chain.order_independence",
                ANCHORS["order"],
                deviation <= tolerances.equality,
                {"max_deviation": deviation, "orders": float(len(outputs))},
                tolerances.equality,
            )
        )
    if chain.config.link_count <= DEFERRED_CHECK_MAX_LINKS:
        deferred = run_end_to_end(chain, mode=CorrectionMode.Deferred)
        fidelity = distill_fidelity(deferred)
        deviation = densify(deferred.ensemble(), deferred.end_qubits).deviation(outputs[0])
        report.claims.append(
            Claim.check(
                "chain.deferred_matches_frame",
                ANCHORS["deferred"],
                deviation <= tolerances.equality and _pass_fidelity(fidelity.minimum, tolerances),
                {
                    "max_deviation": deviation,
                    "deferred_min_fidelity": fidelity.minimum,
                    "deferred_branches": float(len(deferred.branches)),
                },
                tolerances.equality,
            )
        )
    report.resources = resources(report.transcript, links=chain.config.link_count)
    return report


def certify_fig2(
    tolerances: Optional[Tolerances] = None, order: Optional[Sequence[str]] = None
) -> CertificationReport:
    tolerances = tolerances or Tolerances()
    scenario = scenario_fig2()
    claims = _constituent_claims("fig2", scenario.chain.ensemble, scenario.constituents, tolerances)
    result = scenario.distill(order=order)
    claims.append(_fidelity_claim("fig2.distill", result, tolerances))
    return CertificationReport(
        scenario="fig2",
        claims=claims,
        transcript=result.transcript,
        resources=resources(result.transcript),
    )


def certify_fig3(
    tolerances: Optional[Tolerances] = None, order: Optional[Sequence[str]] = None
) -> CertificationReport:
    tolerances = tolerances or Tolerances()
    scenario = scenario_fig3()
    ensemble = scenario.chain.ensemble
    claims = _constituent_claims("fig3", ensemble, scenario.constituents, tolerances)
    claims.append(
        Claim.check(
            "fig3.members",
            ANCHORS["members"],
            len(ensemble) == 4 ** len(scenario.constituents),
            {"members": float(len(ensemble))},
            0.0,
        )
    )
    result = scenario.distill(order=order)
    claims.append(_fidelity_claim("fig3.distill", result, tolerances))
    report = CertificationReport(
        scenario="fig3",
        claims=claims,
        transcript=result.transcript,
        resources=resources(result.transcript),
    )

    unbridged = scenario_fig3(bridged=False)
    rejoined, _ = run_segments(unbridged.chain)
    ends = (unbridged.end_qubits[0], unbridged.end_qubits[1])
    report.claims.extend(
        depolarization_check(rejoined, ends, tolerances, id="fig3.unbridged.AE").claims
    )
    return report


def certify_activation(
    tolerances: Optional[Tolerances] = None, order: Optional[Sequence[str]] = None
) -> CertificationReport:
    tolerances = tolerances or Tolerances()
    scenario = scenario_activation()
    branches = scenario.branches
    probabilities = [float(b.probability) for b in branches]
    claims = [
        Claim.check(
            "activation.branches",
            ANCHORS["branches"],
            abs(sum(probabilities) - 1) <= tolerances.equality,
            {"probabilities": probabilities},
            tolerances.equality,
        )
    ]

    fidelities = [distill_fidelity(scenario.complete(b, order=order)).minimum for b in branches]
    claims.append(
        Claim.check(
            "activation.completion",
            ANCHORS["distill"],
            all(_pass_fidelity(f, tolerances) for f in fidelities),
            {"branch_fidelities": fidelities},
            tolerances.equality,
        )
    )

    reference = smolin_density()
    deviations = [densify(scenario.auxiliary(b), range(4)).deviation(reference) for b in branches]
    claims.append(
        Claim.check(
            "activation.auxiliary",
            ANCHORS["constituent"],
            max(deviations) <= tolerances.equality,
            {"max_deviation": deviations},
            tolerances.equality,
        )
    )

    names = scenario.parties
    rho_x = [scenario.rho_x(b) for b in branches]
    for i, j in combinations(range(len(names)), 2):
        certificates = []
        for e in rho_x:
            rho = densify(e, [i, j])
            certificates.append(ppt_certificate(rho, Cut.of([0], 2), tolerances.ppt))
        claims.append(
            Claim.check(
                f"activation.rho_x.{names[i]}{names[j]}",
                ANCHORS["pair_ppt"],
                all(cert.is_ppt for cert in certificates),
                {"min_eigenvalue": [cert.min_eigenvalue for cert in certificates]},
                tolerances.ppt,
            )
        )
    return CertificationReport(
        scenario="activation",
        claims=claims,
        transcript=scenario.transcript,
        resources=resources(scenario.transcript, branches=len(branches)),
    )


def certify_relay(
    tolerances: Optional[Tolerances] = None, order: Optional[Sequence[str]] = None
) -> CertificationReport:
    tolerances = tolerances or Tolerances()
    scenario = scenario_relay()
    ensemble = scenario.chain.ensemble
    registry = ensemble.registry
    parties = registry.parties
    counts = [float(len(registry.qubits_of(p))) for p in parties]
    claims = [
        Claim.check(
            "relay.ownership",
            ANCHORS["ownership"],
            counts == [1.0, 2.0, 2.0, 2.0, 1.0],
            {"".join(parties): counts},
            0.0,
        )
    ]
    ends = (parties[0], parties[-1])
    pairs = [pair for pair in combinations(parties, 2) if pair != ends]
    claims.extend(pairwise_undistillability(ensemble, pairs, tolerances, "relay.pair").claims)
    before = pairwise_undistillability(ensemble, [ends], tolerances, "relay.before")
    claims.extend(before.claims)
    result = scenario.distill(order=order)
    claims.append(_fidelity_claim("relay.distill", result, tolerances))
    return CertificationReport(
        scenario="relay",
        claims=claims,
        transcript=result.transcript,
        resources=resources(result.transcript),
    )


def certify_remark3(config: ScenarioConfig) -> CertificationReport:
    """Sweep single removals of the connecting singlets, or check the configured removals."""
    tolerances = config.tolerances
    sweep = [tuple(config.removed)] if config.removed else list(REMARK3_SWEEP)
    report = CertificationReport(scenario="remark3")
    for removed in sweep:
        scenario = scenario_remark3(removed)
        if removed:
            prefix = "remark3.removed-" + "-".join(str(link) for link in removed)
            part = _segment_claims(prefix, scenario.chain, tolerances)
        else:
            result = run_end_to_end(scenario.chain)
            part = CertificationReport(
                scenario="remark3",
                claims=[_fidelity_claim("remark3.intact", result, tolerances)],
                transcript=result.transcript,
                resources=resources(result.transcript),
            )
        LOGGER.debug("Removed %s: %d claims", removed, len(part.claims))
        report.absorb(part)
    return report


_BATTERIES: Final[dict[Scenario, Callable[[ScenarioConfig], CertificationReport]]] = {
    Scenario.Smolin: lambda config: certify_smolin(config.tolerances),
    Scenario.Chain: certify_chain,
    Scenario.Fig2: lambda config: certify_fig2(config.tolerances, _explicit_order(config)),
    Scenario.Fig3: lambda config: certify_fig3(config.tolerances, _explicit_order(config)),
    Scenario.Activation: lambda config: certify_activation(
        config.tolerances, _explicit_order(config)
    ),
    Scenario.Relay: lambda config: certify_relay(config.tolerances, _explicit_order(config)),
    Scenario.Remark3: certify_remark3,
}


def certify(config: ScenarioConfig) -> CertificationReport:
    """Run the battery of the configured scenario; refuses sampled configurations."""
    if config.mode != RunMode.Exhaustive:
        raise SampledModeError("Certification batteries only run on exhaustive branching")
    LOGGER.debug("Certifying %s", config)
    return _BATTERIES[config.scenario](config)
