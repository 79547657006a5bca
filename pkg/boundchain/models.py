import logging
from os import environ
from typing import Any, Final, Literal, NamedTuple, Optional, Self, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from boundchain.errors import BlindnessViolation, ConfigError
from boundchain.strenum import StrEnum

__all__ = [
    "Model",
    "Action",
    "TranscriptEvent",
    "ProtocolTranscript",
    "ClaimStatus",
    "Claim",
    "CertificationReport",
    "Tolerances",
    "Scenario",
    "OutputFormat",
    "RunMode",
    "ChainLayout",
    "LAYOUTS",
    "ScenarioConfig",
    "SAMPLED_SCENARIOS",
    "chain_labels",
]


LOGGER: Final = logging.getLogger("boundchain-model")

REPORT_VERSION: Final = 1
MAX_ALL_ORDERS_CHAIN: Final = 6


class Model(BaseModel):
    """Base class for everything that ends up in a report."""

    _display_fields = list[str]()

    def __str__(self):
        values = {k: getattr(self, k) for k in self._display_fields}
        return f"<{self.__class__.__name__} {', '.join(f'{k}={v}' for k, v in values.items())}>"


class Action(StrEnum):
    BellMeasure = "bell_measure"
    Announce = "announce"
    Correction = "correction"
    Prepare = "prepare"
    ShareRandomness = "share_randomness"
    BringTogether = "bring_together"


class TranscriptEvent(Model):
    _display_fields = ["step", "actor", "action"]

    step: int
    actor: str
    action: Action
    targets: list[int] = Field(default_factory=list[int])
    # announced value -> probability, or announced value -> Pauli applied
    outcomes: dict[str, str] = Field(default_factory=dict[str, str])
    corrections: dict[str, str] = Field(default_factory=dict[str, str])
    refers_to: Optional[int] = None
    note: str = ""


class ProtocolTranscript(Model):
    """The classical side of an LOCC run: who measured, what was said, who corrected."""

    _display_fields = ["singlets_consumed", "channel_uses"]

    events: list[TranscriptEvent] = Field(default_factory=list[TranscriptEvent])
    singlets_consumed: int = 0
    channel_uses: int = 0

    def record(self, actor: str, action: Action, targets: list[int], **extra: Any) -> int:
        event = TranscriptEvent(
            step=len(self.events), actor=actor, action=action, targets=targets, **extra
        )
        self.events.append(event)
        LOGGER.debug("Transcript step %d: %s %s %s", event.step, actor, action, targets)
        return event.step

    def announce(self, actor: str, targets: list[int], outcomes: dict[str, str]) -> int:
        return self.record(actor, Action.Announce, targets, outcomes=outcomes)

    def correct(
        self, actor: str, targets: list[int], corrections: dict[str, str], refers_to: int, note: str = ""
    ) -> int:
        """Record a correction rule keyed by the outcomes of an earlier announcement."""
        if not 0 <= refers_to < len(self.events):
            raise BlindnessViolation(f"Correction refers to step {refers_to}, which did not happen")
        announcement = self.events[refers_to]
        if announcement.action != Action.Announce:
            raise BlindnessViolation(
                f"Correction refers to step {refers_to}, a {announcement.action} event"
            )
        unannounced = set(corrections) - set(announcement.outcomes)
        if unannounced:
            raise BlindnessViolation(
                f"Correction keyed by unannounced outcomes {sorted(unannounced)}"
            )
        return self.record(
            actor,
            Action.Correction,
            targets,
            corrections=corrections,
            refers_to=refers_to,
            note=note,
        )

    def extend(self, other: "ProtocolTranscript") -> None:
        """Append another transcript, renumbering its steps."""
        offset = len(self.events)
        for event in other.events:
            refers_to = None if event.refers_to is None else event.refers_to + offset
            self.events.append(
                event.model_copy(update={"step": event.step + offset, "refers_to": refers_to})
            )
        self.singlets_consumed += other.singlets_consumed
        self.channel_uses += other.channel_uses


class ClaimStatus(StrEnum):
    Pass = "pass"
    Fail = "fail"


Evidence = Union[float, list[float]]


class Claim(Model):
    _display_fields = ["id", "status"]

    id: str
    anchor: str
    status: ClaimStatus
    evidence: dict[str, Evidence]
    tolerance: float
    note: str = ""

    @field_validator("evidence")
    @classmethod
    def _has_evidence(cls, value: dict[str, Evidence]) -> dict[str, Evidence]:
        if not value:
            raise ValueError("every claim carries at least one numeric evidence entry")
        return value

    @classmethod
    def check(
        cls, id: str, anchor: str, passed: bool, evidence: dict[str, Evidence], tolerance: float, note: str = ""
    ) -> Self:
        return cls(
            id=id,
            anchor=anchor,
            status=ClaimStatus.Pass if passed else ClaimStatus.Fail,
            evidence=evidence,
            tolerance=tolerance,
            note=note,
        )

    @property
    def passed(self) -> bool:
        return self.status == ClaimStatus.Pass


class CertificationReport(Model):
    _display_fields = ["scenario", "passed"]

    scenario: str
    claims: list[Claim] = Field(default_factory=list[Claim])
    transcript: ProtocolTranscript = Field(default_factory=ProtocolTranscript)
    resources: dict[str, int] = Field(default_factory=dict[str, int])

    @property
    def passed(self) -> bool:
        return all(claim.passed for claim in self.claims)

    def claim(self, id: str) -> Claim:
        for claim in self.claims:
            if claim.id == id:
                return claim
        raise KeyError(id)

    def absorb(self, other: "CertificationReport") -> None:
        self.claims.extend(other.claims)
        self.transcript.extend(other.transcript)
        for key, value in other.resources.items():
            self.resources[key] = self.resources.get(key, 0) + value

    def to_json_payload(self) -> dict[str, Any]:
        return {
            "version": REPORT_VERSION,
            "scenario": self.scenario,
            "claims": [
                claim.model_dump(mode="json", include={"id", "anchor", "status", "evidence", "tolerance"})
                for claim in self.claims
            ],
            "transcript": {
                "events": [event.model_dump(mode="json") for event in self.transcript.events],
                "singlets_consumed": self.transcript.singlets_consumed,
            },
            "resources": self.resources,
        }


class Tolerances(Model):
    _display_fields = ["equality", "ppt"]

    equality: float = Field(default=1e-12, gt=0)
    ppt: float = Field(default=1e-10, gt=0)

    @classmethod
    def from_env(cls) -> Self:
        values: dict[str, str] = {}
        if "BOUNDCHAIN_TOLERANCE_EQ" in environ:
            values["equality"] = environ["BOUNDCHAIN_TOLERANCE_EQ"]
        if "BOUNDCHAIN_TOLERANCE_PPT" in environ:
            values["ppt"] = environ["BOUNDCHAIN_TOLERANCE_PPT"]
        try:
            return cls.model_validate(values)
        except ValidationError as err:
            raise ConfigError("Invalid tolerance in the environment", _diagnostics(err)) from err


class Scenario(StrEnum):
    Smolin = "smolin"
    Chain = "chain"
    Fig2 = "fig2"
    Fig3 = "fig3"
    Activation = "activation"
    Relay = "relay"
    Remark3 = "remark3"


class OutputFormat(StrEnum):
    Text = "text"
    Json = "json"


class RunMode(StrEnum):
    Exhaustive = "exhaustive"
    Sampled = "sampled"


class ChainLayout(NamedTuple):
    """Node labels along the singlet chain, ABE link pairs and the links used as bridges."""

    labels: str
    substitutions: tuple[tuple[int, int], ...]
    bridges: tuple[int, ...]
    route_nodes: tuple[str, ...]

    @property
    def link_count(self) -> int:
        return len(self.labels) - 1

    def link_between(self, pair: str) -> int:
        """Link number of a node pair such as ``"BF"`` (either order)."""
        if len(pair) != 2:
            raise ConfigError(f"Expected a node pair like 'BF', got {pair!r}")
        for link in range(1, self.link_count + 1):
            if {self.labels[link - 1], self.labels[link]} == set(pair):
                return link
        raise ConfigError(f"No link joins {pair[0]} and {pair[1]} in chain {self.labels}")


LAYOUTS: Final = {
    Scenario.Fig2: ChainLayout("ABFGCDHE", ((1, 5), (3, 7)), (2, 4, 6), ("B", "C", "D")),
    Scenario.Fig3: ChainLayout(
        "ABFGCDHE", ((1, 5), (3, 7), (2, 6)), (4,), ("B", "F", "C", "D", "H")
    ),
    Scenario.Activation: ChainLayout(
        "ABFGCDHE", ((1, 5), (3, 7), (2, 6)), (4,), ("B", "F", "D", "H")
    ),
    Scenario.Relay: ChainLayout("ABCDE", ((1, 3), (2, 4)), (), ("B", "C", "D")),
    Scenario.Remark3: ChainLayout("ABFGCDHE", ((1, 5), (3, 7)), (2, 4, 6), ()),
}


SAMPLED_SCENARIOS: Final = (Scenario.Chain, Scenario.Fig2, Scenario.Fig3, Scenario.Relay)


def chain_labels(m: int) -> str:
    if not 1 <= m <= 25:
        raise ConfigError(f"Chain length must lie between 1 and 25, got {m}")
    return "".join(chr(ord("A") + k) for k in range(m + 1))


def _diagnostics(err: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
        for error in err.errors()
    ]


class ScenarioConfig(Model):
    _display_fields = ["scenario", "mode", "format"]

    scenario: Scenario
    chain_length: int = Field(default=3, ge=1, le=25)
    substitutions: list[tuple[int, int]] = Field(default_factory=list[tuple[int, int]])
    removed_links: list[Union[int, str]] = Field(default_factory=list[Union[int, str]])
    order: Union[list[str], Literal["all"], None] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)
    format: OutputFormat = OutputFormat.Text
    seed: int = 0
    mode: RunMode = RunMode.Exhaustive

    @property
    def layout(self) -> ChainLayout:
        if self.scenario == Scenario.Chain:
            return ChainLayout(
                chain_labels(self.chain_length),
                tuple(self.substitutions),
                (),
                tuple(chain_labels(self.chain_length)[1:-1]),
            )
        if self.scenario == Scenario.Smolin:
            return ChainLayout("ABCD", ((1, 3),), (), ("B",))
        return LAYOUTS[self.scenario]

    @property
    def removed(self) -> list[int]:
        return [link for link in self.removed_links if isinstance(link, int)]

    @model_validator(mode="after")
    def _check_layout(self) -> Self:
        if self.substitutions and self.scenario != Scenario.Chain:
            raise ValueError(f"substitutions are fixed by the {self.scenario} scenario")
        if self.removed_links and self.scenario not in (Scenario.Chain, Scenario.Remark3):
            raise ValueError(f"links cannot be removed in the {self.scenario} scenario")
        if self.mode == RunMode.Sampled and (
            self.scenario not in SAMPLED_SCENARIOS or self.removed_links
        ):
            raise ValueError(
                "sampled mode needs one connected route: "
                + ", ".join(str(s) for s in SAMPLED_SCENARIOS)
                + " without removed links"
            )
        layout = self.layout
        m = layout.link_count

        used: set[int] = set()
        for i, j in self.substitutions:
            for link in (i, j):
                if not 1 <= link <= m:
                    raise ValueError(f"substituted link {link} outside 1..{m}")
            if i == j or {i, j} & used:
                raise ValueError(f"substitution ({i}, {j}) overlaps another substitution")
            used |= {i, j}

        removed: list[int] = []
        for link in self.removed_links:
            number = layout.link_between(link) if isinstance(link, str) else link
            if not 1 <= number <= m:
                raise ValueError(f"removed link {number} outside 1..{m}")
            if any(number in pair for pair in layout.substitutions):
                raise ValueError(f"removed link {number} is part of an ABE group, not a singlet")
            removed.append(number)
        self.removed_links = list(removed)

        if self.order == "all":
            if self.scenario != Scenario.Chain or self.chain_length > MAX_ALL_ORDERS_CHAIN:
                raise ValueError(
                    f"order=all needs the chain scenario with at most {MAX_ALL_ORDERS_CHAIN} links"
                )
        elif self.order is not None:
            if self.removed_links:
                raise ValueError("an explicit order cannot be combined with removed links")
            if sorted(self.order) != sorted(layout.route_nodes):
                raise ValueError(
                    f"order must be a permutation of {', '.join(layout.route_nodes)}"
                )
        return self

    @classmethod
    def from_sources(cls, *sources: dict[str, Any]) -> Self:
        """Validate merged settings; later sources override earlier ones."""
        merged: dict[str, Any] = {"tolerances": Tolerances.from_env().model_dump()}
        for source in sources:
            for key, value in source.items():
                if key in ("tolerance_eq", "tolerance_ppt"):
                    merged["tolerances"]["equality" if key == "tolerance_eq" else "ppt"] = value
                else:
                    merged[key] = value
        try:
            return cls.model_validate(merged)
        except ValidationError as err:
            raise ConfigError("Invalid scenario configuration", _diagnostics(err)) from err
