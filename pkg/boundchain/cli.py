import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Final, Optional, Sequence

import numpy as np

from boundchain.errors import BoundChainError, ConfigError
from boundchain.models import (
    CertificationReport,
    OutputFormat,
    RunMode,
    Scenario,
    ScenarioConfig,
)
from boundchain.protocols import (
    ChainState,
    sample_end_to_end,
    scenario_fig2,
    scenario_fig3,
    scenario_relay,
)
from boundchain.verification import certify, configured_chain, resources

__all__ = [
    "EXIT_PASS",
    "EXIT_CLAIM_FAILED",
    "EXIT_CONFIG",
    "EXIT_INTERNAL",
    "read_config_file",
    "build_parser",
    "load_config",
    "sample_report",
    "run_scenario",
    "emit_report",
    "main",
]

LOGGER: Final = logging.getLogger("boundchain-cli")

EXIT_PASS: Final = 0
EXIT_CLAIM_FAILED: Final = 1
EXIT_CONFIG: Final = 2
EXIT_INTERNAL: Final = 3

CONFIG_KEYS: Final = frozenset(
    {
        "scenario",
        "chain_length",
        "substitutions",
        "removed_links",
        "order",
        "tolerance_eq",
        "tolerance_ppt",
        "format",
        "seed",
        "mode",
    }
)

SCENARIO_HELP: Final = {
    Scenario.Smolin: "prepare the four-party ABE state by LOCC and certify it",
    Scenario.Chain: "teleport end to end over a singlet chain, optionally with ABE substitutions",
    Scenario.Fig2: "superactivation with two ABE groups and three bring-together singlets",
    Scenario.Fig3: "superactivation with three ABE groups",
    Scenario.Activation: "activation of the six-party state by the auxiliary ABE state",
    Scenario.Relay: "two overlapping ABE states relaying a singlet from A to E",
    Scenario.Remark3: "the two-group chain with connecting singlets removed",
}

_PAIR: Final = re.compile(r"(\d+)\s*,\s*(\d+)")
_TOLERANCE_KEYS: Final = {"tolerances.equality": "tolerance_eq", "tolerances.ppt": "tolerance_ppt"}


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = [(int(i), int(j)) for i, j in _PAIR.findall(text)]
    leftover = _PAIR.sub("", text).strip("[]() ;,\t")
    if leftover or (text.strip() and not pairs):
        raise ValueError(f"expected pairs like '1,3', got {text!r}")
    return pairs


def _parse_list(text: str) -> list[str]:
    return [item.strip() for item in text.strip().strip("[]").split(",") if item.strip()]


def _parse_link(item: str) -> int | str:
    return int(item) if item.isdigit() else item.upper()


def _parse_order(text: str) -> list[str] | str:
    if text.strip().lower() == "all":
        return "all"
    return [item.upper() for item in _parse_list(text)]


def _parse_value(key: str, text: str) -> Any:
    if key == "substitutions":
        return _parse_pairs(text)
    if key == "removed_links":
        return [_parse_link(item) for item in _parse_list(text)]
    if key == "order":
        return _parse_order(text)
    return text.strip().strip("\"'")


def read_config_file(path: Path) -> tuple[dict[str, Any], dict[str, int]]:
    """Read ``key = value`` lines, ``#`` starting a comment.

    Returns the parsed values and the line each key was read from.
    """
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"Cannot read config file {path}", [str(err)]) from err

    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    diagnostics: list[str] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            diagnostics.append(f"{path}:{number}: expected 'key = value'")
            continue
        if key not in CONFIG_KEYS:
            diagnostics.append(f"{path}:{number}: unknown key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, value)
        except ValueError as err:
            diagnostics.append(f"{path}:{number}: {key}: {err}")
            continue
        lines[key] = number
    if diagnostics:
        raise ConfigError(f"Invalid config file {path}", diagnostics)
    LOGGER.debug("Read %d settings from %s", len(values), path)
    return values, lines


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="file of 'key = value' settings")
    common.add_argument("--format", choices=[f.value for f in OutputFormat])
    common.add_argument("--tolerance-eq", type=float, help="equality tolerance")
    common.add_argument("--tolerance-ppt", type=float, help="PPT eigenvalue tolerance")
    common.add_argument("--order", help="comma separated junction owners, or 'all'")
    common.add_argument("--chain-length", type=int, help="number of links of the chain")
    common.add_argument(
        "--substitute", action="append", metavar="I,J", help="replace links I and J by an ABE state"
    )
    common.add_argument(
        "--remove-link", action="append", metavar="LINK", help="link number or node pair like BF"
    )
    common.add_argument("--mode", choices=[m.value for m in RunMode])
    common.add_argument("--seed", type=int, help="seed for sampled mode")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(
        prog="boundchain",
        description="Simulate and certify bound-entanglement chain protocols.",
    )
    subparsers = parser.add_subparsers(dest="scenario", required=True, metavar="SCENARIO")
    for scenario in Scenario:
        subparsers.add_parser(scenario.value, parents=[common], help=SCENARIO_HELP[scenario])
    return parser


def _flag_values(args: argparse.Namespace) -> dict[str, Any]:
    values: dict[str, Any] = {"scenario": args.scenario}
    simple = {
        "format": args.format,
        "tolerance_eq": args.tolerance_eq,
        "tolerance_ppt": args.tolerance_ppt,
        "chain_length": args.chain_length,
        "mode": args.mode,
        "seed": args.seed,
    }
    values.update({key: value for key, value in simple.items() if value is not None})
    try:
        if args.order is not None:
            values["order"] = _parse_order(args.order)
        if args.substitute:
            values["substitutions"] = [pair for item in args.substitute for pair in _parse_pairs(item)]
    except ValueError as err:
        raise ConfigError("Invalid command line", [str(err)]) from err
    if args.remove_link:
        values["removed_links"] = [_parse_link(item.strip()) for item in args.remove_link]
    return values


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    """Defaults, then environment, then config file, then flags."""
    file_values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    if args.config is not None:
        file_values, lines = read_config_file(args.config)
    try:
        return ScenarioConfig.from_sources(file_values, _flag_values(args))
    except ConfigError as err:
        if not lines:
            raise
        located = []
        for diagnostic in err.diagnostics:
            path = diagnostic.split(":", 1)[0]
            field = _TOLERANCE_KEYS.get(path, path.split(".", 1)[0])
            number = lines.get(field)
            located.append(f"{args.config}:{number}: {diagnostic}" if number else diagnostic)
        raise ConfigError(str(err.args[0]), located) from err


def _sampled_chain(config: ScenarioConfig) -> ChainState:
    match config.scenario:
        case Scenario.Fig2:
            return scenario_fig2().chain
        case Scenario.Fig3:
            return scenario_fig3().chain
        case Scenario.Relay:
            return scenario_relay().chain
        case _:
            return configured_chain(config)


def sample_report(config: ScenarioConfig) -> CertificationReport:
    """One seeded run; the report carries the transcript and no claims."""
    chain = _sampled_chain(config)
    order = config.order if isinstance(config.order, list) else None
    result = sample_end_to_end(chain, np.random.default_rng(config.seed), order)
    return CertificationReport(
        scenario=f"{config.scenario.value} (sampled, seed {config.seed})",
        transcript=result.transcript,
        resources=resources(result.transcript, branches=len(result.branches)),
    )


def run_scenario(config: ScenarioConfig) -> tuple[int, CertificationReport]:
    if config.mode == RunMode.Sampled:
        report = sample_report(config)
    else:
        report = certify(config)
    failed = [claim.id for claim in report.claims if not claim.passed]
    if failed:
        LOGGER.warning("%d claim(s) failed: %s", len(failed), ", ".join(failed))
    return (EXIT_CLAIM_FAILED if failed else EXIT_PASS), report


def _format_evidence(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_evidence(item) for item in value) + "]"
    return str(value)


def emit_report(report: CertificationReport, format: OutputFormat = OutputFormat.Text) -> str:
    if format == OutputFormat.Json:
        return json.dumps(report.to_json_payload(), indent=2)

    width = max([len(claim.id) for claim in report.claims] + [5])
    rows = [f"scenario: {report.scenario}", f"{'STATUS':<6}  {'CLAIM':<{width}}  EVIDENCE"]
    for claim in report.claims:
        evidence = ", ".join(
            f"{key}={_format_evidence(value)}" for key, value in claim.evidence.items()
        )
        rows.append(f"{claim.status.value.upper():<6}  {claim.id:<{width}}  {evidence}")
    rows.append(
        "resources: "
        + ", ".join(f"{key}={value}" for key, value in sorted(report.resources.items()))
    )
    rows.append(f"transcript: {len(report.transcript.events)} events")
    if report.claims:
        rows.append("result: " + ("PASS" if report.passed else "FAIL"))
    return "\n".join(rows)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
        code, report = run_scenario(config)
    except ConfigError as err:
        print(f"boundchain: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (BoundChainError, AssertionError) as err:
        LOGGER.exception("Scenario %s aborted: %s", args.scenario, err)
        return EXIT_INTERNAL
    print(emit_report(report, config.format))
    return code
