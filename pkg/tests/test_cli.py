import json
from pathlib import Path

import pytest

from boundchain import cli
from boundchain.errors import ConfigError, ProtocolError
from boundchain.models import CertificationReport, Claim, OutputFormat


def test_text_report(capsys: pytest.CaptureFixture[str]):
    assert cli.main(["smolin"]) == cli.EXIT_PASS
    out = capsys.readouterr().out
    assert out.startswith("scenario: smolin")
    assert "PASS    smolin.npt_1_3" in out
    assert out.rstrip().endswith("result: PASS")


def test_json_report(capsys: pytest.CaptureFixture[str]):
    assert cli.main(["relay", "--format", "json", "--order", "d,b,c"]) == cli.EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["scenario"] == "relay"
    assert {claim["status"] for claim in payload["claims"]} == {"pass"}
    assert payload["resources"]["singlets_consumed"] == payload["transcript"]["singlets_consumed"]


def test_config_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = tmp_path / "chain.conf"
    path.write_text(
        "# four links, one substituted pair\n"
        "chain_length = 4\n"
        "substitutions = 1,3  # outer links\n"
        "order = [B, C, D]\n"
        "\n"
        "format = json\n"
    )
    assert cli.main(["chain", "--config", str(path)]) == cli.EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert [claim["id"] for claim in payload["claims"]] == [
        "chain.order.BCD",
        "chain.deferred_matches_frame",
    ]


def test_flags_override_the_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = tmp_path / "chain.conf"
    path.write_text("chain_length = 40\n")
    assert cli.main(["chain", "--config", str(path), "--chain-length", "2"]) == cli.EXIT_PASS


def test_read_config_file(tmp_path: Path):
    path = tmp_path / "remark3.conf"
    path.write_text("scenario = remark3\nremoved_links = [BF, 6]\ntolerance_ppt = 1e-9\n")
    values, lines = cli.read_config_file(path)
    assert values == {"scenario": "remark3", "removed_links": ["BF", 6], "tolerance_ppt": "1e-9"}
    assert lines == {"scenario": 1, "removed_links": 2, "tolerance_ppt": 3}


def test_config_file_diagnostics(tmp_path: Path):
    path = tmp_path / "bad.conf"
    path.write_text("chain_length = 4\ncolour = blue\nsubstitutions = 1\njust words\n")
    with pytest.raises(ConfigError) as err:
        cli.read_config_file(path)
    assert err.value.diagnostics == [
        f"{path}:2: unknown key 'colour'",
        f"{path}:3: substitutions: expected pairs like '1,3', got ' 1'",
        f"{path}:4: expected 'key = value'",
    ]


def test_validation_errors_point_at_the_line(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    path = tmp_path / "chain.conf"
    path.write_text("# comment\nformat = text\nchain_length = 40\n")
    assert cli.main(["chain", "--config", str(path)]) == cli.EXIT_CONFIG
    assert f"{path}:3: chain_length:" in capsys.readouterr().err


def test_missing_config_file(tmp_path: Path):
    assert cli.main(["chain", "--config", str(tmp_path / "absent.conf")]) == cli.EXIT_CONFIG


@pytest.mark.parametrize(
    "argv",
    [
        ["fig2", "--substitute", "1,3"],
        ["chain", "--substitute", "1-3"],
        ["smolin", "--mode", "sampled"],
        ["remark3", "--remove-link", "BC"],
        ["chain", "--order", "all", "--chain-length", "8"],
    ],
)
def test_invalid_configuration(argv: list[str]):
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_unknown_scenario():
    with pytest.raises(SystemExit) as err:
        cli.main(["fig9"])
    assert err.value.code == 2


def test_removed_link_by_node_pair(capsys: pytest.CaptureFixture[str]):
    assert cli.main(["remark3", "--remove-link", "gc"]) == cli.EXIT_PASS
    assert "remark3.removed-4.AE" in capsys.readouterr().out


def test_sampled_demonstration(capsys: pytest.CaptureFixture[str]):
    assert cli.main(["fig2", "--mode", "sampled", "--seed", "7"]) == cli.EXIT_PASS
    out = capsys.readouterr().out
    assert out.startswith("scenario: fig2 (sampled, seed 7)")
    assert "branches=1" in out
    assert "result:" not in out


def test_failed_claim_exit_code(monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]):
    report = CertificationReport(
        scenario="chain",
        claims=[Claim.check("chain.order.default", "anchor", False, {"min_fidelity": 0.5}, 1e-12)],
    )
    monkeypatch.setattr(cli, "certify", lambda config: report)
    assert cli.main(["chain"]) == cli.EXIT_CLAIM_FAILED
    assert "FAIL    chain.order.default  min_fidelity=0.5" in capsys.readouterr().out


def test_internal_error_exit_code(monkeypatch: pytest.MonkeyPatch):
    def broken(config):
        raise ProtocolError("qubits in different labs")

    monkeypatch.setattr(cli, "certify", broken)
    assert cli.main(["chain"]) == cli.EXIT_INTERNAL


def test_emit_json_is_stable():
    report = CertificationReport(
        scenario="x", claims=[Claim.check("x.a", "anchor", True, {"values": [0.25, 0.5]}, 1e-12)]
    )
    first = cli.emit_report(report, OutputFormat.Json)
    assert first == cli.emit_report(report, OutputFormat.Json)
    assert json.loads(first)["claims"][0]["evidence"] == {"values": [0.25, 0.5]}


def test_empty_report():
    report = CertificationReport(scenario="chain")
    payload = json.loads(cli.emit_report(report, OutputFormat.Json))
    assert payload["version"] == 1
    assert payload["claims"] == []
    assert payload["transcript"] == {"events": [], "singlets_consumed": 0}
    assert "result:" not in cli.emit_report(report)
