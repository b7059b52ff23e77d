"""Tests for the command-line front end and report envelopes"""

from __future__ import annotations

import json
import math

import pytest

import cli
from config_validator import validate_config_on_startup
from constants import cstar_classical
from errors import DivergenceError, PreconditionError
from group import HomogeneousGroup, _sphere_measure_cached
from hh_config import ExitCodes
from kernels import catalog, transpose
from main import main as entry_main
from quad import QuadResult


def _run(capsys, *argv):
    code = cli.main(["--log-level", "ERROR", *map(str, argv)])
    out = capsys.readouterr().out
    return code, out


def _run_json(capsys, *argv):
    code, out = _run(capsys, *argv)
    return code, json.loads(out)


# ============================================================================
# constant
# ============================================================================

class TestConstant:
    def test_hilbert_default(self, capsys):
        code, report = _run_json(capsys, "constant")
        assert code == ExitCodes.OK
        assert report["tool"] == "hhsharp"
        assert report["command"] == "constant"
        assert report["results"]["constant"]["value"] == pytest.approx(math.pi, rel=1e-10)
        assert report["results"]["closed_form"]["case"] == "hardy_hilbert"
        assert report["exit_code"] == 0

    def test_max_kernel(self, capsys, write_config):
        code, report = _run_json(capsys, "--config", write_config({"kernel": "max_kernel"}),
                                 "constant")
        assert code == ExitCodes.OK
        assert report["results"]["constant"]["value"] == pytest.approx(4.0, rel=1e-10)
        assert report["results"]["closed_form"]["case"] == "max_kernel"
        assert report["results"]["deviation"] <= 1e-9

    def test_group_mode(self, capsys, write_config):
        path = write_config({"group": {"weights": [1, 1, 2]},
                             "kernel": {"catalog": "hilbert_lambda", "lam": 4},
                             "mc": {"samples": 200000}})
        code, report = _run_json(capsys, "--config", path, "constant")
        assert code == ExitCodes.OK
        assert report["results"]["constant"]["value"] == pytest.approx(8.0 * math.pi, rel=1e-8)

    def test_wrong_order_exits_precondition(self, capsys, write_config):
        path = write_config({"kernel": {"expr": "1/(r+s)^2", "order": -2}})
        code, report = _run_json(capsys, "--config", path, "constant")
        assert code == ExitCodes.PRECONDITION
        assert report["errors"][0]["type"] == "PreconditionError"

    def test_infinite_constant_exits_divergence(self, capsys, write_config):
        path = write_config({"kernel": {"expr": "1/(r^0.5 * max(r,s)^0.5)", "order": -1}})
        code, report = _run_json(capsys, "--config", path, "constant")
        assert code == ExitCodes.DIVERGENCE
        assert report["results"]["constant"]["value"] == "inf"

    def test_command_line_tolerance_override(self, capsys):
        code, report = _run_json(capsys, "--rel-tol", "1e-7", "constant")
        assert code == ExitCodes.OK
        assert report["config"]["tolerance"]["rel"] == 1e-7

    def test_csv_output(self, capsys):
        code, out = _run(capsys, "--format", "csv", "constant")
        assert code == ExitCodes.OK
        header, row = out.strip().splitlines()
        assert header.split(",")[:3] == ["kernel", "p", "mode"]
        assert row.startswith("hilbert,2.0,classical")

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, out = _run(capsys, "--output", target, "constant")
        assert code == ExitCodes.OK
        assert out == ""
        assert json.loads(target.read_text())["command"] == "constant"


# ============================================================================
# geometry
# ============================================================================

class TestGeometry:
    def test_euclidean_three(self, capsys, write_config):
        path = write_config({"group": {"weights": [1, 1, 1], "norm": "euclidean"}})
        code, report = _run_json(capsys, "--config", path, "geometry")
        results = report["results"]
        assert code == ExitCodes.OK
        assert results["Q"] == 3.0
        assert results["method"] == "closed_form"
        assert results["sphere_measure"]["value"] == pytest.approx(4.0 * math.pi)
        volumes = {v["r"]: v["volume"] for v in results["ball_volumes"]}
        assert volumes[1.0] == pytest.approx(4.0 * math.pi / 3.0)
        assert results["scaling_residual"] <= 1e-12

    def test_anisotropic_plane(self, capsys, write_config):
        path = write_config({"group": {"weights": [1, 2]}, "mc": {"samples": 100000}})
        code, report = _run_json(capsys, "--config", path, "geometry")
        assert code == ExitCodes.OK
        assert report["results"]["method"] == "monte_carlo"
        assert report["results"]["sphere_measure"]["value"] == pytest.approx(12.0)


# ============================================================================
# sharpness and dilation-probe
# ============================================================================

class TestSharpness:
    def test_hilbert(self, capsys):
        code, report = _run_json(capsys, "sharpness")
        assert code == ExitCodes.OK
        ratios = [e["ratio"] for e in report["results"]["entries"]]
        assert ratios == sorted(ratios)
        assert report["results"]["passed"] is True

    def test_csv_rows(self, capsys, write_config):
        path = write_config({"kernel": "max_kernel", "output": {"format": "csv"}})
        code, out = _run(capsys, "--config", path, "sharpness")
        assert code == ExitCodes.OK
        lines = out.strip().splitlines()
        assert lines[0].startswith("beta,ratio")
        assert len(lines) == 6


class TestDilationProbe:
    def test_hilbert(self, capsys, write_config):
        path = write_config({"functions": [{"power_cutoff": {"beta": 0.5}}],
                             "tolerance": {"rel": 1e-8}})
        code, report = _run_json(capsys, "--config", path, "dilation-probe")
        assert code == ExitCodes.OK
        assert report["results"]["expected_slope"] == 0.0
        assert report["results"]["passed"] is True


# ============================================================================
# verify
# ============================================================================

class TestVerify:
    @pytest.mark.slow
    def test_hilbert_classical(self, capsys, write_config):
        path = write_config({"functions": [{"power_cutoff": {"beta": 0.5}}],
                             "tolerance": {"rel": 1e-8, "abs": 1e-13}})
        code, report = _run_json(capsys, "--config", path, "verify")
        assert code == ExitCodes.OK
        entry = report["results"]["reports"][0]
        assert entry["hardy_hilbert"]["holds"] is True
        assert entry["equality_ok"] is True
        assert entry["ratios"]["hardy_hilbert"] < 1
        assert report["results"]["closed_form"]["case"] == "hardy_hilbert"

    def test_theorem31_mode(self, capsys, write_config):
        path = write_config({"mode": "theorem31", "group": {"weights": [1, 1, 2]},
                             "functions": [{"power_cutoff": {"beta": 0.5}}],
                             "tolerance": {"rel": 1e-8, "abs": 1e-13},
                             "mc": {"samples": 200000}})
        code, report = _run_json(capsys, "--config", path, "verify")
        assert code == ExitCodes.OK
        theorem = report["results"]["reports"][0]["theorem31"]
        assert theorem["constant"]["value"] == pytest.approx(4.0 * math.pi)
        assert theorem["holds"] is True

    def test_transposed_closed_form_for_symmetric_kernel(self):
        group = HomogeneousGroup.half_line()
        closed = cli.transposed_closed_form(catalog("hilbert"), 3.0, group)
        assert closed.case == "hardy_hilbert"
        assert closed.value == pytest.approx(math.pi / math.sin(math.pi / 3.0))

    def test_transposed_closed_form_matches_numeric(self):
        group = HomogeneousGroup.half_line()
        kernel = catalog("hardy_averaging")
        closed = cli.transposed_closed_form(kernel, 3.0, group)
        numeric = cstar_classical(transpose(kernel), 3.0)
        assert closed.value == pytest.approx(3.0)
        assert numeric.value == pytest.approx(closed.value, rel=1e-8)

    def test_no_closed_form_for_mismatched_weighted_kernel(self):
        kernel = catalog("weighted_hilbert", lam=1.0, p=3.0, k_exp=3.0)
        assert cli.transposed_closed_form(kernel, 3.0, HomogeneousGroup.half_line()) is None


# ============================================================================
# Errors, determinism and the entry point
# ============================================================================

class TestErrors:
    def test_bad_config_exits_precondition(self, capsys, write_config):
        code, report = _run_json(capsys, "--config", write_config({"mode": "nonsense"}), "constant")
        assert code == ExitCodes.PRECONDITION
        failures = report["errors"][0]["failures"]
        assert failures[0]["field"] == "mode"

    def test_missing_config(self, capsys, tmp_path):
        code, _ = _run_json(capsys, "--config", tmp_path / "nope.json", "constant")
        assert code == ExitCodes.PRECONDITION

    def test_error_envelope_carries_divergence_details(self):
        exc = DivergenceError("inner integral diverged", partial=QuadResult(1.0, 2.0, 10, False),
                              s_range=(0.5, math.inf))
        envelope = cli.error_envelope("verify", {}, exc)
        entry = envelope.to_dict()["errors"][0]
        assert envelope.exit_code == ExitCodes.DIVERGENCE
        assert entry["s_range"] == [0.5, "inf"]
        assert entry["partial"]["converged"] is False

    def test_run_command_turns_errors_into_envelopes(self, monkeypatch):
        def boom(config):
            raise PreconditionError("order mismatch")
        monkeypatch.setitem(cli.COMMANDS, "constant", (boom, "test"))
        envelope = cli.run_command("constant", {})
        assert envelope.exit_code == ExitCodes.PRECONDITION
        assert envelope.errors[0]["message"] == "order mismatch"

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            cli.main(["frobnicate"])


class TestDeterminism:
    @pytest.mark.parametrize("command, config", [
        ("constant", {"kernel": "hilbert", "p": 3.0}),
        ("geometry", {"group": {"weights": [1, 2], "norm": "power:4"}, "mc": {"samples": 50000}}),
    ])
    def test_results_are_reproducible(self, write_config, command, config):
        resolved = validate_config_on_startup(write_config(config))
        first = cli.run_command(command, resolved)
        _sphere_measure_cached.cache_clear()
        second = cli.run_command(command, resolved)
        assert first.results_json() == second.results_json()

    def test_envelope_timestamp_is_iso8601(self):
        envelope = cli.run_command("geometry", validate_config_on_startup(None))
        assert envelope.timestamp.endswith("Z") or "+00:00" in envelope.timestamp


class TestEntryPoint:
    def test_delegates_to_cli(self, capsys):
        assert entry_main(["--log-level", "ERROR", "constant"]) == ExitCodes.OK
        assert json.loads(capsys.readouterr().out)["exit_code"] == 0

    def test_unexpected_exception(self, monkeypatch):
        def explode(argv):
            raise RuntimeError("boom")
        monkeypatch.setattr("main.cli_main", explode)
        assert entry_main([]) == ExitCodes.UNEXPECTED
