"""Tests for experiment config validation and default resolution"""

from __future__ import annotations

import pytest

from config_validator import (DEFAULT_FUNCTIONS, ConfigValidator,
                              build_function_pairs, build_group, build_kernel,
                              build_tolerance, deep_merge,
                              validate_config_on_startup)
from errors import ConfigError
from hh_config import MCDefaults, QuadDefaults, SweepDefaults
from verify import PowerCutoff


def _failures(path):
    validator = ConfigValidator(path)
    valid, _ = validator.validate_all()
    return valid, {r.field for r in validator.failures()}


# ============================================================================
# Merging
# ============================================================================

class TestDeepMerge:
    def test_nested_override(self):
        merged = deep_merge({"tolerance": {"rel": 1e-8, "abs": 1e-14}}, {"tolerance": {"rel": 1e-6}})
        assert merged == {"tolerance": {"rel": 1e-6, "abs": 1e-14}}

    def test_none_is_ignored(self):
        assert deep_merge({"p": 3.0}, {"p": None}) == {"p": 3.0}

    def test_base_is_not_mutated(self):
        base = {"mc": {"seed": 1}}
        deep_merge(base, {"mc": {"seed": 2}})
        assert base == {"mc": {"seed": 1}}


# ============================================================================
# Defaults
# ============================================================================

class TestResolveDefaults:
    def test_empty_config(self):
        config = validate_config_on_startup(None)
        assert config["mode"] == "classical"
        assert config["p"] == 2.0
        assert config["kernel"] == {"catalog": "hilbert"}
        assert config["group"]["sphere_measure_override"] == 1.0
        assert config["functions"] == DEFAULT_FUNCTIONS
        assert config["betas"] == list(SweepDefaults.BETAS)
        assert config["tolerance"] == {"rel": QuadDefaults.REL_TOL, "abs": QuadDefaults.ABS_TOL,
                                       "max_subdiv": QuadDefaults.MAX_SUBDIV}
        assert config["mc"]["seed"] == MCDefaults.SEED
        assert config["output"] == {"format": "json", "path": None}

    def test_group_implies_group_mode(self, write_config):
        config = validate_config_on_startup(write_config({"group": {"weights": [1, 1, 2]}}))
        assert config["mode"] == "group"
        assert config["group"]["norm"] == "max"
        assert config["group"]["weights"] == [1.0, 1.0, 2.0]

    def test_overrides_win(self, write_config):
        path = write_config({"tolerance": {"rel": 1e-6}, "mc": {"seed": 3}})
        config = validate_config_on_startup(path, {"tolerance": {"rel": 1e-9, "abs": None},
                                                   "mc": {"seed": None}})
        assert config["tolerance"]["rel"] == 1e-9
        assert config["tolerance"]["abs"] == QuadDefaults.ABS_TOL
        assert config["mc"]["seed"] == 3

    def test_catalog_parameters_filled_from_p(self):
        config = validate_config_on_startup(None, {"kernel": {"catalog": "weighted_hilbert"},
                                                   "p": 3.0})
        assert config["kernel"] == {"catalog": "weighted_hilbert", "lam": 1.0, "p": 3.0,
                                    "k_exp": 2.0}

    def test_group_weighted_parameters_filled_from_group(self, write_config):
        path = write_config({"kernel": "group_weighted_hilbert",
                             "group": {"weights": [1, 1], "norm": "euclidean"}})
        kernel = validate_config_on_startup(path)["kernel"]
        assert kernel["Q"] == 2.0
        assert kernel["c"] == pytest.approx(2.0 / (2.0 * 3.141592653589793))

    def test_expr_kernel(self, write_config):
        config = validate_config_on_startup(write_config({"kernel": {"expr": "1/(r^2+s^2)",
                                                                     "order": -2}}))
        assert config["kernel"] == {"expr": "1/(r^2+s^2)", "order": -2.0}
        assert build_kernel(config).order == -2.0


# ============================================================================
# Validation failures
# ============================================================================

class TestValidation:
    @pytest.mark.parametrize("config, field", [
        ({"mode": "nonsense"}, "mode"),
        ({"mode": "classical", "group": {"weights": [1, 2]}}, "mode"),
        ({"mode": "theorem31"}, "mode"),
        ({"group": {"weights": []}}, "group.weights"),
        ({"group": {"weights": [1, 2], "norm": "euclidean"}}, "group"),
        ({"kernel": "poisson"}, "kernel.catalog"),
        ({"kernel": {"expr": "1/(r+"}}, "kernel.expr"),
        ({"kernel": {"catalog": "hilbert", "lam": 2}}, "kernel"),
        ({"p": 1.0}, "p"),
        ({"functions": []}, "functions"),
        ({"functions": [{"power_cutoff": {"beta": -1}}]}, "functions[0]"),
        ({"functions": [{"indicator": [2, 1]}]}, "functions[0]"),
        ({"functions": [{"f": {"expr": "x"}}]}, "functions[0]"),
        ({"betas": [0.1, 0.2]}, "betas"),
        ({"scales": [1.0, 2.0]}, "scales"),
        ({"radii": [-1.0]}, "radii"),
        ({"tolerance": {"rel": 0}}, "tolerance"),
        ({"mc": {"samples": 10}}, "mc.samples"),
        ({"output": {"format": "xml"}}, "output.format"),
        ({"colour": "blue"}, "colour"),
        ({"p": "two"}, "p"),
    ])
    def test_rejected(self, write_config, config, field):
        valid, fields = _failures(write_config(config))
        assert not valid
        assert field in fields

    def test_valid_full_config(self, write_config, tmp_path):
        path = write_config({
            "mode": "group",
            "group": {"weights": [1, 2], "norm": "power:4"},
            "kernel": {"catalog": "hilbert_lambda", "lam": 3},
            "p": 2.5,
            "functions": [{"f": {"power_cutoff": {"beta": 0.5}}, "g": {"indicator": [0, 1]}}],
            "betas": [0.5, 0.1],
            "scales": [0.5, 1, 2],
            "pairing": True,
            "tolerance": {"rel": 1e-8},
            "mc": {"samples": 20000, "seed": 1},
            "output": {"format": "csv", "path": str(tmp_path / "out.csv")},
        })
        valid, fields = _failures(path)
        assert valid, fields

    def test_missing_file(self, tmp_path):
        valid, fields = _failures(tmp_path / "missing.json")
        assert not valid
        assert fields == {"config_file"}

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert not ConfigValidator(path).load_config()

    def test_resolve_raises_config_error(self, write_config):
        with pytest.raises(ConfigError) as exc_info:
            validate_config_on_startup(write_config({"p": 0.5, "mode": "nonsense"}))
        assert {r.field for r in exc_info.value.failures} == {"p", "mode"}
        assert exc_info.value.exit_code == 3

    def test_report_prints(self, write_config, capsys):
        validator = ConfigValidator(write_config({"p": 0.5}))
        validator.validate_all()
        validator.print_validation_report()
        out = capsys.readouterr().out
        assert "CONFIGURATION ERRORS FOUND" in out
        assert "p must be" in out


# ============================================================================
# Builders
# ============================================================================

class TestBuilders:
    def test_function_pairs_use_conjugate_exponents(self, write_config):
        config = validate_config_on_startup(write_config({"p": 3.0}))
        group = build_group(config)
        pairs = build_function_pairs(config, group)
        assert len(pairs) == 3
        f, g = pairs[0]
        assert isinstance(f, PowerCutoff)
        assert f.p == 3.0
        assert g.p == pytest.approx(1.5)

    def test_explicit_f_and_g(self, write_config):
        config = validate_config_on_startup(write_config({
            "functions": [{"f": {"indicator": [0, 1]}, "g": {"zero": True}}]}))
        f, g = build_function_pairs(config, build_group(config))[0]
        assert f(0.5) == 1.0
        assert g.is_zero

    def test_tolerance(self, write_config):
        config = validate_config_on_startup(write_config({"tolerance": {"rel": 1e-7}}))
        tol = build_tolerance(config)
        assert tol.rel == 1e-7
        assert tol.max_subdiv == QuadDefaults.MAX_SUBDIV

    def test_group_uses_mc_settings(self, write_config):
        config = validate_config_on_startup(write_config({
            "group": {"weights": [1, 2], "norm": "power:4"}, "mc": {"samples": 20000, "seed": 5}}))
        group = build_group(config)
        assert group.Q == 3.0
        assert group.mc_samples == 20000
        assert group.seed == 5
