import json
import math
from pathlib import Path

import pytest

from config.family_config import FamilyConfig
from config.problem_config import ConfigError, ProblemConfig
from tests.conftest import write_config


DEFAULT_JSON = Path(__file__).resolve().parent.parent / "config" / "default_config.json"


class TestProblemConfig:
    def test_defaults(self):
        config = ProblemConfig()
        assert config.get("grid_n") == 400
        assert [(a.r, a.R, a.beta) for a in config.get_annuli()] == [(1.0, 60.0, 0.2)]
        assert config.get_domain_max() == math.inf
        assert config.get_solver_options().grad_tol is None
        assert config.get_reporting_config() == {"log_level": "INFO", "max_workers": 4}

    def test_default_file_matches_defaults(self):
        assert json.loads(DEFAULT_JSON.read_text()) == ProblemConfig.DEFAULT_CONFIG
        assert ProblemConfig(str(DEFAULT_JSON)).to_dict() == ProblemConfig.DEFAULT_CONFIG

    def test_json_file_with_exponent_floats(self, tmp_path):
        path = write_config(tmp_path, {"solver": {"grad_tol": 1e-08}, "grid_n": 200})
        config = ProblemConfig(path)
        assert config.get_solver_options().grad_tol == 1e-08
        assert config.get_grid().n == 200
        assert config.get_solver_options().max_iters == 10000

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("grid_n: 100\nannuli:\n  - {r: 2.0, R: 50.0, beta: 0.1}\n")
        config = ProblemConfig(str(path))
        assert config.get_annuli()[0].R == 50.0
        assert config.get_grid().n == 100

    def test_beta_out_of_range(self):
        with pytest.raises(ConfigError, match="annuli/0/beta"):
            ProblemConfig(document={"annuli": [{"r": 1.0, "R": 60.0, "beta": 0.3}]})

    def test_inverted_annulus(self):
        with pytest.raises(ConfigError, match="annuli/0"):
            ProblemConfig(document={"annuli": [{"r": 60.0, "R": 60.0, "beta": 0.2}]})

    def test_overlapping_annuli(self):
        annuli = [{"r": 1.0, "R": 60.0, "beta": 0.2}, {"r": 50.0, "R": 100.0, "beta": 0.2}]
        with pytest.raises(ConfigError, match="annuli/1"):
            ProblemConfig(document={"annuli": annuli})

    def test_empty_annuli(self):
        with pytest.raises(ConfigError, match="^annuli"):
            ProblemConfig(document={"annuli": []})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            ProblemConfig(str(tmp_path / "absent.json"))

    def test_json_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "grid_n": 400,\n  "annuli": [\n')
        with pytest.raises(ConfigError, match="line"):
            ProblemConfig(str(path))

    def test_yaml_parse_error(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("grid_n: 400\nannuli: [1, 2\n")
        with pytest.raises(ConfigError, match="line"):
            ProblemConfig(str(path))

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="top level"):
            ProblemConfig(str(path))

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="solver"):
            ProblemConfig(document={"solver": {"tolerance": 1.0}})

    def test_unknown_family_param(self):
        with pytest.raises(ConfigError, match="unknown parameter 'b'"):
            ProblemConfig(document={"nonlinearity": {"params": {"a": 3.0, "p": 3.0, "b": 1.0}}})

    def test_missing_family_param(self):
        with pytest.raises(ConfigError, match="missing parameter 'p'"):
            ProblemConfig(document={"nonlinearity": {"family": "power", "params": {"a": 3.0}}})
        with pytest.raises(ConfigError, match=r"step: g\(t\) = level on \[beta, 1 - beta\]"):
            ProblemConfig(document={"weight": {"family": "step", "params": {}}})

    def test_family_switch_replaces_params(self):
        config = ProblemConfig(document={"nonlinearity": {"family": "constant", "params": {"c": 2.0}}})
        assert config.to_dict()["nonlinearity"]["params"] == {"c": 2.0}
        assert config.build_problem().f.family == "constant"

    def test_domain_max(self):
        assert ProblemConfig(document={"nonlinearity": {"domain_max": 100.0}}).get_domain_max() == 100.0
        with pytest.raises(ConfigError, match="domain_max"):
            ProblemConfig(document={"nonlinearity": {"domain_max": 30.0}})

    def test_hypothesis_settings(self):
        config = ProblemConfig(document={"hypotheses": {"mu": 3.0, "lambda": 0.1}, "seed": 5})
        settings = config.get_hypothesis_settings()
        assert settings.mu == 3.0 and settings.lam == 0.1
        assert settings.seed == 5
        assert config.get_solver_options().seed == 5

    def test_build_problem(self):
        problem = ProblemConfig(document={"weight": {"family": "step", "params": {"beta": 0.2}}}).build_problem()
        assert problem.grid.n == 400
        assert problem.g.family == "step"
        assert problem.f.params == {"a": 3.0, "p": 3.0}

    def test_negative_coefficient(self):
        config = ProblemConfig(document={"nonlinearity": {"params": {"a": -1.0, "p": 3.0}}})
        with pytest.raises(ConfigError, match="nonlinearity"):
            config.build_problem()

    def test_invalid_weight(self):
        config = ProblemConfig(document={"weight": {"family": "table", "params": {"t": [0.0, 0.5], "g": [1.0, 0.0]}}})
        with pytest.raises(ConfigError, match="weight"):
            config.build_problem()

    def test_with_overrides(self):
        config = ProblemConfig()
        changed = config.with_overrides({"annuli.0.R": 80.0, "nonlinearity/params/a": 2.0})
        assert changed.get_annuli()[0].R == 80.0
        assert changed.to_dict()["nonlinearity"]["params"]["a"] == 2.0
        assert config.get_annuli()[0].R == 60.0

    def test_bad_overrides(self):
        config = ProblemConfig()
        with pytest.raises(ConfigError, match="no such configuration field"):
            config.with_overrides({"annuli.3.R": 80.0})
        with pytest.raises(ConfigError):
            config.with_overrides({"annuli.0.beta": 0.5})

    def test_set(self):
        config = ProblemConfig()
        config.set("grid_n", 100)
        assert config.get_grid().n == 100
        with pytest.raises(ConfigError):
            config.set("grid_n", 2)


class TestFamilyConfig:
    def test_supported_families(self):
        assert FamilyConfig.get_supported_families("nonlinearity") == ["constant", "power", "power_sum"]
        assert FamilyConfig.get_supported_families("weight") == ["constant", "step", "table"]
        assert FamilyConfig.get_family_info("weight", "step")["required"] == ["beta"]
        assert FamilyConfig("nonlinearity", "power_sum").get_required_params() == ["a", "p", "a2", "p2"]

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            FamilyConfig("nonlinearity", "exponential")
        with pytest.raises(ValueError):
            FamilyConfig("kernel", "power")

    def test_validate_params(self):
        family = FamilyConfig("weight", "step")
        assert family.validate_params({"beta": 0.2, "level": 2.0}) == []
        assert family.validate_params({"level": 2.0}) == ["missing parameter 'beta'"]

    def test_kind_mismatch(self, grid):
        with pytest.raises(ValueError):
            FamilyConfig("weight", "constant").build_nonlinearity({"c": 1.0})
        with pytest.raises(ValueError):
            FamilyConfig("nonlinearity", "constant").build_weight(grid, {})

    def test_power_sum(self):
        f = FamilyConfig("nonlinearity", "power_sum").build_nonlinearity({"a": 1.0, "p": 3.0, "a2": 2.0, "p2": 2.0})
        assert float(f.f(2.0)) == pytest.approx(16.0)
