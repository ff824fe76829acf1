"""
Tests for model/run configuration and the cross-field validation rules
"""
import pytest
from pydantic import ValidationError

from app.models.config_models import LossKind, MeasurementMode, ModelConfig, RunConfig, validate_run_config
from utils.errors import ConfigError
from utils.validation import ConfigValidator


class TestConfigValidator:
    """(is_valid, message) rules"""

    def test_valid_shape(self):
        """Test a consistent model shape passes"""
        assert ConfigValidator.validate_locality(16, 4) == (True, None)
        assert ConfigValidator.validate_windows(16, 16) == (True, None)
        assert ConfigValidator.validate_classes(16, 10) == (True, None)

    def test_locality_above_n(self):
        """Test k above n is reported"""
        ok, message = ConfigValidator.validate_locality(4, 5)
        assert not ok
        assert "k=5" in message

    def test_qubit_cap(self):
        """Test n above the cap is reported"""
        ok, message = ConfigValidator.validate_qubits(30, 24)
        assert not ok
        assert "cap" in message

    def test_single_class_rejected(self):
        """Test fewer than two classes is reported"""
        assert not ConfigValidator.validate_classes(4, 1)[0]

    def test_switch_epoch(self):
        """Test the switch epoch must precede the last epoch"""
        assert ConfigValidator.validate_switch_epoch(30, 50)[0]
        assert not ConfigValidator.validate_switch_epoch(50, 50)[0]

    def test_fractions(self):
        """Test split fractions must sum to one"""
        assert ConfigValidator.validate_fractions([0.8, 0.1, 0.1])[0]
        assert not ConfigValidator.validate_fractions([0.8, 0.3])[0]
        assert not ConfigValidator.validate_fractions([1.2, -0.2])[0]

    def test_collect_keeps_order(self):
        """Test problems are collected in rule order"""
        problems = ConfigValidator.model_shape_problems(3, 5, 4, 6, cap=24)
        assert len(problems) == 3
        assert problems[0].startswith("k=5")


class TestModelConfig:
    """Mode defaults and shape checks"""

    def test_windows_default_to_n(self):
        """Test m defaults to n"""
        assert ModelConfig(n_qubits=5, locality=2).n_windows == 5

    def test_vqc_forces_locality_one(self):
        """Test VQC always uses k = 1"""
        cfg = ModelConfig(n_qubits=4, locality=3, mode="vqc")
        assert cfg.locality == 1
        assert cfg.observable_dim == 2

    def test_observable_dim(self):
        """Test the observable dimension is 2^k"""
        assert ModelConfig(n_qubits=6, locality=3).observable_dim == 8

    def test_locality_above_n_rejected(self):
        """Test k above n fails validation"""
        with pytest.raises(ValidationError):
            ModelConfig(n_qubits=3, locality=4)

    def test_classes_above_windows_rejected(self):
        """Test C above m fails validation"""
        with pytest.raises(ValidationError):
            ModelConfig(n_qubits=4, n_windows=2, n_classes=3)

    def test_bare_circuit_needs_no_classes(self):
        """Test a bare circuit config has no class count"""
        assert ModelConfig(n_qubits=2).n_classes is None

    def test_frozen(self):
        """Test model configs are immutable"""
        cfg = ModelConfig(n_qubits=2)
        with pytest.raises(ValidationError):
            cfg.depth = 3


class TestRunConfig:
    """validate_run_config over merged flag/file values"""

    def test_defaults(self):
        """Test run config defaults"""
        config = validate_run_config({})
        assert (config.n, config.k, config.depth, config.classes) == (16, 4, 6, 10)
        assert config.loss is LossKind.CROSS_ENTROPY

    def test_string_values_are_coerced(self):
        """Test config-file strings become typed values"""
        config = validate_run_config({"mode": "ano", "n": "4", "k": "2", "classes": "2", "lr": "0.05"})
        assert config.mode is MeasurementMode.ANO
        assert config.to_model_config().locality == 2
        assert config.to_hyperparams().lr == 0.05

    def test_empty_values_are_ignored(self):
        """Test empty config values fall back to defaults"""
        assert validate_run_config({"m": "", "run_id": None}).m is None

    def test_all_problems_reported(self):
        """Test every problem appears in one ConfigError"""
        with pytest.raises(ConfigError) as exc:
            validate_run_config({"n": 4, "k": 5, "m": 6, "classes": 8, "colour": "blue"})
        problems = exc.value.problems
        assert any("colour" in p for p in problems)
        assert any(p.startswith("k=5") for p in problems)
        assert any(p.startswith("m=6") for p in problems)
        assert any(p.startswith("C=8") for p in problems)

    def test_vqc_ignores_k(self):
        """Test k is ignored for VQC runs"""
        config = validate_run_config({"mode": "vqc", "n": 4, "k": 9, "classes": 2})
        assert config.to_model_config().locality == 1

    def test_negative_epochs(self):
        """Test negative epochs are rejected"""
        with pytest.raises(ConfigError):
            validate_run_config({"epochs": -1})

    def test_snapshot_is_flat_strings(self):
        """Test the snapshot maps names to strings"""
        snapshot = RunConfig(mode="dano", n=4, k=2, classes=2).snapshot()
        assert snapshot["mode"] == "dano"
        assert snapshot["loss"] == "ce"
        assert snapshot["m"] == ""
        assert all(isinstance(v, str) for v in snapshot.values())
