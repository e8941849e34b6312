"""
Unit tests for config module.
"""
import pytest
import os
import logging
from pathlib import Path
from unittest.mock import patch

import numpy as np


class TestSettings:
    """Test cases for Settings configuration."""

    def test_settings_loads_from_environment(self, test_settings, tmp_path):
        """Test that GRDA_OUT and GRDA_LOG_LEVEL are honoured."""
        assert test_settings.out_dir == tmp_path / "grda_out"
        assert test_settings.log_level == "WARNING"

    def test_settings_default_values(self, test_settings):
        """Test default values for training and verification knobs."""
        assert test_settings.default_lambda_d == 0.5
        assert test_settings.default_lr == 1e-4
        assert test_settings.default_disc_lr == 1e-4
        assert test_settings.default_batch_size == 32
        assert test_settings.hidden_width == 64
        assert test_settings.embedding_dim == 2
        assert test_settings.grid_bins == 32
        assert test_settings.trained_tolerance == 1e-2
        assert test_settings.analytic_tolerance == 1e-9
        assert test_settings.domain_balance_tolerance == 0.10
        assert test_settings.max_workers == 1

    def test_out_dir_default_without_env(self):
        """Test the output directory falls back to ./grda_out."""
        from config.settings import Settings

        env = {k: v for k, v in os.environ.items() if k != "GRDA_OUT"}
        with patch.dict(os.environ, env, clear=True):
            assert Settings(_env_file=None).out_dir == Path("grda_out")

    def test_prefixed_environment_variables(self):
        """Test GRDA_-prefixed variables override defaults."""
        from config.settings import Settings

        with patch.dict(os.environ, {"GRDA_HIDDEN_WIDTH": "16", "GRDA_GRID_BINS": "8"}):
            settings = Settings()
            assert settings.hidden_width == 16
            assert settings.grid_bins == 8

    def test_reload_settings_picks_up_changes(self):
        """Test reload_settings clears the cache."""
        from config.settings import get_settings, reload_settings

        first = get_settings()
        with patch.dict(os.environ, {"GRDA_DEFAULT_EPOCHS": "7"}):
            reloaded = reload_settings()
        assert first.default_epochs == 200
        assert reloaded.default_epochs == 7

    def test_log_level_validation_case_insensitive(self):
        """Test log level validation is case insensitive."""
        from config.settings import Settings

        settings = Settings(log_level="debug")
        assert settings.log_level == "DEBUG"

    def test_log_level_validation_invalid(self):
        """Test invalid log level raises error."""
        from pydantic import ValidationError
        from config.settings import Settings

        with pytest.raises(ValidationError) as exc_info:
            Settings(log_level="LOUD")
        assert "log_level must be one of" in str(exc_info.value)

    def test_rates_must_be_positive(self):
        """Test non-positive rates are rejected."""
        from pydantic import ValidationError
        from config.settings import Settings

        with pytest.raises(ValidationError):
            Settings(default_lr=0)
        with pytest.raises(ValidationError):
            Settings(analytic_tolerance=-1e-9)

    def test_batch_size_needs_pairs(self):
        """Test a batch size below two is rejected."""
        from pydantic import ValidationError
        from config.settings import Settings

        with pytest.raises(ValidationError):
            Settings(default_batch_size=1)

    def test_invalid_environment_value(self):
        """Test a malformed environment variable surfaces as a validation error."""
        from pydantic import ValidationError
        from config.settings import Settings

        with patch.dict(os.environ, {"GRDA_MAX_WORKERS": "0"}):
            with pytest.raises(ValidationError):
                Settings()


class TestTptSplits:
    """Test cases for the built-in state splits."""

    def test_state_list_has_48_entries(self):
        """Test the contiguous state list."""
        from config.tpt_splits import CONTIGUOUS_STATES

        assert len(CONTIGUOUS_STATES) == 48
        assert len(set(CONTIGUOUS_STATES)) == 48

    def test_border_edges_name_known_states(self):
        """Test every border names two contiguous states."""
        from config.tpt_splits import CONTIGUOUS_STATES, STATE_BORDERS

        known = set(CONTIGUOUS_STATES)
        assert all(a in known and b in known for a, b in STATE_BORDERS)
        assert len(set(STATE_BORDERS)) == len(STATE_BORDERS)

    def test_get_split_is_case_insensitive(self):
        """Test built-in names resolve regardless of case."""
        from config.tpt_splits import get_split

        assert get_split("EW").name == "ew"
        assert get_split("ns").name == "ns"

    def test_split_from_json_malformed(self):
        """Test a split document without 'target' is rejected."""
        from config.tpt_splits import TptSplit
        from engine.errors import InputError

        with pytest.raises(InputError):
            TptSplit.from_json({"source": ["CA"], "edges": []})


class TestLoggingConfig:
    """Test cases for logging configuration."""

    def test_setup_logging_creates_handlers(self):
        """Test setup_logging installs a single stderr handler."""
        from config.logging_config import setup_logging

        setup_logging("DEBUG")

        root_logger = logging.getLogger()
        assert len(root_logger.handlers) == 1
        assert root_logger.level == logging.DEBUG

        # Clean up
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)

    def test_setup_logging_json_mode(self):
        """Test JSON mode configures without error and sets the level."""
        from config.logging_config import setup_logging

        setup_logging("WARNING", use_json=True)
        assert logging.getLogger().level == logging.WARNING

        root_logger = logging.getLogger()
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)

    def test_coerce_numpy_values(self):
        """Test numpy scalars and arrays become plain values."""
        from config.logging_config import coerce_numpy_values

        event = coerce_numpy_values(None, "info", {
            "loss": np.float64(0.5),
            "epoch": np.int64(3),
            "small": np.arange(3),
            "large": np.zeros((10, 10)),
            "text": "kept",
        })
        assert event["loss"] == 0.5 and isinstance(event["loss"], float)
        assert event["epoch"] == 3 and isinstance(event["epoch"], int)
        assert event["small"] == [0, 1, 2]
        assert event["large"] == "ndarray(shape=(10, 10), dtype=float64)"
        assert event["text"] == "kept"

    def test_get_logger_binds_context(self):
        """Test get_logger returns a bindable structlog logger."""
        from config.logging_config import get_logger

        log = get_logger("tests").bind(method="grda", seed=0)
        assert hasattr(log, "info")
