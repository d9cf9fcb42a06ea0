"""Tests for the run config file, environment overrides and validation."""
import pytest

from face_rfcn.errors import ConfigError
from face_rfcn.utils.config import (
    AnchorConfig,
    EvalConfig,
    RunConfig,
    TrainConfig,
    load_run_config,
    parse_config_text,
    render_run_config,
    write_run_config,
)


class TestParseConfigText:
    """The ``section.key = value`` syntax."""

    def test_sections_and_comments(self):
        values, lines = parse_config_text(
            "# header\n\ntrain.seed = 3  # comment\nanchors.scales = 1, 2\nlog_level = DEBUG\n"
        )
        assert values == {
            "train": {"seed": "3"},
            "anchors": {"scales": "1, 2"},
            "log_level": "DEBUG",
        }
        assert lines[("train", "seed")] == 3
        assert lines[("log_level",)] == 5

    @pytest.mark.parametrize(
        "text, line_no",
        [
            ("train.seed = 1\nnosuch.key = 2\n", 2),
            ("train.nosuch = 1\n", 1),
            ("train.seed = 1\n\ntrain.seed = 2\n", 3),
            ("train.seed 1\n", 1),
            ("verbose = yes\n", 1),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line_no):
        with pytest.raises(ConfigError) as info:
            parse_config_text(text)
        assert info.value.line_no == line_no
        assert str(info.value).startswith(f"line {line_no}:")


class TestLoadRunConfig:
    """Defaults, files and FACE_RFCN_* overrides."""

    def test_defaults(self):
        config = load_run_config()
        assert config.train.learning_rate == 0.005
        assert config.anchors.num_anchors == 7
        assert config.eval.fp_checkpoints == [10, 50, 100]

    def test_file_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "train.iterations = 5\n"
            "train.atrous = false\n"
            "anchors.base_stride = 16\n"
            "pyramid.test_scales = 0.5, 1\n"
            "dataset.target_size = 4, 16\n"
        )
        config = load_run_config(path)
        assert config.train.iterations == 5
        assert config.train.feature_stride == 16
        assert config.pyramid.test_scales == [0.5, 1.0]
        assert config.dataset.target_size == (4, 16)

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("FACE_RFCN_TRAIN__SEED", "5")
        monkeypatch.setenv("FACE_RFCN_LOG_LEVEL", "DEBUG")
        config = load_run_config()
        assert config.train.seed == 5
        assert config.log_level == "DEBUG"

    def test_environment_merges_with_file(self, tmp_path, monkeypatch):
        path = tmp_path / "run.cfg"
        path.write_text("train.iterations = 9\n")
        monkeypatch.setenv("FACE_RFCN_TRAIN__SEED", "4")
        config = load_run_config(path)
        assert (config.train.iterations, config.train.seed) == (9, 4)

    def test_invalid_value_reports_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("train.iterations = 5\n# note\ntrain.momentum = 1.5\n")
        with pytest.raises(ConfigError) as info:
            load_run_config(path)
        assert info.value.line_no == 3
        assert "train.momentum" in str(info.value)

    def test_stride_mismatch(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("anchors.base_stride = 16\n")
        with pytest.raises(ConfigError, match="base_stride"):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.cfg")

    def test_render_round_trip(self, small_config, tmp_path):
        path = tmp_path / "run.cfg"
        write_run_config(small_config, path)
        assert load_run_config(path).model_dump() == small_config.model_dump()

    def test_render_format(self, small_config):
        text = render_run_config(small_config)
        assert "anchors.scales = 1.0, 2.0, 4.0" in text
        assert "train.atrous = true" in text
        assert "log_file = \n" in text


class TestSectionValidation:
    """Per-section field constraints."""

    def test_anchor_scales_increasing(self):
        with pytest.raises(ValueError):
            AnchorConfig(scales=[2.0, 1.0])

    def test_anchor_thresholds_ordered(self):
        with pytest.raises(ValueError):
            AnchorConfig(pos_iou=0.3, neg_iou=0.5)

    def test_roi_band(self):
        with pytest.raises(ValueError):
            TrainConfig(roi_pos_iou=0.2, roi_neg_lo=0.3)

    def test_ohem_stages(self):
        cfg = TrainConfig(ohem_stages="rpn")
        assert cfg.ohem_enabled("rpn") and not cfg.ohem_enabled("rfcn")

    def test_checkpoints_sorted(self):
        assert EvalConfig(fp_checkpoints="100, 10").fp_checkpoints == [10, 100]

    def test_bucket_sides_ordered(self):
        with pytest.raises(ValueError):
            EvalConfig(hard_max_side=20, medium_max_side=10)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rat=0.1)

    def test_strided_network(self):
        config = RunConfig(
            train=TrainConfig(atrous=False), anchors=AnchorConfig(base_stride=16)
        )
        assert config.train.feature_stride == 16
