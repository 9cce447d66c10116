"""
Tests for experiment configuration parsing, presets and validation.
"""

import pytest

from mdshadow.errors import ConfigError
from mdshadow.experiments.config import ExperimentConfig, load_config, load_preset, validate_config


class TestDefaults:
    def test_empty_document_gives_paper_defaults(self):
        config = validate_config("")
        assert config.experiment == "exp3"
        assert config.n_particles == 100
        assert config.beta == 1.0
        assert config.box_side == 11.5
        assert config.dt_values == (0.01, 0.005, 0.0025)
        assert config.ensemble_size == 1000
        assert config.preset == "paper"

    def test_desk_preset(self):
        config = validate_config("", preset="desk")
        assert config.n_particles == 16
        assert config.ensemble_size == 200
        assert config.T == 20
        assert config.dt_values == (0.01, 0.0025)

    def test_experiment_block_applies(self):
        config = validate_config("experiment: exp4")
        assert config.T == 10
        assert config.kick == (10.0, 0.0)
        assert config.bin_spec("F1").low == -10.0

    def test_exp5_auto_epsilon(self):
        config = validate_config("", preset="desk", overrides={"experiment": "exp5"})
        assert config.n_particles == 2
        assert config.epsilon is None
        assert config.dt_ref == 0.001

    def test_explicit_epsilon(self):
        assert validate_config("experiment: exp5\nepsilon: 0.125").epsilon == 0.125

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("", preset="laptop")
        assert excinfo.value.field == "preset"

    def test_presets_share_keys(self):
        assert set(load_preset("desk")["defaults"]) == set(load_preset("paper")["defaults"])


class TestPrecedence:
    def test_document_beats_preset_block(self):
        assert validate_config("T: 4", preset="desk").T == 4.0

    def test_overrides_beat_document(self):
        config = validate_config(
            "seed: 3\noutput_dir: a",
            preset="desk",
            overrides={"seed": 9, "output_dir": "b", "workers": None},
        )
        assert config.seed == 9
        assert config.output_dir == "b"
        assert config.workers == 1

    def test_override_experiment_selects_block(self):
        config = validate_config("experiment: exp3", preset="desk", overrides={"experiment": "exp1"})
        assert config.experiment == "exp1"
        assert config.ensemble_size == 3

    def test_single_dt_scalar(self):
        assert validate_config("dt: 0.01", preset="desk").dt_values == (0.01,)


class TestRejections:
    def test_negative_step(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("dt: -0.01")
        assert excinfo.value.field == "dt"
        assert excinfo.value.line == 1

    def test_incommensurate_horizon(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("T: 1\ndt: 0.3")
        assert excinfo.value.field == "dt"

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("n_particles: 4\ntemperature: 2")
        assert excinfo.value.field == "temperature"
        assert excinfo.value.line == 2

    def test_yaml_syntax_error_reports_line(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("n_particles: 4\nT: [1\nseed: 2")
        assert excinfo.value.line is not None

    def test_non_mapping_document(self):
        with pytest.raises(ConfigError):
            validate_config("- exp3\n- exp4")

    @pytest.mark.parametrize(
        "document, field",
        [
            ("experiment: exp9", "experiment"),
            ("n_particles: 1", "n_particles"),
            ("n_particles: 2.5", "n_particles"),
            ("box_side: 4.0", "box_side"),
            ("r_cutoff: 1.0", "r_cutoff"),
            ("beta: 0", "beta"),
            ("ensemble_size: 0", "ensemble_size"),
            ("kick: [1.0]", "kick"),
            ("particle: 100", "particle"),
            ("functionals: [F1, F9]", "functionals"),
            ("functionals: []", "functionals"),
            ("tau: 60", "tau"),
            ("bin_ranges: {F1: [1.0, -1.0]}", "bin_ranges"),
            ("seed: -1", "seed"),
            ("epsilon: 1.5", "epsilon"),
            ("workers: 0", "workers"),
            ("burn_in_steps: true", "burn_in_steps"),
        ],
    )
    def test_field_is_named(self, document, field):
        with pytest.raises(ConfigError) as excinfo:
            validate_config(document)
        assert excinfo.value.field == field

    @pytest.mark.parametrize(
        "document, field, line",
        [
            ("experiment: [exp1]", "experiment", 1),
            ("seed: 3\nexperiment: {a: 1}", "experiment", 2),
            ("bin_ranges: 5", "bin_ranges", 1),
            ("seed: 3\nbin_ranges: [1, 2]", "bin_ranges", 2),
            ("functionals: [F1]\nbin_ranges: {F2: [0.0, 1.0]}", "bin_ranges", 2),
            ("bin_ranges: {F1: [a, 1.0]}", "bin_ranges", 1),
        ],
    )
    def test_wrong_types_are_config_errors(self, document, field, line):
        with pytest.raises(ConfigError) as excinfo:
            validate_config(document)
        assert excinfo.value.field == field
        assert excinfo.value.line == line

    def test_preset_ranges_follow_configured_functionals(self):
        config = validate_config("experiment: exp3\nfunctionals: [F1]", preset="desk")
        assert config.bin_ranges == {"F1": (-30.0, 30.0)}

    def test_reference_step_must_divide_horizon(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_config("experiment: exp5\ndt_ref: 0.3")
        assert excinfo.value.field == "dt_ref"

    def test_config_error_is_value_error(self):
        with pytest.raises(ValueError):
            validate_config("beta: -1")


class TestLoadConfig:
    def test_reads_file(self, tmp_path, small_config_text):
        path = tmp_path / "run.yaml"
        path.write_text(small_config_text, encoding="utf-8")
        config = load_config(str(path), preset="desk")
        assert config.n_particles == 4
        assert config.seed == 11

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_config(str(tmp_path / "absent.yaml"))
        assert excinfo.value.field == "config"

    def test_wrong_suffix(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{}", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_no_file_means_preset_only(self):
        assert load_config(None, preset="desk").n_particles == 16


class TestExperimentConfig:
    def test_derived_specs(self):
        config = validate_config("beta: 2.0\nseed: 5", preset="desk")
        assert config.thermostat().beta == 2.0
        assert config.ensemble_spec().master_seed == 5
        assert [f.name for f in config.functional_ids()] == ["F1", "F2", "F3", "F4", "F5"]

    def test_bin_spec_missing_means_data_range(self):
        config = validate_config("experiment: exp2", preset="desk")
        assert config.bin_spec("F1") is None

    def test_to_dict_is_plain(self):
        record = validate_config("experiment: exp4", preset="desk").to_dict()
        assert record["dt_values"] == [0.01, 0.005, 0.0025]
        assert record["kick"] == [10.0, 0.0]
        assert record["bin_ranges"]["F1"] == [-15.0, 30.0]

    def test_dataclass_defaults_match_paper_preset(self):
        defaults = ExperimentConfig()
        config = validate_config("")
        assert (defaults.n_particles, defaults.T, defaults.ensemble_size) == (
            config.n_particles,
            config.T,
            config.ensemble_size,
        )
