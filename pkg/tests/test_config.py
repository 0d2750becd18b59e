from pathlib import Path

import pytest

from config import AppConfig, RunConfig, read_config_file, render_config_file
from domain.errors import InvalidConfig
from domain.models import Mode, SiStrategy


def test_app_config_defaults():
    config = AppConfig.from_env({})

    assert config.threads == 1
    assert config.log_dir is None
    assert config.log_level == "INFO"
    assert config.data_dir == Path("/data")


def test_app_config_env_overrides():
    env = {
        "GESTURE_FORGE_THREADS": "4",
        "GESTURE_FORGE_LOG_DIR": "/tmp/logs",
        "GESTURE_FORGE_LOG_LEVEL": "DEBUG",
        "GESTURE_FORGE_DATA_DIR": "/tmp/data",
    }
    config = AppConfig.from_env(env)

    assert config.threads == 4
    assert config.log_dir == Path("/tmp/logs")
    assert config.log_level == "DEBUG"
    assert config.data_dir == Path("/tmp/data")


def test_app_config_rejects_bad_threads():
    with pytest.raises(InvalidConfig):
        AppConfig.from_env({"GESTURE_FORGE_THREADS": "many"})


def test_run_config_defaults():
    config = RunConfig.load(env={})

    assert config.damping == 0.5
    assert config.max_iter == 200
    assert config.convergence_iter == 15
    assert config.preference is None
    assert config.response_window == 2.0
    assert config.smoothing_window == 5
    assert config.topk_list == (2, 10)
    assert config.modes == (Mode.SD, Mode.SI)
    assert config.si_strategy is SiStrategy.POOLED_MEAN


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(
        "# analysis settings\n"
        "damping = 0.7\n"
        "mode = SD   # trailing comment\n"
        "\n"
        "topk_list = 1, 5\n"
        "preference = -1.5\n"
        "refine_exemplars = no\n",
        encoding="utf-8",
    )

    config = RunConfig.load(config_file=path, env={})

    assert config.damping == 0.7
    assert config.modes == (Mode.SD,)
    assert config.topk_list == (1, 5)
    assert config.preference == -1.5
    assert config.refine_exemplars is False


def test_precedence_flag_over_file_over_default(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("damping = 0.7\nmax_iter = 50\nthreads = 2\n", encoding="utf-8")

    config = RunConfig.load({"damping": 0.9, "max_iter": None}, path, env={"GESTURE_FORGE_THREADS": "3"})

    assert config.damping == 0.9
    assert config.max_iter == 50
    assert config.threads == 3
    assert config.convergence_iter == 15


def test_threads_flag_beats_env():
    config = RunConfig.load({"threads": 8}, env={"GESTURE_FORGE_THREADS": "3"})
    assert config.threads == 8


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("dampening = 0.7\n", encoding="utf-8")

    with pytest.raises(InvalidConfig, match="unknown key"):
        read_config_file(path)


def test_unparseable_value_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("max_iter = lots\n", encoding="utf-8")

    with pytest.raises(InvalidConfig, match="max_iter"):
        RunConfig.load(config_file=path, env={})


def test_rendered_config_reads_back(tmp_path):
    path = tmp_path / "run.conf"
    path.write_bytes(render_config_file({"preference": -1.0, "mode": "sd"}, header="cohort defaults"))

    assert path.read_text(encoding="utf-8").startswith("# cohort defaults\n")
    config = RunConfig.load(config_file=path, env={})
    assert (config.preference, config.mode) == (-1.0, "sd")


def test_render_rejects_unknown_keys():
    with pytest.raises(InvalidConfig, match="unknown key"):
        render_config_file({"dampening": 0.7})


def test_missing_config_file_is_invalid_config(tmp_path):
    with pytest.raises(InvalidConfig):
        read_config_file(tmp_path / "absent.conf")


@pytest.mark.parametrize(
    "overrides",
    [
        {"damping": 1.0},
        {"damping": 0.4},
        {"smoothing_window": 4},
        {"response_window": 0.0},
        {"mode": "both-ish"},
        {"min_valid_fraction": 1.5},
        {"topk_list": "0,2"},
        {"threads": 0},
        {"target_stimulus": 1},
    ],
)
def test_validate_rejects_out_of_range(overrides):
    with pytest.raises(InvalidConfig):
        RunConfig.load(overrides, env={}).validate()


def test_validate_checks_paths(tmp_path):
    config = RunConfig.load({"traces_dir": str(tmp_path / "missing")}, env={})
    with pytest.raises(InvalidConfig, match="trace directory"):
        config.validate(require_traces=True)


def test_echo_omits_paths_and_threads(tmp_path):
    config = RunConfig.load({"traces_dir": str(tmp_path), "threads": 4, "preference": -1.0}, env={})
    echo = config.echo()

    assert "traces_dir" not in echo
    assert "threads" not in echo
    assert echo["preference"] == -1.0
    assert echo["si_strategy"] == "pooled_mean"
    assert echo["topk_list"] == [2, 10]
