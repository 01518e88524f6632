import pytest

from personnet.config import (RunConfig, format_config, load_config, parse_config,
                              tiny_config)
from personnet.crossnet import NetworkConfig
from personnet.errors import ConfigError


def test_defaults_when_empty():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.training.batch_size == 2
    assert cfg.optimizer.learning_rate == 0.05
    assert cfg.network.dropout_rate == 0.5
    assert cfg.training.max_iterations == 100000
    assert cfg.training.early_stop is False


def test_parse_values_and_comments():
    cfg = parse_config("""
        # a comment line
        network.channels = 8,8,8,8,8   # trailing comment
        network.filter_sizes = 3x3, 3x3, 1x1, 1, 2x2
        optimizer.algorithm = sgd
        training.early_stop = yes
    """)
    assert cfg.network.channels == (8,) * 5
    assert cfg.network.filter_sizes == ((3, 3), (3, 3), (1, 1), (1, 1), (2, 2))
    assert cfg.optimizer.algorithm == "sgd"
    assert cfg.training.early_stop is True


@pytest.mark.parametrize("text, line", [
    ("training.batch_size = 2\nnetwork.colour = red\n", 2),
    ("bogus.key = 1\n", 1),
    ("\n\nno equals sign\n", 3),
    ("training.batch_size = two\n", 1),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line


@pytest.mark.parametrize("text", [
    "training.batch_size = 3",
    "optimizer.algorithm = adam",
    "optimizer.learning_rate = 0",
    "training.validation_fraction = 1.0",
    "network.neighborhood = 4",
])
def test_invalid_values_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_round_trip():
    for cfg in (RunConfig(), tiny_config(seed=4)):
        assert parse_config(format_config(cfg)) == cfg


def test_load_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("training.seed = 11\n", encoding="utf-8")
    assert load_config(p).training.seed == 11


def test_tiny_config_shape():
    cfg = tiny_config()
    assert cfg.network.input_height == 40 and cfg.network.input_width == 20
    assert cfg.network.fc_sizes == (32, 32, 16)
    assert set(cfg.network.channels) == {8}
    assert cfg.network == NetworkConfig.tiny().__class__(**{
        **NetworkConfig.tiny().__dict__, "dropout_rate": 0.0})
