"""Plain-text run configuration.

One ``section.key = value`` per line, ``#`` starts a comment. Lists are
comma-separated; filter sizes are written ``4x4``. Omitted keys keep their
defaults, unknown keys are rejected.
"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .crossnet import NetworkConfig
from .errors import ConfigError


@dataclass
class OptimizerConfig:
    algorithm: str = "rmsprop"
    learning_rate: float = 0.05
    smoothing: float = 1e-6
    weight_decay: float = 5e-4
    drop_factor: float = 10.0
    patience: int = 3
    min_rate: float = 1e-6


@dataclass
class TrainingConfig:
    batch_size: int = 2
    max_iterations: int = 100000
    validation_interval: int = 2000
    validation_fraction: float = 0.1
    seed: int = 0
    early_stop: bool = False
    early_stop_window: int = 500
    early_stop_patience: int = 5


@dataclass
class DataConfig:
    manifest: str = ""
    augment: bool = True
    reflect: bool = False


@dataclass
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self):
        self.network.validate()
        o, t = self.optimizer, self.training
        if o.algorithm not in ("rmsprop", "sgd"):
            raise ConfigError(f"optimizer.algorithm must be rmsprop or sgd, got {o.algorithm!r}")
        if o.learning_rate <= 0 or o.min_rate <= 0:
            raise ConfigError("learning rates must be positive")
        if t.batch_size < 2 or t.batch_size % 2:
            raise ConfigError(f"training.batch_size must be even and >= 2, got {t.batch_size}")
        if t.max_iterations < 1:
            raise ConfigError("training.max_iterations must be >= 1")
        if not 0.0 <= t.validation_fraction < 1.0:
            raise ConfigError("training.validation_fraction must lie in [0, 1)")
        return self


SECTIONS = ("network", "optimizer", "training", "data")


def _parse_bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_filter(text):
    fh, sep, fw = text.lower().partition("x")
    return (int(fh), int(fw)) if sep else (int(fh), int(fh))


def _split(text):
    return [p.strip() for p in text.split(",") if p.strip()]


_LIST_PARSERS = {
    "channels": lambda t: tuple(int(p) for p in _split(t)),
    "filter_sizes": lambda t: tuple(_parse_filter(p) for p in _split(t)),
    "pool_rounding": lambda t: tuple(_split(t)),
    "fc_sizes": lambda t: tuple(int(p) for p in _split(t)),
}


def _parse_value(name, default, text):
    if name in _LIST_PARSERS:
        return _LIST_PARSERS[name](text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def _format_value(name, value):
    if name == "filter_sizes":
        return ",".join(f"{fh}x{fw}" for fh, fw in value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text, base=None):
    cfg = base or RunConfig()
    updates = {s: {} for s in SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        section, dot, name = key.strip().partition(".")
        if not dot or section not in SECTIONS:
            raise ConfigError(f"unknown section in key {key.strip()!r}", lineno)
        current = getattr(cfg, section)
        known = {f.name for f in fields(current)}
        if name not in known:
            raise ConfigError(f"unknown key {key.strip()!r}", lineno)
        try:
            updates[section][name] = _parse_value(name, getattr(current, name), value.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key.strip()}: {exc}", lineno) from None
    try:
        cfg = RunConfig(**{s: replace(getattr(cfg, s), **updates[s]) for s in SECTIONS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg):
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(f.name, getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def tiny_config(**training):
    """Desk-scale run used by the overfit and optimizer checks.

    Dropout is off: with 32-unit FC layers a 0.5 rate keeps the network from
    memorising the corpus within 5000 iterations.
    """
    net = replace(NetworkConfig.tiny(), dropout_rate=0.0)
    cfg = RunConfig(network=net)
    cfg.optimizer = replace(cfg.optimizer, learning_rate=0.001, patience=2)
    cfg.training = replace(cfg.training, **{"max_iterations": 5000, "validation_interval": 500,
                                            "validation_fraction": 0.0, **training})
    cfg.data = replace(cfg.data, augment=False)
    return cfg.validate()
