"""Model and training configuration plus config-file I/O."""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .preprocessing import SR_CONFIGS, STATIC_SCALES, TEMPORAL_SCALES

VARIANTS = ("none", "self", "crossgaze", "dheca")
MODES = ("static", "temporal")
BACKBONES = ("resnet18", "toy")
SELECTIONS = ("final", "best_val")


@dataclass
class DhecaConfig:
    depth: int = 4
    dim: int = 512
    heads: int = 8
    mlp_ratio: float = 4.0
    variant: str = "dheca"

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigurationError("depth must be >= 1")
        if self.heads < 1 or self.dim < 1 or self.dim % self.heads:
            raise ConfigurationError(f"dim {self.dim} must be a positive multiple of heads {self.heads}")
        if self.mlp_ratio <= 0:
            raise ConfigurationError("mlp_ratio must be positive")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown attention variant {self.variant!r}; choose from {VARIANTS}")

    @property
    def mlp_hidden(self):
        return int(round(self.dim * self.mlp_ratio))


@dataclass
class ModelConfig:
    mode: str = "static"
    backbone: str = "resnet18"
    pretrained: bool = True
    sr_config: str = "head"
    enhancer: str = "bicubic"
    detector: str = "annotation"
    dheca: DhecaConfig = field(default_factory=DhecaConfig)

    def __post_init__(self):
        if isinstance(self.dheca, dict):
            self.dheca = DhecaConfig(**self.dheca)
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.backbone not in BACKBONES:
            raise ConfigurationError(f"unknown backbone {self.backbone!r}; choose from {BACKBONES}")
        if self.sr_config not in SR_CONFIGS:
            raise ConfigurationError(f"unknown SR configuration {self.sr_config!r}; choose from {SR_CONFIGS}")
        if self.backbone == "resnet18" and self.dheca.dim != 512:
            raise ConfigurationError("the resnet18 backbone emits 512 channels; set dheca.dim = 512")

    @property
    def scales(self):
        return STATIC_SCALES if self.mode == "static" else TEMPORAL_SCALES

    @property
    def head_images(self):
        return len(self.scales)

    @property
    def eye_images(self):
        return 2 if self.mode == "static" else 2 * len(TEMPORAL_SCALES)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 0
    device: str = "cpu"
    deterministic: bool = True
    selection: str = "final"
    warm_start: str = None
    exclude_unrecovered: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.selection not in SELECTIONS:
            raise ConfigurationError(f"unknown selection {self.selection!r}; choose from {SELECTIONS}")


def _strict(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {where!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"bad section {where!r}: {exc}") from exc


def model_config_from_dict(data):
    data = dict(data or {})
    dheca = _strict(DhecaConfig, data.pop("dheca", None), "model.dheca")
    return _strict(ModelConfig, {**data, "dheca": dheca}, "model")


def train_config_from_dict(data):
    return _strict(TrainConfig, data, "train")


def load_config(path):
    """Read a YAML/JSON run config with optional ``model``, ``train`` and ``data`` sections."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must contain a mapping")
    unknown = set(raw) - {"model", "train", "data"}
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return {
        "model": model_config_from_dict(raw.get("model")),
        "train": train_config_from_dict(raw.get("train")),
        "data": dict(raw.get("data") or {}),
    }


def config_echo(model_cfg, train_cfg=None, data=None):
    out = {"model": asdict(model_cfg)}
    if train_cfg is not None:
        out["train"] = asdict(train_cfg)
    if data is not None:
        out["data"] = dict(data)
    return out
