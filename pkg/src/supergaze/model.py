"""Static and temporal gaze estimators built from backbones, DHECA and an MLP head."""

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import gaze_codec
from .backbone import build_extractor
from .config import DhecaConfig, ModelConfig, model_config_from_dict
from .detectors import get_detector
from .dheca import Dheca
from .enhancers import get_enhancer
from .errors import ConfigurationError, LoadError
from .preprocessing import Preprocessor

CHECKPOINT_FORMAT = "supergaze-checkpoint"
CHECKPOINT_VERSION = 1


class GazeModel(nn.Module):
    """Predicts ``(sin yaw, cos yaw, sin pitch)`` from head and eye image stacks."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.dheca.dim
        self.head_net = build_extractor(cfg.backbone, "head", channels=c, pretrained=cfg.pretrained)
        self.eye_net = build_extractor(cfg.backbone, "eye", channels=c, pretrained=cfg.pretrained)
        if self.head_net.channels != self.eye_net.channels or self.head_net.channels != c:
            raise ConfigurationError(
                f"backbone widths {self.head_net.channels}/{self.eye_net.channels} do not match dim {c}")
        self.head_len = cfg.head_images * self.head_net.tokens_per_image()
        self.eye_len = cfg.eye_images * self.eye_net.tokens_per_image()
        self.dheca = Dheca(cfg.dheca, self.head_len, self.eye_len)
        self.mlp = nn.Sequential(nn.Linear(self.dheca.out_dim, c), nn.ReLU(), nn.Linear(c, 3))

    def tokens(self, heads, eyes):
        return self.head_net(heads), self.eye_net(eyes)

    def forward(self, heads, eyes):
        """``heads``: ``(B, S, 3, 224, 224)``, ``eyes``: ``(B, E, 3, 64, 64)`` -> ``(B, 3)``."""
        if heads.shape[1] != self.cfg.head_images or eyes.shape[1] != self.cfg.eye_images:
            raise ConfigurationError(
                f"{self.cfg.mode} model expects {self.cfg.head_images} head and "
                f"{self.cfg.eye_images} eye images, got {heads.shape[1]} and {eyes.shape[1]}")
        h, e = self.dheca(*self.tokens(heads, eyes))
        return self.mlp(torch.cat([h, e], dim=-1))


@dataclass
class GazePrediction:
    trig: np.ndarray
    yaw: float
    pitch: float
    vector: np.ndarray

    @classmethod
    def from_trig(cls, trig):
        trig = np.asarray(trig, dtype=np.float64)
        yaw, pitch = gaze_codec.decode(trig)
        return cls(trig, float(yaw), float(pitch), gaze_codec.angles_to_vector(yaw, pitch))


def build_preprocessor(cfg: ModelConfig, detector=None, enhancer=None):
    """Preprocessor for ``cfg``; explicit ``detector``/``enhancer`` override the names."""
    if detector is None:
        detector = get_detector(cfg.detector)
    if enhancer is None and cfg.sr_config != "none":
        enhancer = get_enhancer(cfg.enhancer)
    return Preprocessor(cfg.sr_config, enhancer=enhancer, detector=detector)


@torch.no_grad()
def _predict(model, heads, eyes):
    was_training = model.training
    model.eval()
    try:
        dtype = next(model.parameters()).dtype
        device = next(model.parameters()).device
        trig = model(heads[None].to(device, dtype), eyes[None].to(device, dtype))[0]
    finally:
        model.train(was_training)
    return GazePrediction.from_trig(trig.double().cpu().numpy())


def predict_static(model, head, preprocessor, regions=None, frame_id=None):
    """Gaze for one head image (any size)."""
    if model.cfg.mode != "static":
        raise ConfigurationError("predict_static needs a static-mode model")
    heads, eyes = preprocessor.prepare_static(head, regions=regions, frame_id=frame_id)
    return _predict(model, heads, eyes)


def predict_temporal(model, frames, preprocessor, regions=None, frame_ids=None):
    """Gaze for the centre frame of a 7-frame window."""
    if model.cfg.mode != "temporal":
        raise ConfigurationError("predict_temporal needs a temporal-mode model")
    heads, eyes = preprocessor.prepare_temporal(frames, regions=regions, frame_ids=frame_ids)
    return _predict(model, heads, eyes)


def save_checkpoint(path, model, extra=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "kind": "model",
        "config": asdict(model.cfg),
        "state_dict": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "extra": extra or {},
    }
    torch.save(payload, path)
    return path


def save_lookup_checkpoint(path, predictions):
    """Stub checkpoint that answers with stored vectors keyed by image path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "kind": "lookup",
        "predictions": {str(k): [float(x) for x in v] for k, v in predictions.items()},
    }
    torch.save(payload, path)
    return path


def read_checkpoint(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise LoadError(f"{path} is not a supergaze checkpoint")
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise LoadError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    return payload


def load_model(path, pretrained=False):
    """Rebuild a :class:`GazeModel` from a checkpoint (no ImageNet download)."""
    payload = read_checkpoint(path)
    if payload["kind"] != "model":
        raise LoadError(f"{path} holds a {payload['kind']!r} checkpoint, not a model")
    cfg = model_config_from_dict({**payload["config"], "pretrained": pretrained})
    model = GazeModel(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
