"""Convolutional feature extractors and conversion of feature maps to tokens."""

import logging

import torch
from torch import nn

from .errors import ConfigurationError
from .preprocessing import EYE_SIZE, HEAD_SIZE

logger = logging.getLogger(__name__)

STRIDE = 32
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
INPUT_SIZES = {"head": HEAD_SIZE, "eye": EYE_SIZE}


class ToyExtractor(nn.Module):
    """Two strided conv blocks with total stride 32, for fast tests."""

    def __init__(self, channels=32, hidden=16):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, hidden, kernel_size=8, stride=8),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, kernel_size=4, stride=4),
            nn.ReLU(inplace=True),
        )
        self.out_channels = channels

    def forward(self, x):
        return self.features(x)


def resnet18_trunk(pretrained=True):
    """ResNet18 up to (excluding) global pooling: stride 32, 512 channels.

    Falls back to random initialisation with a warning when the ImageNet
    weights cannot be obtained.
    """
    from torchvision.models import ResNet18_Weights, resnet18

    net = None
    if pretrained:
        try:
            net = resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
        except Exception as exc:
            logger.warning("ImageNet weights unavailable (%s); using random init", exc)
    if net is None:
        net = resnet18(weights=None)
    trunk = nn.Sequential(*list(net.children())[:-2])
    trunk.out_channels = 512
    return trunk


def to_tokens(fmap, n_images):
    """``(B*n, C, H, W)`` -> ``(B, n*H*W, C)``; order is image, row, column."""
    bn, c, h, w = fmap.shape
    b = bn // n_images
    return fmap.reshape(b, n_images, c, h, w).permute(0, 1, 3, 4, 2).reshape(b, n_images * h * w, c)


class BranchExtractor(nn.Module):
    """One shared CNN applied to every image of a branch, then tokenised."""

    def __init__(self, net, branch):
        super().__init__()
        if branch not in INPUT_SIZES:
            raise ConfigurationError(f"unknown branch {branch!r}")
        self.net = net
        self.branch = branch
        self.input_size = INPUT_SIZES[branch]
        self.channels = net.out_channels
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1), persistent=False)
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1), persistent=False)

    @property
    def grid(self):
        return self.input_size // STRIDE

    def tokens_per_image(self):
        return self.grid * self.grid

    def forward(self, images):
        """``images``: ``(B, n, 3, S, S)`` -> tokens ``(B, n * h * w, C)``."""
        if images.ndim != 5 or images.shape[2] != 3:
            raise ConfigurationError(f"expected (B, n, 3, S, S) images, got {tuple(images.shape)}")
        b, n, _, h, w = images.shape
        if h != self.input_size or w != self.input_size:
            raise ConfigurationError(
                f"{self.branch} images must be {self.input_size}x{self.input_size}, got {h}x{w}")
        x = images.reshape(b * n, 3, h, w)
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        return to_tokens(self.net(x), n)


def build_extractor(kind, branch, channels=32, pretrained=True):
    """``kind`` is ``"resnet18"`` (512 channels) or ``"toy"`` (``channels``)."""
    if kind == "resnet18":
        net = resnet18_trunk(pretrained)
    elif kind == "toy":
        net = ToyExtractor(channels)
    else:
        raise ConfigurationError(f"unknown backbone {kind!r}")
    return BranchExtractor(net, branch)


def extract(images, which, net):
    """Tokens ``(L, C)`` for a list of images of one sample."""
    if isinstance(net, nn.Module) and not isinstance(net, BranchExtractor):
        net = BranchExtractor(net, which)
    if net.branch != which:
        raise ConfigurationError(f"extractor is for {net.branch!r} images, not {which!r}")
    batch = torch.stack(list(images))[None]
    return net(batch)[0]
