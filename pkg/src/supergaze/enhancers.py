"""Super-resolution enhancers and the on-disk SR cache.

An enhancer is any callable mapping a ``(3, H, W)`` image to a
``(3, H', W')`` image. The learned SR network itself lives outside this
package; plug it in with :class:`CallableEnhancer` or an
``"module:attr"`` name, or precompute a cache with :func:`write_sr_cache`.
"""

import importlib
import logging
from pathlib import Path

import torch.nn.functional as F

from .errors import ConfigurationError
from .imaging import check_image, load_image, save_image

logger = logging.getLogger(__name__)

SR_SUFFIX = ".sr.png"


class IdentityEnhancer:
    def __call__(self, image):
        return image


class BicubicEnhancer:
    """Reference upscaler: bicubic interpolation by an integer factor."""

    def __init__(self, factor=4):
        if factor < 1:
            raise ConfigurationError("upscale factor must be >= 1")
        self.factor = int(factor)

    def __call__(self, image):
        check_image(image)
        if self.factor == 1:
            return image
        h, w = image.shape[1:]
        out = F.interpolate(image[None], size=(h * self.factor, w * self.factor),
                            mode="bicubic", align_corners=False)
        return out[0].clamp_(0.0, 1.0)


class CallableEnhancer:
    """Wraps an external model (any callable) as an enhancer."""

    def __init__(self, fn):
        if not callable(fn):
            raise ConfigurationError("external enhancer must be callable")
        self.fn = fn

    def __call__(self, image):
        out = self.fn(image)
        return check_image(out)


_ENHANCERS = {
    "identity": IdentityEnhancer,
    "bicubic": BicubicEnhancer,
}


def get_enhancer(name, **kwargs):
    """Enhancer by registered name, or ``"package.module:factory"``."""
    if name in _ENHANCERS:
        return _ENHANCERS[name](**kwargs)
    if ":" in name:
        module, _, attr = name.partition(":")
        try:
            factory = getattr(importlib.import_module(module), attr)
        except (ImportError, AttributeError) as exc:
            raise ConfigurationError(f"cannot import enhancer {name!r}: {exc}") from exc
        return CallableEnhancer(factory(**kwargs))
    raise ConfigurationError(f"unknown enhancer {name!r}; choose from {sorted(_ENHANCERS)} or 'module:attr'")


def register_enhancer(name, factory):
    _ENHANCERS[name] = factory


def sr_cache_path(image_path, source_root, cache_root):
    """Mirror ``source_root/a/b.jpg`` to ``cache_root/a/b.sr.png``."""
    rel = Path(image_path).resolve().relative_to(Path(source_root).resolve())
    return Path(cache_root) / rel.parent / (rel.stem + SR_SUFFIX)


def write_sr_cache(image_paths, source_root, cache_root, enhancer, overwrite=False):
    """Enhance every image once and store it losslessly. Returns paths written."""
    written = []
    for path in image_paths:
        target = sr_cache_path(path, source_root, cache_root)
        if target.exists() and not overwrite:
            continue
        save_image(enhancer(load_image(path)), target)
        written.append(target)
    logger.info("wrote %d SR cache entries under %s", len(written), cache_root)
    return written


def load_cached(image_path, source_root, cache_root):
    """Cached enhanced image, or ``None`` when absent."""
    target = sr_cache_path(image_path, source_root, cache_root)
    return load_image(target) if target.exists() else None
