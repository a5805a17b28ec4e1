"""Image tensor helpers: loading, saving and the single bilinear resampler.

Images are float32 tensors shaped ``(3, H, W)`` with values in [0, 1].
"""

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import ConfigurationError


def check_image(image):
    if not isinstance(image, torch.Tensor) or image.ndim != 3 or image.shape[0] != 3:
        shape = tuple(image.shape) if hasattr(image, "shape") else type(image)
        raise ConfigurationError(f"expected a (3, H, W) image tensor, got {shape}")
    if image.shape[1] < 1 or image.shape[2] < 1:
        raise ConfigurationError("image has empty spatial dimensions")
    return image


def from_array(array):
    """``(H, W, 3)`` uint8 or float array -> ``(3, H, W)`` float32 tensor."""
    array = np.asarray(array)
    if array.dtype == np.uint8:
        array = array.astype(np.float32) / 255.0
    return torch.from_numpy(np.ascontiguousarray(array, dtype=np.float32)).permute(2, 0, 1).contiguous()


def to_array(image):
    """``(3, H, W)`` tensor -> ``(H, W, 3)`` uint8 array."""
    arr = image.detach().clamp(0, 1).permute(1, 2, 0).cpu().numpy()
    return np.round(arr * 255.0).astype(np.uint8)


def load_image(path):
    with Image.open(path) as im:
        return from_array(np.asarray(im.convert("RGB")))


def save_image(image, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_array(image)).save(path)


def resize(image, height, width=None):
    """Bilinear resize (half-pixel centres, edge clamping, no antialiasing).

    Returns the input object itself when the size already matches.
    """
    width = height if width is None else width
    check_image(image)
    if image.shape[1] == height and image.shape[2] == width:
        return image
    out = F.interpolate(image[None], size=(height, width), mode="bilinear",
                        align_corners=False, antialias=False)
    return out[0]


def crop(image, x0, y0, x1, y1):
    """Integer pixel crop ``image[:, y0:y1, x0:x1]``."""
    return image[:, y0:y1, x0:x1]
