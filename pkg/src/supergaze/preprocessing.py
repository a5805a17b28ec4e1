"""Model inputs from raw head images: eye crops, SR heads, multiscale and temporal zoom.

Every resize goes through :func:`supergaze.imaging.resize` (bilinear), so
identical inputs give bitwise-identical outputs.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
import torch

from .errors import ConfigurationError, PreprocessingError
from .imaging import check_image, crop, resize

logger = logging.getLogger(__name__)

HEAD_SIZE = 224
EYE_SIZE = 64
STATIC_SCALES = (224, 200, 175, 150)
TEMPORAL_SCALES = (224, 200, 175, 150, 175, 200, 224)
WINDOW = len(TEMPORAL_SCALES)
CENTER_FRAME = WINDOW // 2

SR_CONFIGS = ("none", "head", "head_eyecrops", "head_and_eyes")

EYE_BOX_SCALE = 1.6


@dataclass(frozen=True)
class EyeRegions:
    """Eye boxes ``(x0, y0, x1, y1)`` in pixels; ``None`` when absent."""

    left: tuple = None
    right: tuple = None

    def scaled(self, sx, sy):
        def f(box):
            if box is None:
                return None
            return (box[0] * sx, box[1] * sy, box[2] * sx, box[3] * sy)
        return EyeRegions(f(self.left), f(self.right))


def eye_box_from_landmarks(points, width, height, scale=EYE_BOX_SCALE):
    """Square box around eye landmarks, side ``scale`` times their larger extent.

    Clipped to the image; ``None`` if nothing of positive area remains.
    """
    if points is None or len(points) == 0:
        return None
    pts = np.asarray(points, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    cx, cy = (lo + hi) / 2
    half = scale * max(hi[0] - lo[0], hi[1] - lo[1], 1.0) / 2
    box = (max(0.0, cx - half), max(0.0, cy - half), min(float(width), cx + half), min(float(height), cy + half))
    if box[2] <= box[0] or box[3] <= box[1]:
        return None
    return box


def detect_eyes(head, detector):
    """Eye regions of the largest detected face; detector failures give absent eyes."""
    check_image(head)
    if detector is None:
        return EyeRegions()
    try:
        faces = detector.detect(head)
    except Exception as exc:  # detector failure is not an error here
        logger.warning("eye detection failed: %s", exc)
        return EyeRegions()
    if not faces:
        return EyeRegions()
    face = max(faces, key=lambda d: d.area)
    h, w = head.shape[1:]
    return EyeRegions(eye_box_from_landmarks(face.left_eye, w, h),
                      eye_box_from_landmarks(face.right_eye, w, h))


def _pixel_box(box, width, height):
    x0 = max(0, int(math.floor(box[0])))
    y0 = max(0, int(math.floor(box[1])))
    x1 = min(width, int(math.ceil(box[2])))
    y1 = min(height, int(math.ceil(box[3])))
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def crop_eye(head, box, enhancer=None):
    """One 64x64 eye image; an absent (or empty) box gives an all-zero image."""
    if box is None:
        return torch.zeros(3, EYE_SIZE, EYE_SIZE, dtype=head.dtype)
    h, w = head.shape[1:]
    px = _pixel_box(box, w, h)
    if px is None:
        return torch.zeros(3, EYE_SIZE, EYE_SIZE, dtype=head.dtype)
    patch = crop(head, *px)
    if enhancer is not None:
        patch = enhancer(patch)
    return resize(patch, EYE_SIZE)


def crop_eyes(head, regions, enhancer=None):
    """``(left, right)`` 64x64 eye images cropped from ``head``."""
    check_image(head)
    return crop_eye(head, regions.left, enhancer), crop_eye(head, regions.right, enhancer)


def enhance(head, sr, frame_id=None):
    """Apply the enhancer and bring the result to 224x224."""
    check_image(head)
    try:
        out = sr(head)
    except Exception as exc:
        raise PreprocessingError(frame_id, exc) from exc
    return resize(check_image(out), HEAD_SIZE)


def crop_offset(scale, size=HEAD_SIZE):
    """Top/left margin of the centred crop; odd margins put the extra pixel bottom/right."""
    return (size - scale) // 2


def check_scales(scales):
    if not scales:
        raise ConfigurationError("scale schedule is empty")
    for s in scales:
        if not 1 <= int(s) <= HEAD_SIZE:
            raise ConfigurationError(f"scale {s} outside [1, {HEAD_SIZE}]")
    return tuple(int(s) for s in scales)


def zoom(head, scale):
    """Centre-crop ``scale x scale`` and resize back to 224; scale 224 is a no-op."""
    if scale > HEAD_SIZE:
        raise ConfigurationError(f"scale {scale} exceeds base resolution {HEAD_SIZE}")
    if scale == HEAD_SIZE:
        return head
    o = crop_offset(scale)
    return resize(crop(head, o, o, o + scale, o + scale), HEAD_SIZE)


def _check_head(head):
    check_image(head)
    if tuple(head.shape[1:]) != (HEAD_SIZE, HEAD_SIZE):
        raise ConfigurationError(f"head image must be {HEAD_SIZE}x{HEAD_SIZE}, got {tuple(head.shape[1:])}")


def multiscale(head, scales=STATIC_SCALES):
    _check_head(head)
    return [zoom(head, s) for s in check_scales(scales)]


def temporal_schedule(frames, scales=TEMPORAL_SCALES):
    """Per-frame zoom: frame k uses ``scales[k]`` (maximal zoom on the centre frame)."""
    frames = list(frames)
    if len(frames) != len(scales):
        raise ConfigurationError(f"temporal input needs exactly {len(scales)} frames, got {len(frames)}")
    for f in frames:
        _check_head(f)
    return [zoom(f, s) for f, s in zip(frames, check_scales(scales))]


class Preprocessor:
    """Turns raw head frames into ``(heads, eyes)`` tensors for the model.

    ``sr_config`` picks where the enhancer is applied:

    ``none``
        bilinear resize only; eyes cropped from the original frame.
    ``head``
        enhanced head; eyes cropped from the original frame.
    ``head_eyecrops``
        enhanced head; eyes cropped from the enhanced head.
    ``head_and_eyes``
        enhanced head; eyes cropped from the original and enhanced separately.

    ``detector=None`` means eye regions must be supplied by the caller
    (stored annotations); missing regions give zero eye images.
    """

    def __init__(self, sr_config="head", enhancer=None, detector=None,
                 static_scales=STATIC_SCALES, temporal_scales=TEMPORAL_SCALES):
        if sr_config not in SR_CONFIGS:
            raise ConfigurationError(f"unknown SR configuration {sr_config!r}; choose from {SR_CONFIGS}")
        if sr_config != "none" and enhancer is None:
            raise ConfigurationError(f"SR configuration {sr_config!r} needs an enhancer")
        self.sr_config = sr_config
        self.enhancer = enhancer
        self.detector = detector
        self.static_scales = check_scales(static_scales)
        self.temporal_scales = check_scales(temporal_scales)

    def frame(self, image, regions=None, enhanced=None, frame_id=None):
        """One 224x224 head plus ``(left, right)`` eyes, before any zooming.

        ``enhanced`` short-circuits the enhancer with a cached output.
        """
        check_image(image)
        if regions is None:
            regions = detect_eyes(image, self.detector)
        if self.sr_config == "none":
            return resize(image, HEAD_SIZE), crop_eyes(image, regions)
        if enhanced is None:
            try:
                enhanced = self.enhancer(image)
            except Exception as exc:
                raise PreprocessingError(frame_id, exc) from exc
            check_image(enhanced)
        head = resize(enhanced, HEAD_SIZE)
        if self.sr_config == "head":
            eyes = crop_eyes(image, regions)
        elif self.sr_config == "head_eyecrops":
            sy = enhanced.shape[1] / image.shape[1]
            sx = enhanced.shape[2] / image.shape[2]
            eyes = crop_eyes(enhanced, regions.scaled(sx, sy))
        else:
            try:
                eyes = crop_eyes(image, regions, enhancer=self.enhancer)
            except Exception as exc:
                raise PreprocessingError(frame_id, exc) from exc
        return head, eyes

    def prepare_static(self, image, regions=None, enhanced=None, frame_id=None):
        """Returns heads ``(S, 3, 224, 224)`` and eyes ``(2, 3, 64, 64)``."""
        head, eyes = self.frame(image, regions, enhanced, frame_id)
        heads = multiscale(head, self.static_scales)
        return torch.stack(heads), torch.stack(eyes)

    def prepare_temporal(self, frames, regions=None, enhanced=None, frame_ids=None):
        """Returns heads ``(7, 3, 224, 224)`` and eyes ``(14, 3, 64, 64)``.

        Eye images are ordered by time, then (left, right).
        """
        frames = list(frames)
        n = len(self.temporal_scales)
        if len(frames) != n:
            raise ConfigurationError(f"temporal input needs exactly {n} frames, got {len(frames)}")
        regions = regions or [None] * n
        enhanced = enhanced or [None] * n
        frame_ids = frame_ids or [None] * n
        heads, eyes = [], []
        for img, reg, enh, fid in zip(frames, regions, enhanced, frame_ids):
            head, pair = self.frame(img, reg, enh, fid)
            heads.append(head)
            eyes.extend(pair)
        heads = temporal_schedule(heads, self.temporal_scales)
        return torch.stack(heads), torch.stack(eyes)
