"""Pluggable face/eye landmark detectors.

A detector is any object with ``detect(image) -> list[FaceDetection]``
where ``image`` is a ``(3, H, W)`` tensor. Coordinates are pixels with
the origin at the top-left corner of the image.
"""

from dataclasses import dataclass
import logging

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class FaceDetection:
    face_box: tuple            # (x0, y0, x1, y1) in pixels
    left_eye: np.ndarray = None   # (k, 2) landmark points (x, y), image-left eye
    right_eye: np.ndarray = None

    @property
    def area(self):
        x0, y0, x1, y1 = self.face_box
        return max(0.0, x1 - x0) * max(0.0, y1 - y0)

    def center(self):
        x0, y0, x1, y1 = self.face_box
        return (x0 + x1) / 2, (y0 + y1) / 2


class NullDetector:
    """Never finds a face."""

    def detect(self, image):
        return []


class BlobDetector:
    """Colour-threshold detector for the synthetic fixtures.

    Faces are bright, reddish connected regions; eyes are dark regions
    enclosed by a face. Each eye yields its four extreme points as
    landmarks. Not meant for real photographs.
    """

    def __init__(self, face_threshold=0.6, eye_threshold=0.3, min_face_area=12, min_eye_area=2):
        self.face_threshold = face_threshold
        self.eye_threshold = eye_threshold
        self.min_face_area = min_face_area
        self.min_eye_area = min_eye_area

    def detect(self, image):
        arr = image.detach().cpu().numpy()
        red, green, blue = arr[0], arr[1], arr[2]
        skin = (red > self.face_threshold) & (red > blue + 0.15)
        filled = ndimage.binary_fill_holes(skin)
        labels, count = ndimage.label(filled)
        detections = []
        for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
            region = labels[sl] == idx
            if region.sum() < self.min_face_area:
                continue
            ys, xs = sl
            box = (float(xs.start), float(ys.start), float(xs.stop), float(ys.stop))
            dark = region & (red[sl] < self.eye_threshold)
            eyes = self._eye_landmarks(dark, offset=(xs.start, ys.start))
            left, right = (eyes + [None, None])[:2]
            detections.append(FaceDetection(box, left, right))
        detections.sort(key=lambda d: d.area, reverse=True)
        return detections

    def _eye_landmarks(self, mask, offset):
        labels, count = ndimage.label(mask)
        blobs = []
        for idx in range(1, count + 1):
            ys, xs = np.nonzero(labels == idx)
            if len(xs) < self.min_eye_area:
                continue
            pts = np.array([
                [xs.min(), ys[xs.argmin()]],
                [xs.max() + 1, ys[xs.argmax()]],
                [xs[ys.argmin()], ys.min()],
                [xs[ys.argmax()], ys.max() + 1],
            ], dtype=np.float64)
            pts += offset
            blobs.append((len(xs), pts))
        blobs.sort(key=lambda b: b[0], reverse=True)
        eyes = [pts for _, pts in blobs[:2]]
        eyes.sort(key=lambda p: p[:, 0].mean())
        return eyes


class DlibDetector:
    """Adapter for dlib's frontal face detector + 68-point shape predictor.

    Requires the optional ``dlib`` package and a landmark model file.
    Points 36-41 are the eye on the image left, 42-47 the other one.
    """

    def __init__(self, predictor_path, upsample=1):
        try:
            import dlib
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ConfigurationError("the 'dlib' detector needs the dlib package") from exc
        self._detector = dlib.get_frontal_face_detector()
        self._predictor = dlib.shape_predictor(str(predictor_path))
        self._upsample = upsample

    def detect(self, image):  # pragma: no cover - needs dlib
        import dlib  # noqa: F401
        from .imaging import to_array

        rgb = to_array(image)
        out = []
        for rect in self._detector(rgb, self._upsample):
            shape = self._predictor(rgb, rect)
            pts = np.array([[shape.part(i).x, shape.part(i).y] for i in range(68)], dtype=np.float64)
            box = (float(rect.left()), float(rect.top()), float(rect.right()), float(rect.bottom()))
            out.append(FaceDetection(box, pts[36:42], pts[42:48]))
        return out


_DETECTORS = {
    "none": NullDetector,
    "blob": BlobDetector,
    "dlib": DlibDetector,
}


def get_detector(name, **kwargs):
    """Detector by name. ``"annotation"`` returns ``None``: use stored boxes."""
    if name == "annotation":
        return None
    try:
        factory = _DETECTORS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown detector {name!r}; choose from {sorted(_DETECTORS) + ['annotation']}") from None
    return factory(**kwargs)


def register_detector(name, factory):
    _DETECTORS[name] = factory
